"""
Utilitários de hash: arquivos de entrada/saída do manifesto e checkpoints.
Também a entrada de ZIP com data fixa, usada por tudo que grava arquivos compactados.
"""
import hashlib
import os
import zipfile
from typing import Dict, Iterable

CHUNK = 1 << 20
FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def zip_entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=FIXED_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    return info


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(CHUNK), b""):
            digest.update(block)
    return digest.hexdigest()


def hash_files(paths: Iterable[str]) -> Dict[str, str]:
    """Mapa caminho -> sha256, só para arquivos que existem."""
    return {p: file_sha256(p) for p in paths if p and os.path.isfile(p)}


def hash_dir(path: str) -> Dict[str, str]:
    """Hash de cada arquivo do diretório (nome relativo), em ordem alfabética."""
    out = {}
    for name in sorted(os.listdir(path)):
        full = os.path.join(path, name)
        if os.path.isfile(full):
            out[name] = file_sha256(full)
    return out
