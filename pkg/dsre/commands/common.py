"""
Peças comuns dos subcomandos: flags globais, nomes fixos dos arquivos de saída e o manifesto da execução.
O manifesto é gravado antes de qualquer artefato e atualizado com os hashes no fim.
"""
import argparse
import logging
import os
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional

from dsre import settings
from dsre.config import TrainConfig
from dsre.errors import UsageError
from dsre.fingerprint import hash_dir, hash_files
from dsre.schemas import RunManifest

logger = logging.getLogger(__name__)

# ---------- Arquivos dentro de --out ----------
MODEL_FILE = "model.ckpt"
EPOCHS_FILE = "epochs.csv"
PREDICTIONS_FILE = "predictions.tsv"
WEIGHTS_FILE = "weights.txt"
PR_FILE = "pr.csv"
REPORT_FILE = "report.txt"
ATTENTION_FILE = "attention.csv"
CONFIDENCE_FILE = "confidence.csv"
STATS_FILE = "stats.txt"
STATS_XLSX = "stats.xlsx"
SEEDS_FILE = "seeds.jsonl"
DOCS_FILE = "docs.jsonl"
MANIFEST_FILE = "manifest.json"


def split_file(name: str) -> str:
    return f"{name}.jsonl"


def add_global_flags(parser: argparse.ArgumentParser, out_required: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help=f"semente de toda a aleatoriedade (default: {TrainConfig.model_fields['seed'].default})")
    parser.add_argument("--threads", type=int, default=settings.THREADS,
                        help="workers nas fases só de leitura (default: %(default)s, ou DSRE_THREADS)")
    parser.add_argument("--config", default=None, help="arquivo key=value com campos do TrainConfig")
    parser.add_argument("--out", required=out_required, default=None,
                        help="diretório de saída; nada é escrito fora dele")


def seed_of(args: argparse.Namespace) -> int:
    return args.seed if args.seed is not None else TrainConfig.model_fields["seed"].default


def threads_of(args: argparse.Namespace) -> int:
    if args.threads < 1:
        raise UsageError(f"--threads deve ser >= 1: {args.threads}")
    return args.threads


def out_path(args: argparse.Namespace, name: str) -> str:
    return os.path.join(args.out, name)


def parse_ratios(text: str):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as e:
        raise UsageError(f"--ratios inválido: {text}") from e


# ---------- Manifesto ----------
def write_manifest(path: str, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.model_dump_json(indent=2))


def read_manifest(path: str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return RunManifest.model_validate_json(fh.read())


@contextmanager
def recorded_run(
    args: argparse.Namespace, inputs: Iterable[Optional[str]], cfg: Optional[TrainConfig] = None
) -> Iterator[Optional[RunManifest]]:
    """Cria --out, grava o manifesto inicial e, se tudo der certo, completa com os hashes das saídas."""
    if not args.out:
        yield None
        return
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(
        subcommand=args.command,
        argv=list(args.argv),
        config=cfg.model_dump() if cfg else {},
        seed=cfg.seed if cfg else seed_of(args),
        inputs=hash_files(p for p in inputs if p),
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    path = out_path(args, MANIFEST_FILE)
    write_manifest(path, manifest)
    yield manifest
    outputs = {k: v for k, v in hash_dir(args.out).items() if k != MANIFEST_FILE}
    write_manifest(path, manifest.model_copy(update={"outputs": outputs}))
    logger.info("manifesto em %s (%d artefatos)", path, len(outputs))
