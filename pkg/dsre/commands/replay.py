"""
Subcomando replay: roda de novo o argv de um manifest.json, com outro --out.
As entradas precisam ter o mesmo hash registrado no manifesto.
"""
import argparse
import logging
from typing import List

from dsre.commands.common import read_manifest
from dsre.errors import ConfigError, UsageError
from dsre.fingerprint import hash_files

logger = logging.getLogger(__name__)


def register(sub) -> None:
    p = sub.add_parser("replay", help="reexecuta um manifest.json em outro diretório")
    p.add_argument("--manifest", required=True, help="manifest.json de uma execução anterior")
    p.add_argument("--out", required=True, help="novo diretório de saída")
    p.set_defaults(handler=run_replay)


def replace_out(argv: List[str], out: str) -> List[str]:
    result, skip, found = [], False, False
    for token in argv:
        if skip:
            skip = False
        elif token == "--out":
            result += ["--out", out]
            skip = found = True
        elif token.startswith("--out="):
            result.append(f"--out={out}")
            found = True
        else:
            result.append(token)
    if not found:
        result += ["--out", out]
    return result


def run_replay(args: argparse.Namespace) -> None:
    from dsre.main import dispatch

    manifest = read_manifest(args.manifest)
    if manifest.subcommand == "replay":
        raise UsageError("um manifesto de replay não pode ser reexecutado")
    current = hash_files(manifest.inputs)
    changed = sorted(p for p, digest in manifest.inputs.items() if current.get(p) != digest)
    if changed:
        raise ConfigError(f"entradas mudaram desde o manifesto: {changed}")
    argv = replace_out(manifest.argv, args.out)
    logger.info("replay de '%s' em %s", manifest.subcommand, args.out)
    code = dispatch(argv)
    if code != 0:
        raise ConfigError(f"replay terminou com código {code}")
