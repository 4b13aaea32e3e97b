"""
Ponto de entrada do CLI `dsre`: um binário com subcomandos montados a partir de dsre.commands.
Status de saída: 0 sucesso, 1 erro de validação, 2 erro de uso.
"""
import argparse
import logging
import sys
from typing import List, Optional

from dsre import settings
from dsre.commands.dataset import register as dataset_commands
from dsre.commands.predict import register as predict_commands
from dsre.commands.replay import register as replay_commands
from dsre.commands.train import register as train_commands
from dsre.errors import DsreError

logger = logging.getLogger("dsre")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsre",
        description="Extração de relações com supervisão distante: PCNN, BGWA, EA, ensemble e construção de dataset.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    # Treino
    train_commands(sub)
    # Inferência, avaliação e ensemble
    predict_commands(sub)
    # Dados
    dataset_commands(sub)
    replay_commands(sub)
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    settings.configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse já escreveu o uso no stderr
        return e.code if isinstance(e.code, int) else 2
    args.argv = argv
    try:
        args.handler(args)
    except DsreError as e:
        logger.error("%s: %s", type(e).__name__, e.message)
        return e.exit_code
    except OSError as e:
        logger.error("%s", e)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
