"""Ponto de entrada da CLI: configura logs, monta os subcomandos e despacha.

Uso: `python -m app.main <comando> [opções]`. Códigos de saída: 0 sucesso,
2 erro de uso/configuração, 3 falha numérica, 1 erro inesperado.
"""

from __future__ import annotations

import argparse
from typing import Sequence

import structlog

from app.cli.commands import estimate, evaluate, layered, sample, solve, study, train
from app.cli.exception_handlers import dispatch
from common.config import settings
from common.logging import setup_logging
from tclambda import __version__


logger = structlog.get_logger("cli")

COMMANDS = (solve, sample, estimate, train, evaluate, layered, study)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tclambda",
        description="Classificacao incremental de sequencias em cadeias de Markov absorventes com a perda TC-lambda.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Sobrescreve TCLAMBDA_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level or settings.log_level)
    logger.debug("command_started", command=args.command)
    return dispatch(args.func, args)


if __name__ == "__main__":
    raise SystemExit(main())
