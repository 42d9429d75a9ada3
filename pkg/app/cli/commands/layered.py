"""Comando `layered`: grava a cadeia sintética em camadas como arquivo de cadeia."""

from __future__ import annotations

import argparse
from pathlib import Path

from app.cli.schemas import validate_document
from app.services.storage import save_chain
from tclambda.experiments import LayeredChainSpec, build_layered_chain


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("layered", help="Gera a cadeia com T camadas de W estados")
    parser.add_argument("-W", "--width", type=int, required=True)
    parser.add_argument("-T", "--layers", type=int, required=True)
    parser.add_argument("-o", "--out", type=Path, required=True)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    spec = validate_document(LayeredChainSpec, {"W": args.width, "T": args.layers}, "layered")
    save_chain(build_layered_chain(spec), args.out)
    return 0
