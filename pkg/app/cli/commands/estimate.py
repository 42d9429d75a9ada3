"""Comando `estimate`: estimadores direto e indireto a partir de um arquivo de dados."""

from __future__ import annotations

import argparse
from pathlib import Path

import structlog

from app.services.storage import load_chain, load_dataset, write_csv
from tclambda.estimation import estimate_direct, estimate_indirect


logger = structlog.get_logger("cli.estimate")


def add_dimension_args(parser: argparse.ArgumentParser) -> None:
    """M e K do arquivo de dados: explícitos, tirados de uma cadeia ou inferidos dos índices."""
    parser.add_argument("--states", dest="M", type=int, default=None, help="Numero de estados transientes M")
    parser.add_argument("--classes", dest="K", type=int, default=None, help="Numero de classes K")
    parser.add_argument("--chain", type=Path, default=None, help="Cadeia da qual ler M e K")


def dataset_dimensions(args: argparse.Namespace) -> tuple[int | None, int | None]:
    if args.chain is not None:
        chain = load_chain(args.chain)
        return args.M or chain.M, args.K or chain.K
    return args.M, args.K


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("estimate", help="Estima P a partir de trajetorias rotuladas")
    parser.add_argument("data", type=Path)
    parser.add_argument("--method", choices=["direct", "indirect"], default="direct")
    parser.add_argument("-o", "--out", type=Path, required=True)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iters", type=int, default=None)
    add_dimension_args(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    M, K = dataset_dimensions(args)
    data = load_dataset(args.data, M, K)
    if args.method == "indirect":
        report = estimate_indirect(data, tol=args.tol, max_iters=args.max_iters)
    else:
        report = estimate_direct(data)
    write_csv(args.out, report.csv_header(), report.csv_rows())
    logger.info(
        "estimate_completed",
        method=args.method,
        N=len(data),
        fallback_states=int(report.fallback.sum()),
        out=str(args.out),
    )
    return 0
