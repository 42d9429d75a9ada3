"""Comando `solve`: probabilidades de absorção exatas de uma cadeia."""

from __future__ import annotations

import argparse
from pathlib import Path

import structlog

from app.services.storage import load_chain, write_csv
from tclambda.markov import solve_absorption_closed_form, solve_absorption_fixed_point


logger = structlog.get_logger("cli.solve")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("solve", help="Resolve P* de uma cadeia e grava em CSV")
    parser.add_argument("chain", type=Path, help="Arquivo JSON da cadeia")
    parser.add_argument("-o", "--out", type=Path, required=True, help="CSV de saida (state,p_1..p_K)")
    parser.add_argument("--method", choices=["fixed-point", "closed-form"], default="fixed-point")
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iters", type=int, default=None)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    chain = load_chain(args.chain)
    if args.method == "closed-form":
        P = solve_absorption_closed_form(chain)
        iterations = None
    else:
        P, iterations = solve_absorption_fixed_point(chain, tol=args.tol, max_iters=args.max_iters)
    write_csv(args.out, P.csv_header(), P.csv_rows())
    logger.info("solve_completed", method=args.method, M=chain.M, K=chain.K, iterations=iterations, out=str(args.out))
    return 0
