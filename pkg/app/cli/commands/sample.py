"""Comando `sample`: amostra trajetórias rotuladas de uma cadeia."""

from __future__ import annotations

import argparse
from pathlib import Path

import structlog

from app.services.storage import load_chain, save_dataset
from tclambda.markov import sample_trajectories


logger = structlog.get_logger("cli.sample")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("sample", help="Amostra N trajetorias no formato de linhas")
    parser.add_argument("chain", type=Path)
    parser.add_argument("-n", "--num", dest="N", type=int, required=True, help="Numero de trajetorias")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-o", "--out", type=Path, required=True)
    parser.add_argument("--step-cap", type=int, default=None, help="Limite de passos por trajetoria")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    chain = load_chain(args.chain)
    data = sample_trajectories(chain, args.N, args.seed, step_cap=args.step_cap)
    save_dataset(data, args.out)
    logger.info("sample_completed", N=args.N, seed=args.seed, out=str(args.out))
    return 0
