"""Comando `evaluate`: métricas de um checkpoint em trajetórias rotuladas, por prefixo."""

from __future__ import annotations

import argparse
from pathlib import Path

import structlog

from app.services.storage import load_checkpoint, load_dataset, write_csv
from common.errors import UsageError
from tclambda.metrics import METRIC_TABLE_HEADER, build_records, metric_table


logger = structlog.get_logger("cli.evaluate")


def parse_prefix_lens(text: str) -> list[int | None]:
    """"1,2,full" -> [1, 2, None]."""
    out: list[int | None] = []
    for token in (t.strip() for t in text.split(",")):
        if token == "full":
            out.append(None)
            continue
        try:
            value = int(token)
        except ValueError as exc:
            raise UsageError(f"Prefixo invalido: '{token}'") from exc
        if value < 1:
            raise UsageError(f"Prefixo deve ser >= 1: {value}")
        out.append(value)
    return out


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("evaluate", help="Acuracia, NLL, ROC AUC e KL sucessiva de um checkpoint")
    parser.add_argument("checkpoint", type=Path)
    parser.add_argument("data", type=Path)
    parser.add_argument("--prefix-lens", default="full", help="Lista separada por virgulas; 'full' = sequencia inteira")
    parser.add_argument("-o", "--out", type=Path, required=True)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    prefix_lens = parse_prefix_lens(args.prefix_lens)
    model = load_checkpoint(args.checkpoint)
    data = load_dataset(args.data, model.M, model.K)
    rows = metric_table(build_records(model.table(), data), prefix_lens)
    write_csv(args.out, METRIC_TABLE_HEADER, rows)
    logger.info("evaluate_completed", N=len(data), prefixes=len(prefix_lens), out=str(args.out))
    return 0
