"""Comando `train`: treina um classificador tabular com a perda TC-λ.
- Parâmetros vêm de `--config` (JSON de TrainConfig) sobrescritos pelas flags.
- Grava `train_report.csv`, `checkpoint.json` e `manifest.json` no diretório de saída.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import structlog

from app.cli.commands.estimate import add_dimension_args, dataset_dimensions
from app.cli.schemas import CommandManifest, validate_document
from app.services.storage import load_dataset, read_json, save_checkpoint, write_csv, write_json
from common.config import settings
from tclambda.losses import lambda_from_lookahead
from tclambda.trainer import TrainConfig, fit_gradient


logger = structlog.get_logger("cli.train")

_FLAG_FIELDS = {
    "learning_rate": "learning_rate",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "seed": "seed",
    "target_refresh": "target_refresh",
    "outer_iterations": "outer_iterations",
    "reduction": "reduction",
}


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="Treina por gradiente com a perda TC-lambda")
    parser.add_argument("data", type=Path)
    weighting = parser.add_mutually_exclusive_group()
    weighting.add_argument("--lambda", dest="lam", type=float, default=None, help="lambda em [0, 1]")
    weighting.add_argument("--lookahead", type=float, default=None, help="Horizonte efetivo L; lambda = L/(1+L)")
    parser.add_argument("--lr", dest="learning_rate", type=float, default=None)
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--refresh", dest="target_refresh", choices=["per-step", "per-outer"], default=None)
    parser.add_argument("--outer-iterations", type=int, default=None)
    parser.add_argument("--reduction", choices=["mean", "sum"], default=None)
    parser.add_argument("--config", type=Path, default=None, help="JSON com campos de TrainConfig")
    parser.add_argument("--eval-data", type=Path, default=None, help="Dados para a KL sucessiva por epoca")
    parser.add_argument("-o", "--out-dir", type=Path, default=None)
    add_dimension_args(parser)
    parser.set_defaults(func=run)


def build_train_config(args: argparse.Namespace) -> TrainConfig:
    """Mescla o arquivo de configuração com as flags informadas."""
    raw = dict(read_json(args.config)) if args.config is not None else {}
    for attr, key in _FLAG_FIELDS.items():
        value = getattr(args, attr)
        if value is not None:
            raw[key] = value
    if args.lookahead is not None:
        raw.pop("lam", None)
        raw["lambda"] = lambda_from_lookahead(args.lookahead)
    elif args.lam is not None:
        raw.pop("lam", None)
        raw["lambda"] = args.lam
    return validate_document(TrainConfig, raw, str(args.config or "train"))


def run(args: argparse.Namespace) -> int:
    cfg = build_train_config(args)
    out_dir = args.out_dir or settings.output_dir
    M, K = dataset_dimensions(args)
    data = load_dataset(args.data, M, K)
    eval_data = load_dataset(args.eval_data, data.M, data.K) if args.eval_data is not None else None

    report = fit_gradient(data, cfg, eval_data=eval_data)

    train_dump = cfg.model_dump(mode="json", by_alias=True)
    write_csv(out_dir / "train_report.csv", report.csv_header(), report.csv_rows())
    save_checkpoint(report.model, out_dir / "checkpoint.json", train_dump)
    manifest = CommandManifest(
        command="train",
        config={
            "data": str(args.data),
            "eval_data": str(args.eval_data) if args.eval_data is not None else None,
            "M": data.M,
            "K": data.K,
            "train": train_dump,
        },
    )
    write_json(out_dir / "manifest.json", manifest.model_dump())
    logger.info("train_written", out_dir=str(out_dir), final_loss=report.loss_trace[-1])
    return 0
