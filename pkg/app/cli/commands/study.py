"""Comando `study`: executa um estudo replicado e grava `<estudo>.csv` e `manifest.json`.
- A configuração pode ser um arquivo simples ou o manifesto de uma execução anterior;
`--runs`, `--seed` e `--workers` sobrescrevem o arquivo.
- O manifesto sempre registra a configuração efetiva completa.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import structlog

from app.cli.schemas import (
    STUDY_CONFIGS,
    ChainSource,
    ConsistencyStudyConfig,
    LambdaSweepStudyConfig,
    MseRatioStudyConfig,
    StudyConfig,
    StudyManifest,
    load_study_config,
    validate_document,
)
from app.services.storage import load_chain, read_json, write_csv, write_json
from common.config import settings
from tclambda.experiments import (
    ExperimentReport,
    build_layered_chain,
    run_consistency_study,
    run_lambda_sweep,
    run_mse_ratio_study,
)
from tclambda.markov import MarkovChain


logger = structlog.get_logger("cli.study")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("study", help="Executa um estudo sintetico replicado")
    parser.add_argument("name", choices=sorted(STUDY_CONFIGS))
    parser.add_argument("--config", type=Path, required=True, help="Configuracao JSON ou manifesto")
    parser.add_argument("-o", "--out-dir", type=Path, default=None)
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.set_defaults(func=run)


def _resolve_chain(source: ChainSource) -> MarkovChain:
    if source.layered is not None:
        return build_layered_chain(source.layered)
    return load_chain(source.path)


def _apply_overrides(config: StudyConfig, args: argparse.Namespace, source: str) -> StudyConfig:
    overrides = {k: getattr(args, k) for k in ("runs", "seed", "workers") if getattr(args, k) is not None}
    if not overrides:
        return config
    raw = config.model_dump(mode="json", by_alias=True) | overrides
    return validate_document(type(config), raw, source)


def execute(name: str, config: StudyConfig) -> ExperimentReport:
    if isinstance(config, MseRatioStudyConfig):
        return run_mse_ratio_study(
            config.W_values,
            config.T,
            config.runs,
            config.seed,
            probe_state=config.probe_state,
            samples_per_width=config.samples_per_width,
            workers=config.workers,
            keep_raw=config.keep_raw,
        )
    if isinstance(config, ConsistencyStudyConfig):
        return run_consistency_study(
            _resolve_chain(config.chain),
            config.N_values,
            config.runs,
            config.seed,
            probe_state=config.probe_state,
            workers=config.workers,
        )
    if isinstance(config, LambdaSweepStudyConfig):
        return run_lambda_sweep(
            _resolve_chain(config.chain),
            config.N,
            config.lambda_values,
            config.train,
            config.runs,
            config.seed,
            n_eval=config.n_eval,
            prefix_len=config.prefix_len,
            workers=config.workers,
        )
    raise ValueError(f"estudo desconhecido: {name}")


def run(args: argparse.Namespace) -> int:
    source = str(args.config)
    config = load_study_config(args.name, read_json(args.config), source)
    config = _apply_overrides(config, args, source)
    out_dir = args.out_dir or settings.output_dir

    with structlog.contextvars.bound_contextvars(study=args.name):
        report = execute(args.name, config)

    write_csv(out_dir / f"{args.name}.csv", report.csv_header(), report.csv_rows())
    if report.raw is not None:
        write_json(out_dir / "raw.json", report.raw)
    manifest = StudyManifest(study=args.name, config=config.model_dump(mode="json", by_alias=True, exclude_none=True))
    write_json(out_dir / "manifest.json", manifest.model_dump())
    logger.info("study_written", study=args.name, conditions=len(report.results), out_dir=str(out_dir))
    return 0
