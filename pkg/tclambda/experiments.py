"""Estudos sintéticos replicados sobre a cadeia em camadas.
- `run_mse_ratio_study`: razão MSE(indireto)/MSE(direto) em um estado da primeira camada, N = 20W.
- `run_consistency_study`: erro máximo dos dois estimadores contra P* em função de N.
- `run_lambda_sweep`: treino por gradiente para vários λ e métricas em dados de avaliação.
Cada (condição, replicação) usa a semente `seed + deslocamento da condição + índice`.
"""

from __future__ import annotations

from functools import partial
from typing import Any, Callable, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from common.config import settings
from common.errors import UndefinedMetricError, UsageError
from tclambda.estimation import estimate_direct, estimate_indirect
from tclambda.markov import MarkovChain, sample_trajectories, solve_absorption_closed_form
from tclambda.metrics import accuracy, build_records, mean_nll, mean_successive_kl, roc_auc_ovr_macro
from tclambda.trainer import TrainConfig, fit_gradient
from worker.runner import run_parallel


logger = structlog.get_logger("tclambda.experiments")

Z_95 = 1.96


class LayeredChainSpec(BaseModel):
    """Cadeia com T camadas de W estados e duas classes absorventes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    W: int = Field(ge=1)
    T: int = Field(ge=1)


class ConditionResult(BaseModel):
    condition: dict[str, Any]
    metric: str
    mean: float
    ci_lo: float
    ci_hi: float
    runs: int

    @model_validator(mode="after")
    def _ordered(self) -> ConditionResult:
        if not (np.isnan(self.ci_lo) or np.isnan(self.ci_hi)) and self.ci_lo > self.ci_hi:
            raise ValueError("ci_lo maior que ci_hi")
        return self


class ExperimentReport(BaseModel):
    """Resultado de um estudo: estimativas pontuais com IC 95% por condição e métrica."""

    study: str
    condition_columns: list[str]
    results: list[ConditionResult]
    config: dict[str, Any]
    raw: dict[str, list[float]] | None = None

    def csv_header(self) -> list[str]:
        return [*self.condition_columns, "metric", "mean", "ci_lo", "ci_hi", "runs"]

    def csv_rows(self) -> list[list]:
        return [
            [*(r.condition[c] for c in self.condition_columns), r.metric, r.mean, r.ci_lo, r.ci_hi, r.runs]
            for r in self.results
        ]

    def get(self, metric: str, **condition: Any) -> ConditionResult:
        for r in self.results:
            if r.metric == metric and all(r.condition.get(k) == v for k, v in condition.items()):
                return r
        raise KeyError((metric, condition))


def build_layered_chain(spec: LayeredChainSpec) -> MarkovChain:
    """Estado (camada t, posição w) tem índice (t-1)W + w; camada t vai uniformemente para t+1
    e a última camada absorve em (1/2, 1/2). O primeiro estado é uniforme na camada 1."""
    W, T = spec.W, spec.T
    M = W * T
    Q = np.zeros((M, M))
    for t in range(T - 1):
        Q[t * W : (t + 1) * W, (t + 1) * W : (t + 2) * W] = 1.0 / W
    R = np.zeros((M, 2))
    R[(T - 1) * W :] = 0.5
    initial = np.zeros(M)
    initial[:W] = 1.0 / W
    return MarkovChain(M=M, K=2, Q=Q, R=R, initial=initial)


def mean_ci(values: Sequence[float]) -> tuple[float, float, float]:
    """Média e IC normal: média ± 1.96·EP. Valores não finitos são descartados."""
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        return float("nan"), float("nan"), float("nan")
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, mean, mean
    half = Z_95 * float(arr.std(ddof=1)) / np.sqrt(arr.size)
    return mean, mean - half, mean + half


def bootstrap_ci(
    statistic: Callable[..., np.ndarray],
    samples: Sequence[np.ndarray],
    seed: int,
    resamples: int | None = None,
) -> tuple[float, float]:
    """IC percentil 95% por reamostragem pareada das replicações.
    - statistic recebe arrays (B x n) e devolve B valores.
    """
    resamples = settings.bootstrap_resamples if resamples is None else resamples
    n = len(samples[0])
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.integers(0, n, size=(resamples, n))
    values = statistic(*(np.asarray(s)[idx] for s in samples))
    values = values[np.isfinite(values)]
    if values.size == 0:
        return float("nan"), float("nan")
    lo, hi = np.quantile(values, [0.025, 0.975])
    return float(lo), float(hi)


def _ratio_of_means(indirect: np.ndarray, direct: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return indirect.mean(axis=-1) / direct.mean(axis=-1)


def _median(values: np.ndarray) -> np.ndarray:
    return np.median(values, axis=-1)


def _result(condition: dict, metric: str, mean: float, lo: float, hi: float, runs: int) -> ConditionResult:
    return ConditionResult(condition=condition, metric=metric, mean=mean, ci_lo=lo, ci_hi=hi, runs=runs)


def _mse_run(chain: MarkovChain, N: int, probe: int, target: float, seed: int) -> tuple[float, float]:
    data = sample_trajectories(chain, N, seed)
    direct = estimate_direct(data).estimate.values[probe - 1, 0]
    indirect = estimate_indirect(data).estimate.values[probe - 1, 0]
    return (direct - target) ** 2, (indirect - target) ** 2


def run_mse_ratio_study(
    W_values: Sequence[int],
    T: int = 2,
    runs: int = 1000,
    seed: int = 0,
    *,
    probe_state: int = 1,
    samples_per_width: int = 20,
    workers: int | None = None,
    keep_raw: bool = False,
) -> ExperimentReport:
    """Para cada W, amostra N = samples_per_width·W trajetórias por replicação e mede
    o erro quadrático de p̂_{m1} no estado `probe_state` da primeira camada."""
    if runs < 2:
        raise UsageError("runs deve ser >= 2")
    results: list[ConditionResult] = []
    raw: dict[str, list[float]] = {}
    logger.info("study_started", study="mse-ratio", W_values=list(W_values), T=T, runs=runs, seed=seed)
    for w_index, W in enumerate(W_values):
        if not 1 <= probe_state <= W:
            raise UsageError(f"probe_state {probe_state} nao esta na primeira camada (W={W})")
        chain = build_layered_chain(LayeredChainSpec(W=W, T=T))
        target = float(solve_absorption_closed_form(chain).values[probe_state - 1, 0])
        N = samples_per_width * W
        offset = seed + w_index * runs
        errors = run_parallel(
            partial(_mse_run, chain, N, probe_state, target), [offset + r for r in range(runs)], workers
        )
        direct = np.array([e[0] for e in errors])
        indirect = np.array([e[1] for e in errors])
        condition = {"W": W, "T": T, "N": N}
        results.append(_result(condition, "mse_direct", *mean_ci(direct), runs))
        results.append(_result(condition, "mse_indirect", *mean_ci(indirect), runs))
        ratio = float(_ratio_of_means(indirect, direct)) if direct.mean() > 0 else float("nan")
        lo, hi = bootstrap_ci(_ratio_of_means, [indirect, direct], offset)
        results.append(_result(condition, "mse_ratio", ratio, lo, hi, runs))
        if keep_raw:
            raw[f"W={W}:direct"] = direct.tolist()
            raw[f"W={W}:indirect"] = indirect.tolist()
        logger.info("condition_completed", study="mse-ratio", W=W, N=N, ratio=ratio)

    config = {
        "W_values": list(W_values),
        "T": T,
        "runs": runs,
        "seed": seed,
        "probe_state": probe_state,
        "samples_per_width": samples_per_width,
    }
    return ExperimentReport(
        study="mse-ratio",
        condition_columns=["W", "T", "N"],
        results=results,
        config=config,
        raw=raw or None,
    )


def _consistency_run(
    chain: MarkovChain, P_star: np.ndarray, N: int, probe: int, seed: int
) -> tuple[float, float, float]:
    data = sample_trajectories(chain, N, seed)
    direct = estimate_direct(data).estimate.values
    indirect = estimate_indirect(data).estimate.values
    probe_direct = np.max(np.abs(direct[probe - 1] - P_star[probe - 1]))
    probe_indirect = np.max(np.abs(indirect[probe - 1] - P_star[probe - 1]))
    return (
        float(np.max(np.abs(direct - P_star))),
        float(np.max(np.abs(indirect - P_star))),
        float(probe_indirect <= probe_direct),
    )


def run_consistency_study(
    chain: MarkovChain,
    N_values: Sequence[int],
    runs: int = 20,
    seed: int = 0,
    *,
    probe_state: int = 1,
    workers: int | None = None,
) -> ExperimentReport:
    """Mediana (sobre replicações) do erro máximo absoluto contra P* para cada N."""
    if runs < 1:
        raise UsageError("runs deve ser >= 1")
    if not 1 <= probe_state <= chain.M:
        raise UsageError(f"probe_state {probe_state} fora do intervalo [1..{chain.M}]")
    P_star = solve_absorption_closed_form(chain).values
    results: list[ConditionResult] = []
    logger.info("study_started", study="consistency", N_values=list(N_values), runs=runs, seed=seed)
    for n_index, N in enumerate(N_values):
        offset = seed + n_index * runs
        outcomes = run_parallel(
            partial(_consistency_run, chain, P_star, N, probe_state), [offset + r for r in range(runs)], workers
        )
        direct = np.array([o[0] for o in outcomes])
        indirect = np.array([o[1] for o in outcomes])
        ordered = np.array([o[2] for o in outcomes])
        condition = {"N": N}
        for metric, values in (("max_error_direct", direct), ("max_error_indirect", indirect)):
            lo, hi = bootstrap_ci(_median, [values], offset)
            results.append(_result(condition, metric, float(np.median(values)), lo, hi, runs))
        results.append(_result(condition, "indirect_le_direct_probe", *mean_ci(ordered), runs))
        logger.info(
            "condition_completed",
            study="consistency",
            N=N,
            median_direct=float(np.median(direct)),
            median_indirect=float(np.median(indirect)),
        )
    config = {"N_values": list(N_values), "runs": runs, "seed": seed, "probe_state": probe_state}
    return ExperimentReport(study="consistency", condition_columns=["N"], results=results, config=config)


LAMBDA_METRICS = ("max_error", "accuracy", "nll", "roc_auc", "mean_successive_kl")


def _lambda_run(
    chain: MarkovChain,
    P_star: np.ndarray,
    N: int,
    n_eval: int,
    lambda_values: Sequence[float],
    cfg: TrainConfig,
    prefix_len: int | None,
    eval_offset: int,
    seed: int,
) -> dict[float, dict[str, float]]:
    data = sample_trajectories(chain, N, seed)
    eval_data = sample_trajectories(chain, n_eval, seed + eval_offset)
    out: dict[float, dict[str, float]] = {}
    for lam in lambda_values:
        report = fit_gradient(data, cfg.model_copy(update={"lam": lam, "seed": seed}))
        table = report.model.table()
        records = build_records(table, eval_data)
        try:
            auc = roc_auc_ovr_macro(records, prefix_len)
        except UndefinedMetricError:
            auc = float("nan")
        out[lam] = {
            "max_error": float(np.max(np.abs(table - P_star))),
            "accuracy": accuracy(records, prefix_len),
            "nll": mean_nll(records, prefix_len),
            "roc_auc": auc,
            "mean_successive_kl": mean_successive_kl(records),
        }
    return out


def run_lambda_sweep(
    chain: MarkovChain,
    N: int,
    lambda_values: Sequence[float],
    cfg: TrainConfig,
    runs: int = 10,
    seed: int = 0,
    *,
    n_eval: int | None = None,
    prefix_len: int | None = None,
    workers: int | None = None,
) -> ExperimentReport:
    """Treina `fit_gradient` para cada λ sobre os mesmos dados de cada replicação
    e avalia em trajetórias novas da mesma cadeia."""
    if runs < 1:
        raise UsageError("runs deve ser >= 1")
    for lam in lambda_values:
        if not 0.0 <= lam <= 1.0:
            raise UsageError(f"lambda {lam} fora de [0, 1]")
    if len(set(lambda_values)) != len(lambda_values):
        raise UsageError("lambda_values contem valores repetidos", details={"lambda_values": list(lambda_values)})
    n_eval = N if n_eval is None else n_eval
    P_star = solve_absorption_closed_form(chain).values
    logger.info("study_started", study="lambda-sweep", lambda_values=list(lambda_values), N=N, runs=runs, seed=seed)
    outcomes = run_parallel(
        partial(_lambda_run, chain, P_star, N, n_eval, list(lambda_values), cfg, prefix_len, runs),
        [seed + r for r in range(runs)],
        workers,
    )
    results: list[ConditionResult] = []
    for lam in lambda_values:
        condition = {"lambda": lam, "N": N}
        for metric in LAMBDA_METRICS:
            values = [o[lam][metric] for o in outcomes]
            dropped = runs - int(np.isfinite(values).sum())
            if dropped:
                logger.warning("non_finite_runs_dropped", study="lambda-sweep", lam=lam, metric=metric, dropped=dropped)
            results.append(_result(condition, metric, *mean_ci(values), runs))
    config = {
        "N": N,
        "lambda_values": list(lambda_values),
        "runs": runs,
        "seed": seed,
        "n_eval": n_eval,
        "prefix_len": prefix_len,
        "train": cfg.model_dump(by_alias=True),
    }
    return ExperimentReport(study="lambda-sweep", condition_columns=["lambda", "N"], results=results, config=config)
