"""Treino de classificadores tabulares softmax com as perdas DCE, TC e TC-λ.
- `fit_gradient` faz descida de gradiente em minibatches (um passo = `train_step`).
- `fit_tabular` resolve o argmin por estado em forma fechada contra uma tabela
congelada e itera até o ponto fixo; é um caminho de código independente dos
estimadores, usado para conferir as equivalências com `estimation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import log_softmax, softmax

from common.config import settings
from common.errors import NonConvergenceError, TrainingDivergenceError, UsageError
from tclambda.markov import Dataset, ProbMatrix, Trajectory
from tclambda.metrics import build_records, mean_successive_kl


logger = structlog.get_logger("tclambda.trainer")


class TrainConfig(BaseModel):
    """Hiperparâmetros do treino.
    - lam: λ em [0, 1] (alias "lambda" nos arquivos de configuração).
    - target_refresh: "per-step" recalcula os alvos com θ atual a cada minibatch;
    "per-outer" congela θ' por `outer_iterations` blocos de épocas.
    - reduction: "mean" divide a perda de cada sequência por T; "sum" não divide.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    lam: float = Field(default=1.0, ge=0.0, le=1.0, alias="lambda")
    learning_rate: float = Field(default=0.5, gt=0.0)
    epochs: int = Field(default=200, ge=1)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 0
    outer_iterations: int | None = Field(default=None, ge=1)
    target_refresh: Literal["per-step", "per-outer"] = "per-step"
    reduction: Literal["mean", "sum"] = "mean"

    @model_validator(mode="after")
    def _check_outer(self) -> TrainConfig:
        if self.outer_iterations is not None and self.outer_iterations > self.epochs:
            raise ValueError("outer_iterations nao pode exceder epochs")
        return self

    @property
    def refresh_every(self) -> int:
        """Épocas entre atualizações de θ' no modo per-outer."""
        outer = self.outer_iterations or self.epochs
        return math.ceil(self.epochs / outer)


@dataclass(frozen=True, eq=False)
class TabularClassifier:
    """Logits por estado: p(y = k | s_t = m) = softmax(theta[m])_k."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or not np.all(np.isfinite(theta)):
            raise UsageError("theta deve ser uma matriz M x K finita")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, M: int, K: int) -> TabularClassifier:
        return cls(np.zeros((M, K)))

    @property
    def M(self) -> int:
        return self.theta.shape[0]

    @property
    def K(self) -> int:
        return self.theta.shape[1]

    def predict(self, state: int) -> np.ndarray:
        if not 1 <= state <= self.M:
            raise UsageError(f"Estado {state} fora do intervalo [1..{self.M}]")
        return softmax(self.theta[state - 1])

    def table(self) -> np.ndarray:
        return softmax(self.theta, axis=1)


def predict_prefix(model: TabularClassifier, state: int) -> np.ndarray:
    return model.predict(state)


@dataclass
class TrainReport:
    loss_trace: list[float]
    model: TabularClassifier
    kl_trace: list[float] | None = field(default=None)

    def csv_header(self) -> list[str]:
        header = ["epoch", "mean_loss"]
        return header + ["mean_successive_kl"] if self.kl_trace is not None else header

    def csv_rows(self) -> list[list]:
        rows = []
        for epoch, loss in enumerate(self.loss_trace, start=1):
            row: list = [epoch, loss]
            if self.kl_trace is not None:
                row.append(self.kl_trace[epoch - 1])
            rows.append(row)
        return rows


def _batch_targets(ref_probs: np.ndarray, lengths: np.ndarray, labels: np.ndarray, lam: float) -> np.ndarray:
    """Alvos TC-λ de um lote preenchido (B x Tmax x K) pela recursão para trás.
    - ref_probs[b, t] é a distribuição de referência no prefixo t+1 da trajetória b.
    """
    B, Tmax, K = ref_probs.shape
    z = np.zeros((B, Tmax, K))
    onehot = np.eye(K)[labels]
    last = lengths - 1
    for t in range(Tmax - 1, -1, -1):
        at_end = last == t
        z[at_end, t] = onehot[at_end]
        inner = last > t
        if inner.any():
            z[inner, t] = lam * z[inner, t + 1] + (1.0 - lam) * ref_probs[inner, t + 1]
    return z


def _step(
    theta: np.ndarray,
    ref_theta: np.ndarray,
    states: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Um passo de gradiente sobre um lote preenchido; devolve (theta novo, perda por sequência)."""
    mask = states >= 0
    safe = np.where(mask, states, 0)
    log_p = log_softmax(theta, axis=1)
    z = _batch_targets(softmax(ref_theta, axis=1)[safe], lengths, labels, cfg.lam)

    weights = mask / lengths[:, None] if cfg.reduction == "mean" else mask.astype(float)
    losses = -np.sum(weights[..., None] * z * log_p[safe], axis=(1, 2))

    residual = weights[..., None] * (np.exp(log_p)[safe] - z)
    grad = np.zeros_like(theta)
    np.add.at(grad, safe[mask], residual[mask])
    return theta - (cfg.learning_rate / len(lengths)) * grad, losses


def _pack(batch: Sequence[Trajectory], M: int, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = batch if isinstance(batch, Dataset) else Dataset(tuple(batch), M, K)
    return data.padded_states, data.lengths, data.labels


def train_step(
    model: TabularClassifier,
    batch: Sequence[Trajectory],
    cfg: TrainConfig,
    reference: TabularClassifier | None = None,
) -> TabularClassifier:
    """Passo único do treino TC-λ: alvos com stop-gradient e θ <- θ - (η/|B|) ∇ Σ perda.
    - reference: modelo θ' usado nos alvos; por padrão o próprio `model`.
    """
    if not batch:
        raise UsageError("Lote vazio")
    states, lengths, labels = _pack(batch, model.M, model.K)
    ref_theta = model.theta if reference is None else reference.theta
    theta, _ = _step(model.theta, ref_theta, states, lengths, labels, cfg)
    return TabularClassifier(theta)


def fit_gradient(data: Dataset, cfg: TrainConfig, *, eval_data: Dataset | None = None) -> TrainReport:
    """Treina a partir de theta = 0 por `cfg.epochs` épocas de minibatches embaralhados.
    - Com eval_data, registra a KL média entre predições sucessivas ao fim de cada época.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    padded, lengths, labels = data.padded_states, data.lengths, data.labels
    N = len(data)
    theta = np.zeros((data.M, data.K))
    ref_theta = theta
    per_outer = cfg.target_refresh == "per-outer"
    trace: list[float] = []
    kl_trace: list[float] | None = [] if eval_data is not None else None

    logger.info(
        "training_started",
        N=N,
        lam=cfg.lam,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        refresh=cfg.target_refresh,
    )
    for epoch in range(1, cfg.epochs + 1):
        if per_outer and (epoch - 1) % cfg.refresh_every == 0:
            ref_theta = theta
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            width = int(lengths[idx].max())
            theta, losses = _step(
                theta,
                ref_theta if per_outer else theta,
                padded[idx, :width],
                lengths[idx],
                labels[idx],
                cfg,
            )
            total += float(losses.sum())
        mean_loss = total / N
        if not math.isfinite(mean_loss) or not np.all(np.isfinite(theta)):
            logger.error("training_diverged", epoch=epoch, learning_rate=cfg.learning_rate)
            raise TrainingDivergenceError(epoch, cfg.learning_rate, loss=mean_loss)
        trace.append(mean_loss)
        if kl_trace is not None:
            kl_trace.append(mean_successive_kl(build_records(softmax(theta, axis=1), eval_data)))
        logger.debug("training_epoch", epoch=epoch, mean_loss=mean_loss)

    logger.info("training_completed", epochs=cfg.epochs, final_loss=trace[-1])
    return TrainReport(trace, TabularClassifier(theta), kl_trace)


def fit_tabular(data: Dataset, lam: float, tol: float | None = None, max_iters: int | None = None) -> ProbMatrix:
    """Iteração do argmin por estado contra uma tabela congelada Θ⁽ⁱ⁾.
    - Θ⁽ⁱ⁺¹⁾[m] = média dos alvos TC-λ de todas as ocorrências de m (perdas somadas);
    estados não visitados ficam uniformes.
    """
    if not 0.0 <= lam <= 1.0:
        raise UsageError("lambda deve estar em [0, 1]")
    tol = settings.solver_tol if tol is None else tol
    max_iters = settings.solver_max_iters if max_iters is None else max_iters
    M, K = data.M, data.K
    states, lengths, labels = data.padded_states, data.lengths, data.labels
    mask = states >= 0
    safe = np.where(mask, states, 0)
    counts = np.bincount(states[mask], minlength=M).astype(float)
    visited = counts > 0

    table = np.full((M, K), 1.0 / K)
    residual = float("inf")
    for iteration in range(max_iters):
        z = _batch_targets(table[safe], lengths, labels, lam)
        sums = np.zeros((M, K))
        np.add.at(sums, states[mask], z[mask])
        new = np.full((M, K), 1.0 / K)
        new[visited] = sums[visited] / counts[visited, None]
        residual = float(np.max(np.abs(new - table)))
        table = new
        if residual <= tol:
            logger.debug("tabular_fit_converged", lam=lam, iterations=iteration, residual=residual)
            return ProbMatrix(table)
    raise NonConvergenceError(table, residual, max_iters)


def fit_tabular_tc(data: Dataset, tol: float | None = None, max_iters: int | None = None) -> ProbMatrix:
    return fit_tabular(data, 0.0, tol, max_iters)


def fit_tabular_dce(data: Dataset) -> ProbMatrix:
    return fit_tabular(data, 1.0)
