"""Alvos suaves TC-λ, perdas de entropia cruzada e seus gradientes em relação aos logits.
- λ = 1 reproduz a entropia cruzada direta (DCE) contra o rótulo observado;
λ = 0 reproduz a perda de consistência temporal (TC) contra a predição do prefixo seguinte.
- Os alvos são constantes na diferenciação (stop-gradient).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import entr, log_softmax, rel_entr, softmax

from common.errors import DataFormatError, UsageError
from tclambda.markov import PROB_ROW_ATOL


LOG_CLAMP = 1e-300
TARGET_ATOL = 1e-12

Reduction = Literal["mean", "sum"]


def cross_entropy(p, q) -> float | np.ndarray:
    """H[p || q] = -Σ p_k log q_k, com q limitado a >= 1e-300 dentro do log. Vetorizado no último eixo."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return -np.sum(p * np.log(np.maximum(q, LOG_CLAMP)), axis=-1)


def entropy(p) -> float | np.ndarray:
    return np.sum(entr(np.asarray(p, dtype=float)), axis=-1)


def kl_divergence(p, q) -> float | np.ndarray:
    """KL[p || q] = H[p || q] - H[p]; zero se e somente se p = q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.sum(rel_entr(p, np.maximum(q, LOG_CLAMP)), axis=-1)


def effective_lookahead(lam: float) -> float:
    """Média da ponderação geométrica dos alvos: λ / (1 - λ)."""
    return float("inf") if lam >= 1.0 else lam / (1.0 - lam)


def lambda_from_lookahead(lookahead: float) -> float:
    if lookahead < 0:
        raise UsageError("lookahead deve ser >= 0")
    return lookahead / (1.0 + lookahead)


@dataclass(frozen=True, eq=False)
class TargetSchedule:
    """Alvos z_1..z_T de uma trajetória; z_T é exatamente δ_y."""

    targets: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        targets = np.array(self.targets, dtype=float)
        if targets.ndim != 2 or targets.shape[0] < 1:
            raise DataFormatError("Alvos devem formar uma matriz T x K")
        if targets.min() < 0 or np.any(np.abs(targets.sum(axis=1) - 1.0) > TARGET_ATOL):
            raise DataFormatError("Cada alvo deve ser um vetor de probabilidade")
        if not 0.0 <= self.lam <= 1.0:
            raise UsageError("lambda deve estar em [0, 1]")
        targets.setflags(write=False)
        object.__setattr__(self, "targets", targets)

    @property
    def T(self) -> int:
        return self.targets.shape[0]


@dataclass(frozen=True, eq=False)
class LogitSequence:
    """Logits (pré-softmax) de cada prefixo de uma trajetória, T x K."""

    logits: np.ndarray

    def __post_init__(self) -> None:
        logits = np.array(self.logits, dtype=float)
        if logits.ndim != 2 or not np.all(np.isfinite(logits)):
            raise DataFormatError("Logits devem ser uma matriz T x K finita")
        logits.setflags(write=False)
        object.__setattr__(self, "logits", logits)

    @property
    def T(self) -> int:
        return self.logits.shape[0]


def _probs_next(probs_next, num_classes: int | None) -> np.ndarray:
    arr = np.asarray(probs_next, dtype=float)
    if arr.size == 0:
        if num_classes is None and (arr.ndim != 2):
            raise UsageError("num_classes e obrigatorio quando nao ha prefixos seguintes")
        K = num_classes if num_classes is not None else arr.shape[1]
        return np.zeros((0, K))
    if arr.ndim != 2:
        raise DataFormatError("probs_next deve ser uma matriz (T-1) x K")
    sums = arr.sum(axis=1)
    if not np.all(np.isfinite(arr)) or arr.min() < -PROB_ROW_ATOL or np.any(np.abs(sums - 1.0) > PROB_ROW_ATOL):
        raise DataFormatError("Cada linha de probs_next deve ser um vetor de probabilidade")
    arr = np.clip(arr, 0.0, None)
    return arr / arr.sum(axis=1, keepdims=True)


def compute_targets(probs_next, label: int, lam: float, *, num_classes: int | None = None) -> TargetSchedule:
    """Recursão para trás: z_T = δ_y e z_t = λ z_{t+1} + (1 - λ) p'(·|s_{t+1}).
    - Parâmetros
        - probs_next: distribuições de referência dos prefixos 2..T.
        - label: classe observada (1-based).
        - lam: λ em [0, 1].
    """
    if not 0.0 <= lam <= 1.0:
        raise UsageError("lambda deve estar em [0, 1]")
    probs = _probs_next(probs_next, num_classes)
    T, K = probs.shape[0] + 1, probs.shape[1]
    if not 1 <= label <= K:
        raise UsageError(f"Classe {label} fora do intervalo [1..{K}]")
    z = np.zeros((T, K))
    z[-1, label - 1] = 1.0
    for t in range(T - 2, -1, -1):
        z[t] = lam * z[t + 1] + (1.0 - lam) * probs[t]
    return TargetSchedule(z, lam)


def targets_closed_form(probs_next, label: int, lam: float, *, num_classes: int | None = None) -> np.ndarray:
    """Forma explícita: z_t = λ^{T-t} δ_y + (1 - λ) Σ_{k=1}^{T-t} λ^{k-1} p'(·|s_{t+k})."""
    probs = _probs_next(probs_next, num_classes)
    T, K = probs.shape[0] + 1, probs.shape[1]
    delta = np.zeros(K)
    delta[label - 1] = 1.0
    z = np.zeros((T, K))
    for t in range(1, T + 1):
        remaining = T - t
        acc = lam**remaining * delta
        for k in range(1, remaining + 1):
            acc = acc + (1.0 - lam) * lam ** (k - 1) * probs[t + k - 2]
        z[t - 1] = acc
    return z


def _as_logits(logits) -> np.ndarray:
    return logits.logits if isinstance(logits, LogitSequence) else LogitSequence(logits).logits


def _check_lengths(logits: np.ndarray, schedule: TargetSchedule) -> None:
    if logits.shape != schedule.targets.shape:
        raise DataFormatError(
            "Logits e alvos com dimensoes incompativeis",
            details={"logits": list(logits.shape), "targets": list(schedule.targets.shape)},
        )


def sequence_loss(logits, schedule: TargetSchedule, *, reduction: Reduction = "mean") -> float:
    """(1/T) Σ_t H[z_t || softmax(logits_t)]; com reduction="sum", a soma sem o fator 1/T."""
    logits = _as_logits(logits)
    _check_lengths(logits, schedule)
    total = float(-np.sum(schedule.targets * log_softmax(logits, axis=1)))
    return total / schedule.T if reduction == "mean" else total


def sequence_loss_grad(logits, schedule: TargetSchedule, *, reduction: Reduction = "mean") -> np.ndarray:
    """Gradiente exato com alvos fixos: (softmax(logits_t) - z_t) / T."""
    logits = _as_logits(logits)
    _check_lengths(logits, schedule)
    grad = softmax(logits, axis=1) - schedule.targets
    return grad / schedule.T if reduction == "mean" else grad
