"""Métricas de classificadores incrementais: acurácia, NLL, ROC AUC one-vs-rest macro
e KL média entre predições sucessivas.
- `prefix_len=None` avalia a sequência completa; prefixos maiores que T usam o último prefixo.
- Empates no argmax vão para o menor índice de classe; empates na AUC valem 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import structlog
from scipy.stats import rankdata

from common.errors import DataFormatError, UndefinedMetricError, UsageError
from tclambda.losses import LOG_CLAMP, kl_divergence
from tclambda.markov import Dataset, ProbMatrix


logger = structlog.get_logger("tclambda.metrics")

METRIC_TABLE_HEADER = ["prefix_len", "accuracy", "nll", "roc_auc", "mean_kl"]


@dataclass(frozen=True, eq=False)
class EvalRecord:
    """Distribuições preditas por prefixo (T x K) e rótulo verdadeiro (1-based)."""

    distributions: np.ndarray
    label: int

    def __post_init__(self) -> None:
        dist = np.array(self.distributions, dtype=float)
        if dist.ndim != 2 or dist.shape[0] < 1:
            raise DataFormatError("Distribuicoes devem formar uma matriz T x K")
        if np.any(np.abs(dist.sum(axis=1) - 1.0) > 1e-9):
            raise DataFormatError("Cada distribuicao deve somar 1")
        if not 1 <= self.label <= dist.shape[1]:
            raise DataFormatError(f"Classe {self.label} fora do intervalo [1..{dist.shape[1]}]")
        dist.setflags(write=False)
        object.__setattr__(self, "distributions", dist)

    @property
    def T(self) -> int:
        return self.distributions.shape[0]


def build_records(table: np.ndarray | ProbMatrix, data: Dataset) -> list[EvalRecord]:
    """Aplica uma tabela M x K de probabilidades a cada prefixo das trajetórias."""
    values = table.values if isinstance(table, ProbMatrix) else np.asarray(table, dtype=float)
    return [EvalRecord(values[np.asarray(t.states) - 1], t.label) for t in data]


def _at_prefix(records: Sequence[EvalRecord], prefix_len: int | None) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise UsageError("Nenhum registro para avaliar")
    if prefix_len is not None and prefix_len < 1:
        raise UsageError("prefix_len deve ser >= 1")
    probs = np.stack(
        [r.distributions[(r.T if prefix_len is None else min(prefix_len, r.T)) - 1] for r in records]
    )
    labels = np.array([r.label - 1 for r in records])
    return probs, labels


def accuracy(records: Sequence[EvalRecord], prefix_len: int | None = None) -> float:
    probs, labels = _at_prefix(records, prefix_len)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def mean_nll(records: Sequence[EvalRecord], prefix_len: int | None = None) -> float:
    probs, labels = _at_prefix(records, prefix_len)
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, LOG_CLAMP))))


def roc_auc_ovr_per_class(
    records: Sequence[EvalRecord], prefix_len: int | None = None
) -> tuple[dict[int, float], list[int]]:
    """AUC de cada classe contra as demais, pela estatística de Mann-Whitney com postos médios.
    - Retorna {classe: auc} e a lista de classes sem positivos ou sem negativos.
    """
    probs, labels = _at_prefix(records, prefix_len)
    per_class: dict[int, float] = {}
    skipped: list[int] = []
    for k in range(probs.shape[1]):
        positive = labels == k
        n_pos = int(positive.sum())
        n_neg = len(labels) - n_pos
        if n_pos == 0 or n_neg == 0:
            skipped.append(k + 1)
            continue
        ranks = rankdata(probs[:, k], method="average")
        u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
        per_class[k + 1] = float(u / (n_pos * n_neg))
    return per_class, skipped


def roc_auc_ovr_macro(records: Sequence[EvalRecord], prefix_len: int | None = None) -> float:
    per_class, skipped = roc_auc_ovr_per_class(records, prefix_len)
    if not per_class:
        raise UndefinedMetricError("Nenhuma classe possui exemplos positivos e negativos", details={"skipped": skipped})
    if skipped:
        logger.info("auc_classes_skipped", skipped=skipped)
    return float(np.mean(list(per_class.values())))


def mean_successive_kl(records: Sequence[EvalRecord]) -> float:
    """Média de KL[p_{t+1} || p_t] sobre todos os pares de prefixos sucessivos; 0 se não há pares."""
    pairs = [kl_divergence(r.distributions[1:], r.distributions[:-1]) for r in records if r.T > 1]
    if not pairs:
        return 0.0
    return float(np.mean(np.concatenate(pairs)))


def metric_table(records: Sequence[EvalRecord], prefix_lens: Sequence[int | None]) -> list[list]:
    """Linhas `prefix_len,accuracy,nll,roc_auc,mean_kl`; "full" marca a sequência completa."""
    mean_kl = mean_successive_kl(records)
    rows = []
    for prefix_len in prefix_lens:
        try:
            auc = roc_auc_ovr_macro(records, prefix_len)
        except UndefinedMetricError:
            auc = float("nan")
        rows.append(
            [
                "full" if prefix_len is None else prefix_len,
                accuracy(records, prefix_len),
                mean_nll(records, prefix_len),
                auc,
                mean_kl,
            ]
        )
    return rows
