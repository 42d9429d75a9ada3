"""Estimadores das probabilidades de absorção a partir de trajetórias rotuladas.
- `estimate_direct`: fração empírica dos rótulos finais por estado visitado.
- `estimate_indirect`: probabilidades de absorção exatas da cadeia empírica
(Q̂, R̂) montada com as contagens de transições de um passo.
Visitas repetidas contam uma vez por ocorrência (multiconjuntos).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import structlog

from tclambda.markov import Dataset, MarkovChain, ProbMatrix, solve_absorption_fixed_point


logger = structlog.get_logger("tclambda.estimation")


@dataclass(frozen=True, eq=False)
class EmpiricalChain:
    """Cadeia empírica (Q̂, R̂).
    - Atributos
        - Qhat, Rhat: probabilidades de transição estimadas; linhas sem visitas
        ficam com Q̂ = 0 e R̂ = 1/K.
        - visit_counts: c_m, número de transições que partem de m.
        - unvisited: estados (1-based) com c_m = 0.
        - initial: frequência empírica do primeiro estado.
    """

    Qhat: np.ndarray
    Rhat: np.ndarray
    visit_counts: np.ndarray
    unvisited: frozenset[int]
    initial: np.ndarray

    def to_chain(self) -> MarkovChain:
        M, K = self.Rhat.shape
        return MarkovChain(M=M, K=K, Q=self.Qhat, R=self.Rhat, initial=self.initial)


@dataclass(frozen=True, eq=False)
class EstimateReport:
    estimate: ProbMatrix
    per_state_support: np.ndarray
    method: Literal["direct", "indirect"]

    @property
    def fallback(self) -> np.ndarray:
        """Máscara dos estados sem suporte, que recebem a distribuição uniforme."""
        return self.per_state_support == 0

    def csv_header(self) -> list[str]:
        return ["state", "support"] + [f"p_{k}" for k in range(1, self.estimate.cols + 1)] + ["fallback_flag"]

    def csv_rows(self) -> list[list]:
        values = self.estimate.values
        fallback = self.fallback
        return [
            [m + 1, int(self.per_state_support[m]), *values[m].tolist(), int(fallback[m])]
            for m in range(self.estimate.rows)
        ]


def estimate_direct(data: Dataset) -> EstimateReport:
    """Estimador direto: distribuição empírica dos rótulos sobre todos os pares (estado, rótulo)."""
    M, K = data.M, data.K
    counts = np.zeros((M, K))
    np.add.at(counts, (data.flat_states, np.repeat(data.labels, data.lengths)), 1.0)
    support = counts.sum(axis=1)
    visited = support > 0
    estimate = np.full((M, K), 1.0 / K)
    estimate[visited] = counts[visited] / support[visited, None]
    logger.debug("direct_estimate", N=len(data), visited=int(visited.sum()), M=M)
    return EstimateReport(ProbMatrix(estimate), support.astype(np.int64), "direct")


def build_empirical_chain(data: Dataset) -> EmpiricalChain:
    """Conta transições m -> m' (conjunto A) e absorções m -> k (conjunto B) e normaliza por c_m."""
    M, K = data.M, data.K
    flat = data.flat_states
    ends = np.cumsum(data.lengths) - 1
    is_last = np.zeros(flat.size, dtype=bool)
    is_last[ends] = True
    inner = np.flatnonzero(~is_last)

    q_counts = np.zeros((M, M))
    np.add.at(q_counts, (flat[inner], flat[inner + 1]), 1.0)
    r_counts = np.zeros((M, K))
    np.add.at(r_counts, (flat[ends], data.labels), 1.0)
    c = q_counts.sum(axis=1) + r_counts.sum(axis=1)

    visited = c > 0
    Qhat = np.zeros((M, M))
    Rhat = np.full((M, K), 1.0 / K)
    Qhat[visited] = q_counts[visited] / c[visited, None]
    Rhat[visited] = r_counts[visited] / c[visited, None]

    initial = np.bincount(flat[np.concatenate(([0], ends[:-1] + 1))], minlength=M) / len(data)
    return EmpiricalChain(
        Qhat=Qhat,
        Rhat=Rhat,
        visit_counts=c.astype(np.int64),
        unvisited=frozenset(int(m) + 1 for m in np.flatnonzero(~visited)),
        initial=initial,
    )


def estimate_indirect(data: Dataset, tol: float | None = None, max_iters: int | None = None) -> EstimateReport:
    """Estimador indireto: ponto fixo de P = Q̂P + R̂ sobre a cadeia empírica."""
    empirical = build_empirical_chain(data)
    P, iterations = solve_absorption_fixed_point(empirical.to_chain(), tol=tol, max_iters=max_iters)
    logger.debug("indirect_estimate", N=len(data), iterations=iterations, unvisited=len(empirical.unvisited))
    return EstimateReport(P, empirical.visit_counts, "indirect")
