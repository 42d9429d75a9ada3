"""Cadeias de Markov absorventes: validação, solução exata e amostragem.
- Uma cadeia é o par (Q, R): Q (M x M) leva estados transientes a transientes e
R (M x K) leva estados transientes às K classes absorventes.
- Índices de estados e classes são 1-based em todas as interfaces públicas;
internamente os arrays numpy usam 0-based.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np
import structlog

from common.config import settings
from common.errors import (
    ChainStructureError,
    DataFormatError,
    NonConvergenceError,
    SingularSystemError,
    UsageError,
)


logger = structlog.get_logger("tclambda.markov")

ROW_SUM_ATOL = 1e-12
PROB_ROW_ATOL = 1e-9


def _frozen_array(values, *, name: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChainStructureError(f"{name} nao e uma matriz numerica retangular") from exc
    if arr.ndim != ndim:
        raise ChainStructureError(f"{name} deve ter {ndim} dimensao(oes)", details={"shape": list(arr.shape)})
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Cadeia absorvente com M estados transientes e K classes.
    - Atributos
        - M, K: dimensões declaradas.
        - Q: probabilidades transiente -> transiente (M x M).
        - R: probabilidades transiente -> absorvente (M x K).
        - initial: distribuição do primeiro estado (M,).
    """

    M: int
    K: int
    Q: np.ndarray
    R: np.ndarray
    initial: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "Q", _frozen_array(self.Q, name="Q", ndim=2))
        object.__setattr__(self, "R", _frozen_array(self.R, name="R", ndim=2))
        object.__setattr__(self, "initial", _frozen_array(self.initial, name="initial", ndim=1))

    def normalized(self) -> MarkovChain:
        """Renormaliza cada linha de (Q|R) e a distribuição inicial para somarem 1 exatamente."""
        totals = self.Q.sum(axis=1) + self.R.sum(axis=1)
        return MarkovChain(
            M=self.M,
            K=self.K,
            Q=self.Q / totals[:, None],
            R=self.R / totals[:, None],
            initial=self.initial / self.initial.sum(),
        )


@dataclass(frozen=True)
class Violation:
    """Violação de invariante encontrada por `validate_chain`."""

    kind: str
    message: str
    state: int | None = None
    entry: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "message": self.message}
        if self.state is not None:
            out["state"] = self.state
        if self.entry is not None:
            out["entry"] = self.entry
        return out


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True, eq=False)
class ProbMatrix:
    """Matriz M x K não negativa e estocástica por linha (P*, iterados, estimadores)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise DataFormatError("Matriz de probabilidades deve ser bidimensional")
        if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < -PROB_ROW_ATOL:
            raise DataFormatError("Matriz de probabilidades com entradas negativas ou nao finitas")
        bad = np.flatnonzero(np.abs(arr.sum(axis=1) - 1.0) > PROB_ROW_ATOL)
        if bad.size:
            raise DataFormatError(
                "Matriz de probabilidades nao e estocastica por linha",
                details={"rows": [int(m) + 1 for m in bad]},
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def uniform(cls, M: int, K: int) -> ProbMatrix:
        return cls(np.full((M, K), 1.0 / K))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def row(self, state: int) -> np.ndarray:
        if not 1 <= state <= self.rows:
            raise UsageError(f"Estado {state} fora do intervalo [1..{self.rows}]")
        return self.values[state - 1]

    def csv_header(self) -> list[str]:
        return ["state"] + [f"p_{k}" for k in range(1, self.cols + 1)]

    def csv_rows(self) -> list[list]:
        return [[m + 1, *self.values[m].tolist()] for m in range(self.rows)]


@dataclass(frozen=True)
class Trajectory:
    """Sequência de estados transientes (1-based) terminada na classe `label`."""

    states: tuple[int, ...]
    label: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(int(s) for s in self.states))
        object.__setattr__(self, "label", int(self.label))
        if not self.states:
            raise DataFormatError("Trajetoria sem estados")

    @property
    def T(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Coleção rotulada de trajetórias sobre M estados e K classes.
    - Só os intervalos de índices são validados; a coerência com uma cadeia
    específica vale apenas para dados amostrados.
    """

    trajectories: tuple[Trajectory, ...]
    M: int
    K: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if not self.trajectories:
            raise DataFormatError("Conjunto de dados vazio")
        flat = self.flat_states
        if flat.min() < 0 or flat.max() >= self.M:
            bad = int(flat[(flat < 0) | (flat >= self.M)][0]) + 1
            raise DataFormatError(f"Estado {bad} fora do intervalo [1..{self.M}]", details={"state": bad})
        labels = self.labels
        if labels.min() < 0 or labels.max() >= self.K:
            bad = int(labels[(labels < 0) | (labels >= self.K)][0]) + 1
            raise DataFormatError(f"Classe {bad} fora do intervalo [1..{self.K}]", details={"label": bad})

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([t.T for t in self.trajectories], dtype=np.int64)

    @cached_property
    def labels(self) -> np.ndarray:
        """Rótulos 0-based."""
        return np.array([t.label for t in self.trajectories], dtype=np.int64) - 1

    @cached_property
    def flat_states(self) -> np.ndarray:
        """Todos os estados concatenados, 0-based."""
        return np.fromiter(
            (s for t in self.trajectories for s in t.states), dtype=np.int64, count=int(self.lengths.sum())
        ) - 1

    @cached_property
    def padded_states(self) -> np.ndarray:
        """Matriz N x Tmax de estados 0-based, com -1 após o fim de cada trajetória."""
        lengths = self.lengths
        out = np.full((len(lengths), int(lengths.max())), -1, dtype=np.int64)
        mask = np.arange(out.shape[1])[None, :] < lengths[:, None]
        out[mask] = self.flat_states
        return out

    def subset(self, indices: Sequence[int]) -> Dataset:
        return Dataset(tuple(self.trajectories[i] for i in indices), self.M, self.K)


def _hitting_distances(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Distância BFS (em passos de Q) de cada estado até um estado com linha de R não nula; -1 se inalcançável."""
    M = Q.shape[0]
    dist = np.full(M, -1, dtype=np.int64)
    queue: deque[int] = deque()
    for m in np.flatnonzero((R > 0).any(axis=1)):
        dist[m] = 0
        queue.append(int(m))
    nonzero = Q > 0
    while queue:
        target = queue.popleft()
        for pred in np.flatnonzero(nonzero[:, target]):
            if dist[pred] < 0:
                dist[pred] = dist[target] + 1
                queue.append(int(pred))
    return dist


def validate_chain(chain: MarkovChain) -> ValidationReport:
    """Verifica os invariantes de uma cadeia absorvente.
    - Levanta `ChainStructureError` se as dimensões não batem com M e K;
    violações de invariantes são devolvidas no relatório, uma por linha/entrada.
    """
    M, K = chain.M, chain.K
    if M < 1 or K < 1:
        raise ChainStructureError("M e K devem ser >= 1", details={"M": M, "K": K})
    shapes = {"Q": (chain.Q.shape, (M, M)), "R": (chain.R.shape, (M, K)), "initial": (chain.initial.shape, (M,))}
    for name, (got, expected) in shapes.items():
        if got != expected:
            raise ChainStructureError(
                f"{name} tem dimensao {list(got)}, esperado {list(expected)}",
                details={"matrix": name, "shape": list(got), "expected": list(expected)},
            )

    violations: list[Violation] = []
    for name, arr in (("Q", chain.Q), ("R", chain.R), ("initial", chain.initial)):
        for idx in zip(*np.nonzero(~((arr >= 0) & (arr <= 1)))):
            entry = f"{name}[{','.join(str(i + 1) for i in idx)}]"
            violations.append(
                Violation("range", f"{entry} fora de [0, 1]", state=int(idx[0]) + 1 if name != "initial" else None, entry=entry)
            )

    totals = chain.Q.sum(axis=1) + chain.R.sum(axis=1)
    for m in np.flatnonzero(~(np.abs(totals - 1.0) <= ROW_SUM_ATOL)):
        violations.append(Violation("row_sum", f"linha {m + 1} de (Q|R) soma {totals[m]!r}", state=int(m) + 1))

    if not abs(chain.initial.sum() - 1.0) <= ROW_SUM_ATOL:
        violations.append(Violation("initial_sum", f"initial soma {chain.initial.sum()!r}"))

    dist = _hitting_distances(chain.Q, chain.R)
    for m in np.flatnonzero(dist < 0):
        violations.append(
            Violation("reachability", f"estado {m + 1} nunca alcanca um estado absorvente", state=int(m) + 1)
        )

    report = ValidationReport(tuple(violations))
    logger.debug("chain_validated", M=M, K=K, ok=report.ok, violations=len(violations))
    return report


def absorption_horizon(chain: MarkovChain) -> int:
    """Maior número de passos de Q necessário para que algum estado chegue a uma linha de R não nula (tau)."""
    dist = _hitting_distances(chain.Q, chain.R)
    if (dist < 0).any():
        raise UsageError("Cadeia possui estados que nunca absorvem")
    return int(dist.max())


def solve_absorption_fixed_point(
    chain: MarkovChain,
    P0: ProbMatrix | None = None,
    tol: float | None = None,
    max_iters: int | None = None,
    *,
    callback: Callable[[int, float], None] | None = None,
) -> tuple[ProbMatrix, int]:
    """Resolve P = QP + R iterando P_{i+1} = Q P_i + R a partir de `P0`.
    - Parâmetros
        - P0: chute inicial estocástico por linha (padrão: linhas uniformes).
        - tol: variação máxima absoluta aceita entre iterados sucessivos.
        - max_iters: limite de iterações.
        - callback: chamado com (iteração, resíduo) após cada varredura.
    - Retorna a matriz e o número de atualizações até o iterado cujo resíduo é <= tol.
    """
    tol = settings.solver_tol if tol is None else tol
    max_iters = settings.solver_max_iters if max_iters is None else max_iters
    if tol <= 0:
        raise UsageError("tol deve ser positivo")
    P = ProbMatrix.uniform(chain.M, chain.K).values if P0 is None else P0.values
    if P.shape != (chain.M, chain.K):
        raise ChainStructureError("P0 com dimensao incompativel", details={"shape": list(P.shape)})

    Q, R = chain.Q, chain.R
    residual = float("inf")
    for iteration in range(max_iters):
        P_next = Q @ P + R
        residual = float(np.max(np.abs(P_next - P)))
        if callback is not None:
            callback(iteration + 1, residual)
        if residual <= tol:
            logger.debug("fixed_point_converged", iterations=iteration, residual=residual)
            return ProbMatrix(P_next), iteration
        P = P_next
    logger.warning("fixed_point_not_converged", max_iters=max_iters, residual=residual)
    raise NonConvergenceError(P, residual, max_iters)


def solve_absorption_closed_form(chain: MarkovChain) -> ProbMatrix:
    """Resolve (I - Q) P = R por solução linear densa."""
    try:
        P = np.linalg.solve(np.eye(chain.M) - chain.Q, chain.R)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(details={"M": chain.M}) from exc
    return ProbMatrix(P)


def _cumulative_rows(weights: np.ndarray) -> np.ndarray:
    """CDF por linha com o último valor positivo (e os zeros seguintes) fixados em 1."""
    cum = np.cumsum(weights, axis=-1)
    for idx in np.ndindex(cum.shape[:-1]):
        last = np.flatnonzero(weights[idx] > 0)
        if last.size:
            cum[idx][last[-1]:] = 1.0
    return cum


def sample_trajectories(chain: MarkovChain, N: int, seed: int, *, step_cap: int | None = None) -> Dataset:
    """Amostra N trajetórias rotuladas com o gerador PCG64 semeado por `seed`.
    - O primeiro estado vem de `initial`; cada transição é sorteada por CDF inversa
    sobre a linha concatenada (Q[m], R[m]) e a trajetória termina na primeira absorção.
    """
    if N < 1:
        raise UsageError("N deve ser >= 1")
    step_cap = settings.sample_step_cap if step_cap is None else step_cap
    chain = chain.normalized()
    M = chain.M
    rng = np.random.Generator(np.random.PCG64(seed))
    cum = _cumulative_rows(np.hstack([chain.Q, chain.R]))
    init_cum = _cumulative_rows(chain.initial)

    current = (rng.random(N)[:, None] >= init_cum[None, :]).sum(axis=1)
    paths: list[list[int]] = [[int(s)] for s in current]
    labels = np.full(N, -1, dtype=np.int64)
    active = np.arange(N)
    steps = 0
    while active.size:
        if steps >= step_cap:
            raise NonConvergenceError(
                None, float("nan"), steps, message=f"Trajetoria excedeu o limite de {step_cap} passos"
            )
        u = rng.random(active.size)
        nxt = (u[:, None] >= cum[current]).sum(axis=1)
        absorbed = nxt >= M
        labels[active[absorbed]] = nxt[absorbed] - M
        keep = ~absorbed
        for n, s in zip(active[keep], nxt[keep]):
            paths[n].append(int(s))
        active, current = active[keep], nxt[keep]
        steps += 1

    trajectories = tuple(
        Trajectory(tuple(s + 1 for s in path), int(label) + 1) for path, label in zip(paths, labels)
    )
    logger.debug("trajectories_sampled", N=N, seed=seed, max_length=steps)
    return Dataset(trajectories, chain.M, chain.K)
