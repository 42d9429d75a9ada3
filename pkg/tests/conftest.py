"""Fixtures compartilhadas: logs silenciosos e cadeias/conjuntos de dados de referência."""

import numpy as np
import pytest

from common.logging import setup_logging
from tclambda.markov import Dataset, MarkovChain, Trajectory


@pytest.fixture(autouse=True, scope="session")
def _quiet_logs():
    setup_logging("WARNING")


@pytest.fixture
def two_state_chain() -> MarkovChain:
    return MarkovChain(
        M=2,
        K=2,
        Q=[[0.0, 0.5], [0.0, 0.0]],
        R=[[0.5, 0.0], [0.3, 0.7]],
        initial=[0.5, 0.5],
    )


@pytest.fixture
def crossing_paths() -> Dataset:
    return Dataset((Trajectory((1, 3), 1), Trajectory((2, 3), 2)), M=3, K=2)


def random_chain(rng: np.random.Generator, M: int, K: int) -> MarkovChain:
    """Cadeia válida aleatória; linhas sem R têm uma transição para o estado seguinte."""
    Q = rng.random((M, M)) * (rng.random((M, M)) < 0.5)
    R = rng.random((M, K)) + 0.05
    no_exit = rng.random(M) < 0.3
    no_exit[-1] = False
    R[no_exit] = 0.0
    for m in np.flatnonzero(no_exit):
        Q[m, m + 1] += 0.5
    totals = Q.sum(axis=1) + R.sum(axis=1)
    initial = rng.random(M)
    return MarkovChain(M=M, K=K, Q=Q / totals[:, None], R=R / totals[:, None], initial=initial / initial.sum())


def random_chains(count: int, seed: int = 0, max_M: int = 20, max_K: int = 5) -> list[MarkovChain]:
    rng = np.random.default_rng(seed)
    return [random_chain(rng, int(rng.integers(1, max_M + 1)), int(rng.integers(1, max_K + 1))) for _ in range(count)]
