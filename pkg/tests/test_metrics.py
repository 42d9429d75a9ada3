"""Testes das métricas: acurácia, NLL, ROC AUC one-vs-rest e KL sucessiva."""

import math

import numpy as np
import pytest

from common.errors import DataFormatError, UndefinedMetricError, UsageError
from tclambda.experiments import LayeredChainSpec, build_layered_chain
from tclambda.markov import Dataset, Trajectory, sample_trajectories, solve_absorption_closed_form
from tclambda.metrics import (
    METRIC_TABLE_HEADER,
    EvalRecord,
    accuracy,
    build_records,
    mean_nll,
    mean_successive_kl,
    metric_table,
    roc_auc_ovr_macro,
    roc_auc_ovr_per_class,
)


def _final(dists, labels):
    return [EvalRecord([d], y) for d, y in zip(dists, labels)]


def _brute_force_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    aucs = []
    for k in range(probs.shape[1]):
        pos = probs[labels == k, k]
        neg = probs[labels != k, k]
        if len(pos) == 0 or len(neg) == 0:
            continue
        wins = np.sum(pos[:, None] > neg[None, :]) + 0.5 * np.sum(pos[:, None] == neg[None, :])
        aucs.append(wins / (len(pos) * len(neg)))
    return float(np.mean(aucs))


def test_accuracy_examples():
    perfect = _final([[1.0, 0.0], [0.0, 1.0]], [1, 2])
    assert accuracy(perfect) == 1.0
    ties = _final([[0.5, 0.5]] * 3, [2, 2, 2])
    assert accuracy(ties) == 0.0
    mixed = _final([[0.7, 0.3], [0.4, 0.6], [0.2, 0.8], [0.5, 0.5]], [1, 1, 2, 1])
    assert accuracy(mixed) == 0.75


def test_accuracy_uses_last_prefix_when_short():
    records = [EvalRecord([[0.9, 0.1], [0.2, 0.8]], 2), EvalRecord([[0.1, 0.9]], 1)]
    assert accuracy(records, prefix_len=1) == 0.0
    assert accuracy(records, prefix_len=5) == 0.5
    assert accuracy(records) == 0.5
    with pytest.raises(UsageError):
        accuracy(records, prefix_len=0)


def test_mean_nll_examples():
    uniform = _final([[0.25] * 4] * 5, [1, 2, 3, 4, 1])
    assert math.isclose(mean_nll(uniform), math.log(4), abs_tol=1e-12)
    assert mean_nll(_final([[1.0, 0.0]], [1])) <= 1e-10
    hand = _final([[0.5, 0.5], [0.8, 0.2], [0.1, 0.9]], [1, 2, 2])
    expected = -(math.log(0.5) + math.log(0.2) + math.log(0.9)) / 3
    assert math.isclose(mean_nll(hand), expected, abs_tol=1e-12)


def test_uniform_nll_is_log_k():
    for K in range(2, 6):
        records = _final([[1.0 / K] * K] * 7, [1 + (i % K) for i in range(7)])
        assert abs(mean_nll(records) - math.log(K)) <= 1e-12


def test_auc_examples():
    separated = _final([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]], [1, 1, 2, 2])
    assert roc_auc_ovr_macro(separated) == 1.0
    equal = _final([[0.5, 0.5]] * 4, [1, 2, 1, 2])
    assert roc_auc_ovr_macro(equal) == 0.5
    worked = _final([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7]], [1, 2, 1])
    per_class, skipped = roc_auc_ovr_per_class(worked)
    assert per_class[1] == 0.5
    assert skipped == []
    assert roc_auc_ovr_macro(worked) == 0.5


def test_auc_skips_classes_without_positives():
    records = _final([[0.6, 0.3, 0.1], [0.2, 0.7, 0.1]], [1, 2])
    per_class, skipped = roc_auc_ovr_per_class(records)
    assert skipped == [3]
    assert set(per_class) == {1, 2}
    with pytest.raises(UndefinedMetricError):
        roc_auc_ovr_macro(_final([[0.6, 0.4], [0.3, 0.7]], [1, 1]))


def test_auc_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 501))
        K = int(rng.integers(2, 6))
        # valores arredondados para forçar empates
        probs = np.round(rng.dirichlet(np.ones(K), size=n), 1)
        probs[:, -1] = 1.0 - probs[:, :-1].sum(axis=1)
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum(axis=1, keepdims=True)
        labels = rng.integers(0, K, size=n)
        if len(np.unique(labels)) < 2:
            continue
        records = [EvalRecord([p], int(y) + 1) for p, y in zip(probs, labels)]
        assert math.isclose(roc_auc_ovr_macro(records), _brute_force_auc(probs, labels), abs_tol=1e-12)


def test_metrics_invariant_to_order():
    rng = np.random.default_rng(1)
    probs = rng.dirichlet(np.ones(3), size=40)
    labels = rng.integers(1, 4, size=40)
    records = [EvalRecord([p], int(y)) for p, y in zip(probs, labels)]
    shuffled = [records[i] for i in rng.permutation(40)]
    for metric in (accuracy, mean_nll, roc_auc_ovr_macro):
        assert math.isclose(metric(records), metric(shuffled), abs_tol=1e-12)


def test_mean_successive_kl_examples():
    constant = [EvalRecord([[0.3, 0.7]] * 4, 1)]
    assert mean_successive_kl(constant) == 0.0
    jump = [EvalRecord([[0.5, 0.5], [1.0, 0.0]], 1)]
    assert math.isclose(mean_successive_kl(jump), math.log(2), abs_tol=1e-12)
    two = [EvalRecord([[0.5, 0.5], [0.9, 0.1]], 1), EvalRecord([[0.5, 0.5], [0.5, 0.5], [1.0, 0.0]], 1)]
    kl = 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)
    assert math.isclose(mean_successive_kl(two), (kl + 0.0 + math.log(2)) / 3, abs_tol=1e-12)
    assert mean_successive_kl([EvalRecord([[0.5, 0.5]], 1)]) == 0.0


def test_successive_kl_of_exact_solution_on_layered_chain_is_zero():
    chain = build_layered_chain(LayeredChainSpec(W=3, T=3))
    data = sample_trajectories(chain, 50, seed=0)
    records = build_records(solve_absorption_closed_form(chain), data)
    assert mean_successive_kl(records) <= 1e-12


def test_successive_kl_of_exact_solution_is_positive_in_general(two_state_chain):
    data = Dataset((Trajectory((1, 2), 1),), M=2, K=2)
    records = build_records(solve_absorption_closed_form(two_state_chain), data)
    assert mean_successive_kl(records) > 0.0


def test_eval_record_validation():
    with pytest.raises(DataFormatError):
        EvalRecord([[0.5, 0.6]], 1)
    with pytest.raises(DataFormatError):
        EvalRecord([[0.5, 0.5]], 3)


def test_metric_table_rows():
    records = [EvalRecord([[0.5, 0.5], [0.9, 0.1]], 1), EvalRecord([[0.5, 0.5], [0.2, 0.8]], 2)]
    rows = metric_table(records, [1, None])
    assert METRIC_TABLE_HEADER == ["prefix_len", "accuracy", "nll", "roc_auc", "mean_kl"]
    assert rows[0][0] == 1 and rows[1][0] == "full"
    assert rows[0][1] == 0.5 and rows[1][1] == 1.0
    assert rows[0][3] == 0.5 and rows[1][3] == 1.0
    assert rows[0][4] == rows[1][4] > 0.0


def test_metric_table_undefined_auc_is_nan():
    rows = metric_table([EvalRecord([[0.6, 0.4]], 1)], [None])
    assert math.isnan(rows[0][3])
