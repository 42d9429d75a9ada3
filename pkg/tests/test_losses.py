"""Testes da perda TC-λ: alvos suaves, entropia cruzada, KL e gradientes."""

import math

import numpy as np
import pytest
from scipy.special import softmax

from common.errors import DataFormatError, UsageError
from tclambda.losses import (
    TargetSchedule,
    compute_targets,
    cross_entropy,
    effective_lookahead,
    entropy,
    kl_divergence,
    lambda_from_lookahead,
    sequence_loss,
    sequence_loss_grad,
    targets_closed_form,
)


def _random_probs(rng, shape):
    return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])


def test_cross_entropy_examples():
    assert math.isclose(cross_entropy([1.0, 0.0], [0.5, 0.5]), math.log(2), abs_tol=1e-12)
    p = [0.3, 0.7]
    expected = -0.3 * math.log(0.3) - 0.7 * math.log(0.7)
    assert math.isclose(cross_entropy(p, p), expected, abs_tol=1e-12)
    assert math.isclose(entropy(p), expected, abs_tol=1e-12)
    assert cross_entropy([1.0, 0.0], [1.0, 0.0]) <= 1e-10


def test_cross_entropy_is_total_with_zero_probability():
    value = cross_entropy([0.0, 1.0], [1.0, 0.0])
    assert np.isfinite(value)
    assert value > 600


def test_kl_examples():
    assert kl_divergence([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert math.isclose(kl_divergence([1.0, 0.0], [0.5, 0.5]), math.log(2), abs_tol=1e-12)
    expected = 0.9 * math.log(0.9 / 0.5) + 0.1 * math.log(0.1 / 0.5)
    assert math.isclose(kl_divergence([0.9, 0.1], [0.5, 0.5]), expected, abs_tol=1e-12)


def test_gibbs_inequality():
    rng = np.random.default_rng(0)
    p = _random_probs(rng, (100, 4))
    q = _random_probs(rng, (100, 4))
    assert np.all(cross_entropy(p, q) >= entropy(p) - 1e-12)
    assert np.allclose(kl_divergence(p, q), cross_entropy(p, q) - entropy(p), atol=1e-12)


def test_targets_lambda_one_is_label():
    rng = np.random.default_rng(1)
    schedule = compute_targets(_random_probs(rng, (4, 3)), label=2, lam=1.0)
    assert np.array_equal(schedule.targets, np.tile([0.0, 1.0, 0.0], (5, 1)))


def test_targets_lambda_zero_is_next_prediction():
    rng = np.random.default_rng(2)
    probs = _random_probs(rng, (4, 3))
    schedule = compute_targets(probs, label=3, lam=0.0)
    assert np.max(np.abs(schedule.targets[:-1] - probs)) <= 1e-12
    assert np.array_equal(schedule.targets[-1], [0.0, 0.0, 1.0])


def test_targets_worked_example():
    schedule = compute_targets([[0.8, 0.2]], label=1, lam=0.5)
    assert np.allclose(schedule.targets, [[0.9, 0.1], [1.0, 0.0]], atol=1e-15)
    assert np.allclose(targets_closed_form([[0.8, 0.2]], label=1, lam=0.5), schedule.targets, atol=1e-15)


def test_targets_single_step_needs_num_classes():
    assert np.array_equal(compute_targets([], label=2, lam=0.3, num_classes=3).targets, [[0.0, 1.0, 0.0]])
    with pytest.raises(UsageError):
        compute_targets([], label=1, lam=0.3)


def test_targets_recursion_matches_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(100):
        T = int(rng.integers(1, 51))
        K = int(rng.integers(2, 6))
        probs = _random_probs(rng, (T - 1, K))
        lam = float(rng.random())
        label = int(rng.integers(1, K + 1))
        schedule = compute_targets(probs, label, lam, num_classes=K)
        closed = targets_closed_form(probs, label, lam, num_classes=K)
        assert np.max(np.abs(schedule.targets - closed)) <= 1e-12
        assert schedule.targets.min() >= 0.0


def test_targets_reject_bad_lambda():
    with pytest.raises(UsageError):
        compute_targets([[0.5, 0.5]], label=1, lam=1.5)
    with pytest.raises(UsageError):
        compute_targets([[0.5, 0.5]], label=3, lam=0.5)


def test_targets_accept_rows_within_probability_tolerance():
    schedule = compute_targets([[0.8, 0.2 + 5e-11]], label=1, lam=0.0)
    assert np.all(np.abs(schedule.targets.sum(axis=1) - 1.0) <= 1e-12)
    assert np.allclose(schedule.targets[0], [0.8, 0.2], atol=1e-10)
    closed = targets_closed_form([[0.8, 0.2 + 5e-11]], label=1, lam=0.0)
    assert np.allclose(closed, schedule.targets, atol=1e-15)
    with pytest.raises(DataFormatError):
        compute_targets([[0.8, 0.3]], label=1, lam=0.5)
    with pytest.raises(DataFormatError):
        compute_targets([[1.1, -0.1]], label=1, lam=0.5)


def test_sequence_loss_examples():
    one_step = TargetSchedule([[1.0, 0.0]], lam=1.0)
    assert math.isclose(sequence_loss(np.zeros((1, 2)), one_step), math.log(2), abs_tol=1e-12)
    two_steps = TargetSchedule([[0.9, 0.1], [1.0, 0.0]], lam=0.5)
    assert math.isclose(sequence_loss(np.zeros((2, 2)), two_steps), math.log(2), abs_tol=1e-12)
    assert math.isclose(sequence_loss(np.zeros((2, 2)), two_steps, reduction="sum"), 2 * math.log(2), abs_tol=1e-12)


def test_sequence_loss_lambda_one_is_scaled_dce():
    rng = np.random.default_rng(4)
    logits = rng.normal(size=(6, 3))
    schedule = compute_targets(_random_probs(rng, (5, 3)), label=2, lam=1.0)
    p = softmax(logits, axis=1)
    dce = -np.sum(np.log(p[:, 1]))
    assert math.isclose(sequence_loss(logits, schedule), dce / 6, rel_tol=1e-12)


def test_sequence_loss_lambda_zero_is_tc():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(4, 2))
    probs = _random_probs(rng, (3, 2))
    schedule = compute_targets(probs, label=1, lam=0.0)
    p = softmax(logits, axis=1)
    tc = sum(cross_entropy(probs[t], p[t]) for t in range(3)) - math.log(p[3, 0])
    assert math.isclose(sequence_loss(logits, schedule, reduction="sum"), tc, rel_tol=1e-12)


def test_sequence_loss_lower_bound():
    rng = np.random.default_rng(6)
    for _ in range(50):
        T, K = int(rng.integers(1, 8)), int(rng.integers(2, 5))
        schedule = compute_targets(_random_probs(rng, (T - 1, K)), 1, float(rng.random()), num_classes=K)
        bound = float(np.mean(entropy(schedule.targets)))
        assert sequence_loss(rng.normal(size=(T, K)), schedule) >= bound - 1e-12
        interior = TargetSchedule(_random_probs(rng, (T, K)), lam=0.5)
        attained = sequence_loss(np.log(interior.targets), interior)
        assert math.isclose(attained, float(np.mean(entropy(interior.targets))), abs_tol=1e-12)


def test_sequence_loss_length_mismatch():
    schedule = TargetSchedule([[1.0, 0.0]], lam=1.0)
    with pytest.raises(DataFormatError):
        sequence_loss(np.zeros((2, 2)), schedule)
    with pytest.raises(DataFormatError):
        sequence_loss_grad(np.zeros((1, 3)), schedule)


def test_grad_examples():
    schedule = TargetSchedule([[1.0, 0.0]], lam=1.0)
    assert np.allclose(sequence_loss_grad(np.zeros((1, 2)), schedule), [[-0.5, 0.5]])
    stationary = TargetSchedule([[0.25, 0.75]], lam=1.0)
    assert np.allclose(sequence_loss_grad(np.log([[0.25, 0.75]]), stationary), 0.0, atol=1e-15)


@pytest.mark.parametrize("reduction", ["mean", "sum"])
def test_grad_matches_finite_differences(reduction):
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(100):
        T, K = int(rng.integers(1, 11)), int(rng.integers(2, 6))
        logits = rng.normal(size=(T, K))
        schedule = compute_targets(
            _random_probs(rng, (T - 1, K)), int(rng.integers(1, K + 1)), float(rng.random()), num_classes=K
        )
        analytic = sequence_loss_grad(logits, schedule, reduction=reduction)
        numeric = np.zeros_like(logits)
        for idx in np.ndindex(logits.shape):
            up, down = logits.copy(), logits.copy()
            up[idx] += h
            down[idx] -= h
            numeric[idx] = (
                sequence_loss(up, schedule, reduction=reduction) - sequence_loss(down, schedule, reduction=reduction)
            ) / (2 * h)
        scale = np.maximum(np.abs(analytic), 1e-3)
        assert np.max(np.abs(analytic - numeric) / scale) <= 1e-6


def test_lookahead_roundtrip():
    assert effective_lookahead(0.5) == 1.0
    assert effective_lookahead(1.0) == float("inf")
    assert lambda_from_lookahead(1.0) == 0.5
    assert lambda_from_lookahead(0.0) == 0.0
    with pytest.raises(UsageError):
        lambda_from_lookahead(-1.0)
