import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DimensionError
from losses import (
    LossKind,
    LossSpec,
    ce_softmax_grad,
    ce_softmax_loss,
    l1_loss,
    l1_subgradient,
    loss_gradient,
    loss_spec,
    loss_value,
    softmax,
)
from numerics import make_rng
from tests.oracles import ce_loss_decimal


def one_hot(n: int, hot: int) -> np.ndarray:
    target = np.zeros(n)
    target[hot] = 1.0
    return target


# =============================================================================
# l1
# =============================================================================
def test_l1_equal_vectors():
    assert l1_loss(np.array([1.0, -2.0]), np.array([1.0, -2.0])) == 0.0


def test_l1_swapped_basis():
    assert l1_loss(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 2.0


def test_l1_matches_loop():
    rng = make_rng(11)
    pred, target = rng.standard_normal(7), rng.standard_normal(7)
    expected = sum(abs(p - t) for p, t in zip(pred.tolist(), target.tolist()))
    assert l1_loss(pred, target) == pytest.approx(expected, rel=1e-14)


def test_l1_batch_per_column():
    pred = np.array([[1.0, 0.0], [0.0, 3.0]])
    np.testing.assert_array_equal(l1_loss(pred, np.zeros((2, 2))), [1.0, 3.0])


def test_l1_shape_mismatch():
    with pytest.raises(DimensionError):
        l1_loss(np.zeros(2), np.zeros(3))


def test_l1_subgradient_signs():
    np.testing.assert_array_equal(
        l1_subgradient(np.array([2.0, -1.0, 0.0]), np.zeros(3)), [1.0, -1.0, 0.0]
    )


# =============================================================================
# Entropía cruzada
# =============================================================================
def test_ce_uniform_logits():
    assert ce_softmax_loss(np.zeros(10), one_hot(10, 3)) == pytest.approx(math.log(10.0), rel=1e-14)


def test_ce_decreases_as_logit_dominates():
    values = [ce_softmax_loss(np.array([scale, 0.0, 0.0]), one_hot(3, 0)) for scale in (0.0, 1.0, 5.0, 20.0)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] > 0.0


def test_ce_matches_decimal_oracle():
    rng = make_rng(5)
    for _ in range(20):
        logits = 10.0 * rng.standard_normal(6)
        hot = int(rng.integers(6))
        assert ce_softmax_loss(logits, one_hot(6, hot)) == pytest.approx(ce_loss_decimal(logits, hot), abs=1e-12)


def test_ce_stable_for_large_logits():
    value = ce_softmax_loss(np.array([1000.0, 0.0]), one_hot(2, 1))
    assert value == pytest.approx(1000.0, rel=1e-12)


def test_ce_batch_per_column():
    logits = np.zeros((4, 3))
    targets = np.stack([one_hot(4, i) for i in range(3)], axis=1)
    np.testing.assert_allclose(ce_softmax_loss(logits, targets), np.full(3, math.log(4.0)))


def test_ce_gradient_uniform():
    np.testing.assert_allclose(ce_softmax_grad(np.zeros(2), one_hot(2, 0)), [-0.5, 0.5])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 8))
def test_ce_gradient_matches_finite_differences(seed, n):
    rng = make_rng(seed)
    logits = 3.0 * rng.standard_normal(n)
    target = one_hot(n, int(rng.integers(n)))
    grad = ce_softmax_grad(logits, target)
    step = 1e-6
    for i in range(n):
        shift = np.zeros(n)
        shift[i] = step
        numeric = (ce_softmax_loss(logits + shift, target) - ce_softmax_loss(logits - shift, target)) / (2 * step)
        assert numeric == pytest.approx(grad[i], abs=1e-5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 12))
def test_ce_gradient_norm_at_most_two(seed, n):
    rng = make_rng(seed)
    logits = 20.0 * rng.standard_normal(n)
    grad = ce_softmax_grad(logits, one_hot(n, int(rng.integers(n))))
    assert np.linalg.norm(grad, 1) <= 2.0 + 1e-12


def test_ce_rejects_non_one_hot():
    with pytest.raises(ValueError):
        ce_softmax_loss(np.zeros(3), np.array([0.5, 0.5, 0.0]))
    with pytest.raises(ValueError):
        ce_softmax_grad(np.zeros(3), np.zeros(3))


def test_softmax_sums_to_one():
    probs = softmax(np.array([[1.0, -3.0], [2.0, 0.0], [0.0, 5.0]]))
    np.testing.assert_allclose(probs.sum(axis=0), [1.0, 1.0])


# =============================================================================
# LossSpec
# =============================================================================
def test_loss_spec_constants():
    assert loss_spec("l1").lipschitz_constant == 1.0
    assert loss_spec(LossKind.CE).lipschitz_constant == 2.0


def test_loss_spec_rejects_wrong_constant():
    with pytest.raises(ValueError):
        LossSpec(kind=LossKind.L1, lipschitz_constant=2.0)


def test_loss_dispatch():
    pred, target = np.zeros(3), one_hot(3, 0)
    assert loss_value(loss_spec("l1"), pred, target) == 1.0
    assert loss_value(loss_spec("ce"), pred, target) == pytest.approx(math.log(3.0))
    np.testing.assert_array_equal(loss_gradient(loss_spec("l1"), pred, target), [-1.0, 0.0, 0.0])


# =============================================================================
# Lipschitz en dos puntos
# =============================================================================
def test_l1_two_point_lipschitz_in_l1_metric():
    rng = make_rng(40)
    a, b, y = (rng.standard_normal((5, 10_000)) for _ in range(3))
    lhs = np.abs(l1_loss(a, y) - l1_loss(b, y))
    assert np.all(lhs <= np.sum(np.abs(a - b), axis=0) + 1e-12)
    assert np.all(l1_loss(a, y) >= 0.0)
    np.testing.assert_array_equal(l1_loss(y, y), np.zeros(10_000))


def test_ce_two_point_lipschitz():
    rng = make_rng(41)
    a, b = 3.0 * rng.standard_normal((6, 10_000)), 3.0 * rng.standard_normal((6, 10_000))
    y = np.eye(6)[rng.integers(0, 6, size=10_000)].T
    lhs = np.abs(ce_softmax_loss(a, y) - ce_softmax_loss(b, y))
    assert np.all(lhs <= 2.0 * np.linalg.norm(a - b, axis=0) + 1e-12)
    assert np.all(ce_softmax_loss(a, y) >= 0.0)
