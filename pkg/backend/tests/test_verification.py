import numpy as np
import pytest

from numerics import make_rng
from operators import Family, FinalLayer, sample_params
from tests.factories import SMALL_VERIFY
from verification import (
    _check,
    _ratio,
    check_asymptotics,
    check_ce_finite_differences,
    check_ce_gradient_norm,
    check_contraction,
    check_covering,
    check_dudley,
    check_parameter_lipschitz,
    check_power_method,
    parameter_ball_grid,
    run_lemma_suite,
    verification_spec,
)

def test_ratio_conventions():
    np.testing.assert_array_equal(_ratio([0.0, 1.0, 2.0], [0.0, 0.0, 4.0]), [0.0, np.inf, 0.5])
    np.testing.assert_array_equal(_ratio([1e-13], [0.0], slack=1e-12), [0.0])


def test_check_flags_violation():
    assert _check("ok", 2, [0.5, 1.0]).passed
    failed = _check("mal", 1, [1.01])
    assert not failed.passed
    assert failed.worst_ratio == pytest.approx(1.01)


def test_parameter_ball_grid():
    assert parameter_ball_grid(1, 1.0, 5).shape == (25, 1)
    disk = parameter_ball_grid(2, 1.0, 11)
    assert np.all(np.linalg.norm(disk, axis=1) <= 1.0)
    assert len(disk) < 121


def test_lgd_spec_has_tall_forward_matrix():
    spec = verification_spec(Family.LGD, make_rng(0), SMALL_VERIFY)
    assert spec.input_dim >= 2 * spec.state_dim
    assert spec.forward_matrix.shape == (spec.input_dim, spec.state_dim)


@pytest.mark.parametrize("family", list(Family))
def test_family_contraction_and_power_method(family):
    rng = make_rng(3)
    spec = verification_spec(family, rng, SMALL_VERIFY)
    bases = [sample_params(spec, rng) for _ in range(2)]
    assert check_contraction(spec, bases, 100, rng).passed
    assert check_power_method(spec, bases).passed


@pytest.mark.parametrize("family", list(Family))
def test_family_parameter_lipschitz(family):
    rng = make_rng(4)
    spec = verification_spec(family, rng, SMALL_VERIFY)
    bases = [sample_params(spec, rng) for _ in range(SMALL_VERIFY.bases)]
    fixed, two_point = check_parameter_lipschitz(spec, bases, SMALL_VERIFY, rng)
    assert fixed.passed, fixed
    assert two_point.passed, two_point
    assert fixed.samples == SMALL_VERIFY.bases * SMALL_VERIFY.perturbations


def test_bound_side_checks():
    rng = make_rng(5)
    assert check_covering(1, [0.1, 0.5], 20).passed
    assert check_covering(2, [0.1, 0.5], 20).passed
    assert check_dudley(5, rng).passed
    assert check_asymptotics().passed
    assert check_ce_gradient_norm(500, rng).passed
    assert check_ce_finite_differences(5, rng).passed


@pytest.mark.slow
def test_lemma_suite_passes_on_small_sizes():
    checks = run_lemma_suite(seed=0, sizes=SMALL_VERIFY)
    failed = [check.name for check in checks if not check.passed]
    assert failed == []
    names = [check.name for check in checks]
    assert "network_lipschitz[mon]" in names
    assert "empirical_rademacher" in names


def test_linear_verification_spec_uses_output_dim():
    spec = verification_spec(Family.CONTRACTIVE, make_rng(1), SMALL_VERIFY, FinalLayer.LINEAR)
    assert spec.output_dim == SMALL_VERIFY.n
