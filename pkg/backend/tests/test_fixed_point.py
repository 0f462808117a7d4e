import math

import numpy as np
import pytest

from config import SOLVER_ITERATION_CAP, SOLVER_MAX_ITERS
from errors import NonConvergence
from fixed_point import (
    SolveConfig,
    network_perturbation_check,
    perturbation_check,
    solve,
    solve_batch,
    solve_stacked,
    solver_config_for,
)
from numerics import make_rng
from operators import Family, OperatorSpec, ParamSet, perturb, sample_params
from tests.factories import scalar_params, scalar_spec


def test_solve_linear_contraction_to_zero():
    result = solve(scalar_spec(), scalar_params(0.5, 0.0, 0.0), np.array([3.0]))
    assert result.x_star[0] == 0.0
    assert result.iterations == 1


def test_solve_affine_contraction():
    result = solve(scalar_spec(), scalar_params(0.5, 0.0, 1.0), np.array([0.0]))
    assert result.x_star[0] == pytest.approx(2.0, abs=1e-9)
    assert result.l_x == pytest.approx(0.5)
    assert abs(result.x_star[0] - 2.0) <= result.error_bound + 1e-15


def test_solve_lgd_identity_converges_immediately():
    spec = OperatorSpec(family=Family.LGD, state_dim=3, input_dim=3, output_dim=3, forward_matrix=np.eye(3))
    params = ParamSet(family=Family.LGD, R=np.zeros((3, 3)), alpha=1.0)
    d = np.array([0.3, -1.0, 2.0])
    result = solve(spec, params, d)
    np.testing.assert_allclose(result.x_star, d)
    assert result.iterations <= 2


def test_solve_raises_with_last_iterate():
    with pytest.raises(NonConvergence) as excinfo:
        solve(scalar_spec(), scalar_params(0.5, 0.0, 1.0), np.array([0.0]), SolveConfig(max_iters=3))
    assert excinfo.value.iterations == 3
    assert excinfo.value.last_iterate[0] == pytest.approx(1.75)
    assert excinfo.value.update_norm == pytest.approx(0.25)


def test_solve_batch_matches_single_solves(mon_spec, rng):
    params = sample_params(mon_spec, rng)
    inputs = rng.standard_normal((3, 6))
    cfg = solver_config_for(params.certificate.l_x)
    batch = solve_batch(mon_spec, params, inputs, cfg)
    for column in range(6):
        single = solve(mon_spec, params, inputs[:, column], cfg).x_star
        np.testing.assert_allclose(batch.x_star[:, column], single, atol=1e-7)


def test_solve_batch_reports_worst_column():
    spec = scalar_spec()
    inputs = np.array([[0.0, 0.0]])
    params = scalar_params(0.5, 1.0, 0.0)
    with pytest.raises(NonConvergence) as excinfo:
        solve_batch(spec, params, np.array([[0.0, 4.0]]), SolveConfig(max_iters=2))
    assert excinfo.value.index == 1
    assert solve_batch(spec, params, inputs).x_star.shape == (1, 2)


def test_solve_stacked_matches_batch(lgd_spec, rng):
    thetas = [sample_params(lgd_spec, rng) for _ in range(3)]
    inputs = rng.standard_normal((8, 4))
    cfg = solver_config_for(max(theta.certificate.l_x for theta in thetas))
    stacked = solve_stacked(lgd_spec, thetas, inputs, cfg)
    assert stacked.shape == (3, 4, 4)
    for index, theta in enumerate(thetas):
        np.testing.assert_allclose(stacked[index], solve_batch(lgd_spec, theta, inputs, cfg).x_star, atol=1e-8)


def test_fixed_point_is_fixed(contractive_spec, rng):
    params = sample_params(contractive_spec, rng)
    d = rng.standard_normal(3)
    x_star = solve(contractive_spec, params, d).x_star
    W, U, b = params.W, params.U, params.b
    np.testing.assert_allclose(np.maximum(W @ x_star + U @ d + b, 0.0), x_star, atol=1e-9)


def test_solver_config_budget():
    assert solver_config_for(0.5).max_iters == SOLVER_MAX_ITERS
    slow = solver_config_for(0.998)
    assert SOLVER_MAX_ITERS < slow.max_iters <= SOLVER_ITERATION_CAP
    assert solver_config_for(1.0 - 1e-9).max_iters == SOLVER_ITERATION_CAP
    assert solver_config_for(0.0).max_iters == SOLVER_MAX_ITERS


def test_perturbation_identical_params(contractive_spec, rng):
    params = sample_params(contractive_spec, rng)
    lhs, rhs = perturbation_check(contractive_spec, params, params, rng.standard_normal(3))
    assert lhs == 0.0
    assert rhs == 0.0


def test_perturbation_scalar_closed_form():
    spec = scalar_spec()
    lhs, rhs = perturbation_check(spec, scalar_params(0.5, 0.0, 0.0), scalar_params(0.5, 0.0, 1.0), np.zeros(1))
    assert lhs == pytest.approx(2.0, abs=1e-9)
    # L_psi = sqrt(C_out,T^2 + C_d^2 + 1) con C_out,T = 2 y C_d = 0
    assert rhs == pytest.approx(math.sqrt(5.0) / 0.5)
    assert lhs <= rhs


def test_perturbation_mon_pairs():
    rng = make_rng(2024)
    spec = OperatorSpec(family=Family.MON, state_dim=5, input_dim=3, output_dim=5)
    for _ in range(20):
        base = sample_params(spec, rng)
        neighbour = perturb(spec, base, 0.1, rng)
        cfg = solver_config_for(max(base.certificate.l_x, neighbour.certificate.l_x))
        lhs, rhs = perturbation_check(spec, base, neighbour, rng.standard_normal(3), cfg)
        assert lhs <= rhs


def test_network_perturbation_linear(linear_spec, rng):
    for _ in range(10):
        base = sample_params(linear_spec, rng)
        neighbour = perturb(linear_spec, base, 0.1, rng, include_phi=True)
        lhs, rhs = network_perturbation_check(linear_spec, base, neighbour, rng.standard_normal(3))
        assert lhs <= rhs
