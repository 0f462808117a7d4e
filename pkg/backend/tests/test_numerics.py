import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import CERT_POWER_SQUARINGS
from errors import NonFiniteError, QuadratureError
from numerics import (
    QuadratureSpec,
    integrate,
    integrate_with_error,
    make_rng,
    parallel_map,
    power_iterates,
    power_method,
    project_to_ball,
    sample_on_norm_sphere,
    spectral_norm_exact,
)
from tests.oracles import jacobi_eigenvalues, trapezoid


# =============================================================================
# Método de la potencia
# =============================================================================
def test_power_method_identity():
    sigma, _ = power_method(np.eye(5), iters=100)
    assert sigma == pytest.approx(1.0, abs=1e-12)


def test_power_method_diagonal():
    sigma, _ = power_method(np.diag([3.0, 1.0]), iters=100)
    assert abs(sigma - 3.0) < 1e-10


def test_power_method_zero_matrix():
    assert power_method(np.zeros((4, 4))) == (0.0, 0.0)


def test_power_method_rejects_non_finite():
    matrix = np.eye(3)
    matrix[1, 2] = np.nan
    with pytest.raises(NonFiniteError):
        power_method(matrix)


def test_power_method_matches_jacobi_oracle():
    matrix = make_rng(7).standard_normal((50, 50))
    oracle = math.sqrt(jacobi_eigenvalues(matrix.T @ matrix)[-1])
    sigma, _ = power_method(matrix, iters=100, squarings=CERT_POWER_SQUARINGS)
    assert sigma == pytest.approx(oracle, rel=1e-6)


def test_power_method_is_lower_bound():
    matrix = make_rng(3).standard_normal((20, 12))
    sigma, _ = power_method(matrix, iters=5)
    assert sigma <= spectral_norm_exact(matrix) * (1.0 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), squarings=st.integers(0, 3))
def test_power_iterates_nondecreasing(seed, squarings):
    rng = make_rng(seed)
    matrix = rng.standard_normal((6, 6))
    values = list(power_iterates(matrix, 40, rng, squarings))
    for previous, current in zip(values, values[1:]):
        assert current >= previous * (1.0 - 1e-12)


# =============================================================================
# Cuadratura
# =============================================================================
def test_integrate_constant():
    assert integrate(lambda r: np.ones_like(r), QuadratureSpec(upper=2.0)) == pytest.approx(2.0, rel=1e-12)


def test_integrate_linear():
    assert integrate(lambda r: r, QuadratureSpec(upper=1.0)) == pytest.approx(0.5, rel=1e-12)


def test_integrate_singular_matches_trapezoid_oracle():
    def integrand(r):
        return np.sqrt(np.log1p(1.0 / r))

    # Sustitución r = u^2 para que el trapecio vea un integrando acotado
    def substituted(u):
        safe = np.where(u > 0.0, u, 1.0)
        return np.where(u > 0.0, 2.0 * u * np.sqrt(np.log1p(1.0 / safe ** 2)), 0.0)

    oracle = trapezoid(substituted, 0.0, 1.0, 2_000_001)
    value = integrate(integrand, QuadratureSpec(upper=1.0, singular_at_zero=True))
    assert value == pytest.approx(oracle, abs=1e-6)


def test_integrate_error_estimate_bounds_refinement():
    spec = QuadratureSpec(lower=0.1, upper=2.0)
    value, error, panels = integrate_with_error(np.exp, spec)
    assert value == pytest.approx(math.exp(2.0) - math.exp(0.1), rel=1e-10)
    assert error >= 0.0
    assert panels > spec.panels


def test_integrate_non_finite_names_abscissa():
    with pytest.raises(QuadratureError, match="r ="):
        integrate(lambda r: np.where(r < 0.5, np.nan, r), QuadratureSpec(upper=1.0))


def test_quadrature_spec_rejects_empty_interval():
    with pytest.raises(ValueError):
        QuadratureSpec(lower=1.0, upper=1.0)


# =============================================================================
# Muestreo y proyección
# =============================================================================
def test_sample_on_norm_sphere_norm():
    sample = sample_on_norm_sphere(3, 3, 1.0, make_rng(0))
    assert np.linalg.norm(sample) == pytest.approx(1.0, rel=1e-12)


def test_sample_on_norm_sphere_one_dimensional():
    value = sample_on_norm_sphere(1, 1, 2.0, make_rng(5))[0, 0]
    assert abs(value) == pytest.approx(2.0, rel=1e-12)


def test_sample_on_norm_sphere_reproducible():
    first = sample_on_norm_sphere(4, 2, 1.0, make_rng(42))
    second = sample_on_norm_sphere(4, 2, 1.0, make_rng(42))
    np.testing.assert_array_equal(first, second)


def test_sample_on_norm_sphere_rejects_non_positive_norm():
    with pytest.raises(ValueError):
        sample_on_norm_sphere(2, 2, 0.0, make_rng(0))


def test_make_rng_keys_give_independent_streams():
    assert make_rng(1, 2).standard_normal() != make_rng(1, 3).standard_normal()
    assert make_rng(1, 2).standard_normal() == make_rng(1, 2).standard_normal()


def test_project_to_ball():
    inside = np.array([0.3, 0.4])
    np.testing.assert_array_equal(project_to_ball(inside, 1.0), inside)
    projected = project_to_ball(np.array([3.0, 4.0]), 1.0)
    np.testing.assert_allclose(projected, [0.6, 0.8])


def test_parallel_map_preserves_order():
    items = list(range(20))
    assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert parallel_map(lambda x: x + 1, items, threads=1, desc="test") == [x + 1 for x in items]
