import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bound import (
    asymptotic_constant,
    chain,
    covering_bound,
    dudley_bound,
    empirical_rademacher,
    generalization_bound,
    greedy_cover_count,
    l_psi_contractive,
    l_psi_for,
    l_psi_lgd,
    l_psi_mon,
    lipschitz_chain_for,
    log_covering_bound,
    rademacher_closed,
    rademacher_integral,
    term_confidence,
    theorem_terms,
)
from numerics import make_rng
from operators import Family, FinalLayer
from tests.factories import constants_report
from tests.oracles import bound_terms_decimal


# =============================================================================
# Constantes de Lipschitz
# =============================================================================
def test_l_psi_contractive_examples():
    assert l_psi_contractive(0.0, 0.0) == 1.0
    assert l_psi_contractive(1.0, 1.0) == pytest.approx(math.sqrt(3.0))


def test_l_psi_mon_example():
    assert l_psi_mon(0.1, 2.0, 1.0, 1.0) == pytest.approx(0.1 * math.sqrt(22.0))
    assert l_psi_mon(0.0, 2.0, 1.0, 1.0) == 0.0


def test_l_psi_lgd_example():
    assert l_psi_lgd(1.0, 1.0, 1.0) == 2.0


def test_l_psi_for_dispatch():
    assert l_psi_for(Family.CONTRACTIVE, 1.0, 1.0) == pytest.approx(math.sqrt(3.0))
    assert l_psi_for(Family.LGD, 1.0, 0.0, alpha=1.0, c_params_psi=1.0) == 2.0
    with pytest.raises(ValueError):
        l_psi_for(Family.MON, 1.0, 1.0)


def test_l_psi_rejects_negative():
    with pytest.raises(ValueError):
        l_psi_contractive(-1.0, 0.0)


def test_chain_identity_final_layer():
    result = chain(1.0, 0.5)
    assert result.l == 2.0
    assert result.l_hat == 2.0
    assert (result.l_p_x, result.l_p_phi) == (1.0, 0.0)


def test_chain_linear_final_layer():
    result = chain(1.0, 0.5, FinalLayer.LINEAR, c_params_phi=1.0, c_out_T=1.0)
    assert result.l_hat == pytest.approx(math.sqrt(5.0))


def test_chain_rejects_non_contraction():
    with pytest.raises(ValueError):
        chain(1.0, 1.0)


def test_chain_from_report():
    assert lipschitz_chain_for(constants_report(c_d=1.0)).l == pytest.approx(2.0 * math.sqrt(3.0))


# =============================================================================
# Recubrimiento
# =============================================================================
def test_covering_bound_example():
    assert covering_bound(1.0, 1.0, 1.0, 2) == pytest.approx(9.0)
    assert covering_bound(1.0, 0.0, 1.0, 5) == 1.0


def test_covering_bound_overflow_is_infinite():
    assert covering_bound(1e-6, 1.0, 1.0, 10_000) == math.inf
    assert math.isfinite(log_covering_bound(1e-6, 1.0, 1.0, 10_000))


def test_covering_rejects_bad_radius():
    with pytest.raises(ValueError):
        log_covering_bound(0.0, 1.0, 1.0, 1)


def test_greedy_cover_on_segment():
    points = np.linspace(0.0, 1.0, 11)
    assert greedy_cover_count(points, 0.25) == 4
    assert greedy_cover_count(points, 2.0) == 1


def test_greedy_cover_below_volumetric_bound():
    rng = make_rng(8)
    points = rng.uniform(-1.0, 1.0, size=(500, 2))
    points /= np.maximum(1.0, np.linalg.norm(points, axis=1))[:, None]
    for r in (0.1, 0.3, 0.6):
        assert greedy_cover_count(points, r) <= covering_bound(r, 1.0, 1.0, 2)


# =============================================================================
# Rademacher
# =============================================================================
def test_rademacher_closed_example():
    assert rademacher_closed(1.0, 1.0, 2.0, 2.0, 100, 10_000) == pytest.approx(0.4286574399, rel=1e-9)


def test_rademacher_closed_vanishes():
    assert rademacher_closed(1.0, 0.0, 2.0, 2.0, 100, 10_000) == 0.0
    assert rademacher_closed(1.0, 1.0, 2.0, 0.0, 100, 10_000) == pytest.approx(0.4)


def test_rademacher_integral_zero_params():
    assert rademacher_integral(1.0, 1.0, 2.0, 0.0, 10, 100) == 0.0


@settings(max_examples=25, deadline=None)
@given(
    l_hat=st.floats(0.01, 50.0),
    c_params=st.floats(0.01, 10.0),
    c_out=st.floats(0.01, 10.0),
    p=st.integers(1, 10_000),
    n=st.integers(1, 10 ** 6),
)
def test_rademacher_integral_below_closed_form(l_hat, c_params, c_out, p, n):
    integral = rademacher_integral(1.0, c_out, l_hat, c_params, p, n)
    closed = rademacher_closed(1.0, c_out, l_hat, c_params, p, n)
    assert 0.0 <= integral <= closed * (1.0 + 1e-6)


def test_dudley_empty_radius():
    assert dudley_bound(0.0, lambda r: np.ones_like(r)) == 0.0


def test_dudley_constant_entropy():
    # sqrt(log N) = 1 en todo el intervalo [0, 1]
    assert dudley_bound(2.0, lambda r: np.ones_like(r)) == pytest.approx(4.0 * math.sqrt(2.0), rel=1e-9)


def test_empirical_rademacher_zero_losses():
    assert empirical_rademacher(np.zeros((3, 50)), 100, make_rng(0)) == 0.0


def test_empirical_rademacher_symmetric_pair():
    n = 400
    losses = np.stack([np.ones(n), -np.ones(n)])
    estimate = empirical_rademacher(losses, 4000, make_rng(1))
    assert estimate == pytest.approx(math.sqrt(2.0 / (math.pi * n)), rel=0.1)


# =============================================================================
# Cota completa
# =============================================================================
def test_term_confidence_example():
    assert term_confidence(1.0, 10_000, 0.01) == pytest.approx(0.1384654706, rel=1e-9)


def test_theorem_terms_example():
    rademacher, confidence = theorem_terms(1.0, 1.0, 2.0, 2.0, 1.0, 100, 10_000, 0.01)
    assert rademacher == pytest.approx(0.8573148799, rel=1e-9)
    assert rademacher + confidence == pytest.approx(0.9957803505, rel=1e-9)


def test_theorem_terms_rejects_bad_delta():
    for delta in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            theorem_terms(1.0, 1.0, 2.0, 2.0, 1.0, 100, 10_000, delta)


def test_generalization_bound_report():
    report = constants_report()
    result = generalization_bound(report, chain(1.0, 0.5), 100, 10_000, 0.01)
    assert result.total_excess == pytest.approx(0.9957803505, rel=1e-9)
    assert result.total_excess == result.term_rademacher + result.term_confidence
    assert result.constants["c_params"] == 2.0
    assert result.csv_row()["N"] == 10_000


def test_generalization_bound_matches_decimal_example():
    result = generalization_bound(constants_report(), chain(1.0, 0.5), 100, 10_000, 0.01)
    rademacher, confidence = bound_terms_decimal(1.0, 1.0, 2.0, 2.0, 1.0, 100, 10_000, 0.01)
    assert result.term_rademacher == pytest.approx(rademacher, rel=1e-6)
    assert result.term_confidence == pytest.approx(confidence, rel=1e-6)
    assert result.total_excess == pytest.approx(rademacher + confidence, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(
    l_ell=st.sampled_from([1.0, 2.0]),
    c_out=st.floats(0.01, 100.0),
    c_ell=st.floats(0.0, 100.0),
    c_params=st.floats(0.0, 10.0),
    l_hat=st.floats(0.0, 1e3),
    p=st.integers(1, 10 ** 6),
    n=st.integers(1, 10 ** 7),
    delta=st.floats(1e-6, 0.99),
)
def test_generalization_bound_matches_decimal(l_ell, c_out, c_ell, c_params, l_hat, p, n, delta):
    report = constants_report(
        c_out=c_out, c_out_T=c_out, c_ell=c_ell, l_ell=l_ell, c_params_psi=c_params, c_params=c_params,
    )
    result = generalization_bound(report, chain(l_hat, 0.0), p, n, delta)
    rademacher, confidence = bound_terms_decimal(l_ell, c_out, l_hat, c_params, c_ell, p, n, delta)
    assert result.chain.l_hat == l_hat
    assert result.term_rademacher == pytest.approx(rademacher, rel=1e-6)
    assert result.term_confidence == pytest.approx(confidence, rel=1e-6, abs=1e-300)
    assert result.total_excess == pytest.approx(rademacher + confidence, rel=1e-6)


def test_bound_decreases_in_n():
    report = constants_report()
    totals = [
        generalization_bound(report, chain(1.0, 0.5), 100, n, 0.01).total_excess
        for n in (100, 1_000, 10_000, 100_000)
    ]
    assert all(later < earlier for earlier, later in zip(totals, totals[1:]))


def test_bound_scales_with_sqrt_p():
    report = constants_report()
    small = generalization_bound(report, chain(1.0, 0.5), 100, 10_000, 0.01).term_rademacher
    large = generalization_bound(report, chain(1.0, 0.5), 200, 10_000, 0.01).term_rademacher
    assert large / small == pytest.approx(math.sqrt(2.0), rel=0.05)


def test_bound_asymptotics():
    n = 10 ** 12
    rademacher, confidence = theorem_terms(1.0, 1.0, 2.0, 2.0, 1.0, 100, n, 0.01)
    limit = asymptotic_constant(1.0, 1.0, 100, 1.0, 0.01)
    assert (rademacher + confidence) * math.sqrt(n) == pytest.approx(limit, rel=0.01)
