"""
Constantes de Lipschitz analiticas, numero de recubrimiento, complejidad de
Rademacher (forma integral y cerrada) y cota de generalizacion completa.

Termino central de la cota:
    8 L_l C_out sqrt(p/N) sqrt(log(e (1 + 4 L^ C_params / (sqrt(N) C_out))))
Termino de confianza:
    4 C_l sqrt(2 log(4/delta) / N)
"""
import math
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import QUAD_TOLERANCE
from numerics import QuadratureSpec, integrate
from operators import Family, FinalLayer

if TYPE_CHECKING:
    from constants import ConstantsReport

# Mayor exponente con exp() finito en doble precision
_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)


class LipschitzChain(BaseModel):
    model_config = ConfigDict(frozen=True)

    l_psi: float = Field(ge=0.0)
    l_x: float = Field(ge=0.0, lt=1.0)
    l: float = Field(ge=0.0)
    l_p_x: float = Field(ge=0.0)
    l_p_phi: float = Field(ge=0.0)
    l_hat: float = Field(ge=0.0)


class BoundReport(BaseModel):
    """Terminos de la cota para un par (N, p) y las entradas usadas."""
    model_config = ConfigDict(frozen=True)

    n_samples: int = Field(ge=1)
    param_count: int = Field(ge=1)
    delta: float = Field(gt=0.0, lt=1.0)
    term_rademacher: float = Field(ge=0.0)
    term_confidence: float = Field(ge=0.0)
    total_excess: float = Field(ge=0.0)
    constants: dict[str, Any] = Field(default_factory=dict)
    chain: LipschitzChain

    def csv_row(self) -> dict[str, Any]:
        return {
            "N": self.n_samples,
            "p": self.param_count,
            "delta": self.delta,
            "term_rademacher": self.term_rademacher,
            "term_confidence": self.term_confidence,
            "total_excess": self.total_excess,
        }


def _require_nonnegative(**values: float) -> None:
    for name, value in values.items():
        if value is None or not value >= 0.0:
            raise ValueError(f"{name} debe ser >= 0, recibido {value}")


# =============================================================================
# Constantes de Lipschitz en psi por familia
# =============================================================================
def l_psi_contractive(c_out_T: float, c_d: float) -> float:
    """sqrt(C_out,T^2 + C_d^2 + 1)."""
    _require_nonnegative(c_out_T=c_out_T, c_d=c_d)
    return math.sqrt(c_out_T ** 2 + c_d ** 2 + 1.0)


def l_psi_mon(alpha: float, c_params: float, c_out_T: float, c_d: float) -> float:
    """alpha sqrt(4 (C_params^2 + 1) C_out,T^2 + C_d^2 + 1)."""
    _require_nonnegative(alpha=alpha, c_params=c_params, c_out_T=c_out_T, c_d=c_d)
    return alpha * math.sqrt(4.0 * (c_params ** 2 + 1.0) * c_out_T ** 2 + c_d ** 2 + 1.0)


def l_psi_lgd(alpha: float, c_out_T: float, c_params_psi: float) -> float:
    """2 alpha C_out,T C_params,Psi."""
    _require_nonnegative(alpha=alpha, c_out_T=c_out_T, c_params_psi=c_params_psi)
    return 2.0 * alpha * c_out_T * c_params_psi


def l_psi_for(
    family: Family,
    c_out_T: float,
    c_d: float,
    alpha: float | None = None,
    c_params: float = 0.0,
    c_params_psi: float = 0.0,
) -> float:
    if family == Family.CONTRACTIVE:
        return l_psi_contractive(c_out_T, c_d)
    if alpha is None:
        raise ValueError(f"La familia {family.value} necesita alpha")
    if family == Family.MON:
        return l_psi_mon(alpha, c_params, c_out_T, c_d)
    return l_psi_lgd(alpha, c_out_T, c_params_psi)


def chain(
    l_psi: float,
    l_x: float,
    final_layer: FinalLayer = FinalLayer.IDENTITY,
    c_params_phi: float = 0.0,
    c_out_T: float = 0.0,
) -> LipschitzChain:
    """
    L = L_psi / (1 - L_x) y L^ = sqrt((L_P,x L)^2 + L_P,phi^2).

    Identidad: (L_P,x, L_P,phi) = (1, 0). Lineal: (C_params,Phi, C_out,T).
    """
    _require_nonnegative(l_psi=l_psi, l_x=l_x)
    if l_x >= 1.0:
        raise ValueError(f"l_x debe ser < 1, recibido {l_x}")
    l = l_psi / (1.0 - l_x)
    if final_layer == FinalLayer.IDENTITY:
        l_p_x, l_p_phi = 1.0, 0.0
    else:
        _require_nonnegative(c_params_phi=c_params_phi, c_out_T=c_out_T)
        l_p_x, l_p_phi = c_params_phi, c_out_T
    l_hat = l if final_layer == FinalLayer.IDENTITY else math.hypot(l_p_x * l, l_p_phi)
    return LipschitzChain(l_psi=l_psi, l_x=l_x, l=l, l_p_x=l_p_x, l_p_phi=l_p_phi, l_hat=l_hat)


def lipschitz_chain_for(report: "ConstantsReport") -> LipschitzChain:
    """Cadena de Lipschitz a partir de las constantes estimadas."""
    l_psi = l_psi_for(
        report.family,
        report.c_out_T,
        report.c_d,
        alpha=report.alpha,
        c_params=report.c_params,
        c_params_psi=report.c_params_psi,
    )
    return chain(l_psi, report.l_x, report.final_layer, report.c_params_phi, report.c_out_T)


# =============================================================================
# Recubrimiento y Rademacher
# =============================================================================
def log_covering_bound(r: float, l_hat: float, c_params: float, p: int) -> float:
    """p log(1 + 2 L^ C_params / r)."""
    if not r > 0.0:
        raise ValueError(f"El radio debe ser positivo, recibido {r}")
    if p < 1:
        raise ValueError(f"p debe ser >= 1, recibido {p}")
    _require_nonnegative(l_hat=l_hat, c_params=c_params)
    return p * math.log1p(2.0 * l_hat * c_params / r)


def covering_bound(r: float, l_hat: float, c_params: float, p: int) -> float:
    """(1 + 2 L^ C_params / r)^p; inf si desborda la doble precision."""
    log_value = log_covering_bound(r, l_hat, c_params, p)
    return math.exp(log_value) if log_value < _LOG_FLOAT_MAX else math.inf


def _check_rademacher_inputs(l_ell, c_out, l_hat, c_params, p, n_samples) -> None:
    _require_nonnegative(l_ell=l_ell, c_out=c_out, l_hat=l_hat, c_params=c_params)
    if p < 1:
        raise ValueError(f"p debe ser >= 1, recibido {p}")
    if n_samples < 1:
        raise ValueError(f"N debe ser >= 1, recibido {n_samples}")


def rademacher_closed(
    l_ell: float, c_out: float, l_hat: float, c_params: float, p: int, n_samples: int,
) -> float:
    """4 L_l C_out sqrt(p/N) sqrt(1 + log(1 + 4 L^ C_params / (sqrt(N) C_out)))."""
    _check_rademacher_inputs(l_ell, c_out, l_hat, c_params, p, n_samples)
    if c_out == 0.0:
        return 0.0
    root_n = math.sqrt(n_samples)
    log_term = 1.0 + math.log1p(4.0 * l_hat * c_params / (root_n * c_out))
    return 4.0 * l_ell * c_out * math.sqrt(p) / root_n * math.sqrt(log_term)


def dudley_bound(
    radius: float,
    log_covering: Callable[[np.ndarray], np.ndarray],
    tol: float = QUAD_TOLERANCE,
) -> float:
    """4 sqrt(2) int_0^{radius/2} sqrt(log N(r)) dr con log N decreciente en r."""
    if radius <= 0.0:
        return 0.0

    def integrand(r):
        return np.sqrt(np.maximum(log_covering(r), 0.0))

    spec = QuadratureSpec(lower=0.0, upper=radius / 2.0, singular_at_zero=True)
    return 4.0 * math.sqrt(2.0) * integrate(integrand, spec, tol)


def rademacher_integral(
    l_ell: float,
    c_out: float,
    l_hat: float,
    c_params: float,
    p: int,
    n_samples: int,
    tol: float = QUAD_TOLERANCE,
) -> float:
    """(8 L_l / N) int_0^{sqrt(N) C_out / 2} sqrt(log N(r)) dr con N(r) del recubrimiento."""
    _check_rademacher_inputs(l_ell, c_out, l_hat, c_params, p, n_samples)
    beta = 2.0 * l_hat * c_params
    if c_out == 0.0 or beta == 0.0:
        return 0.0

    def log_covering(r):
        return p * np.log1p(beta / r)

    radius = math.sqrt(n_samples) * c_out
    return math.sqrt(2.0) * l_ell / n_samples * dudley_bound(radius, log_covering, tol)


def empirical_rademacher(loss_matrix: np.ndarray, draws: int, rng: np.random.Generator) -> float:
    """
    Estimacion Monte Carlo de E_eps sup_theta (1/N) sum_i eps_i l_theta(z_i)
    para la clase finita de filas de loss_matrix (n_theta x N).
    """
    losses = np.atleast_2d(np.asarray(loss_matrix, dtype=np.float64))
    if draws < 1:
        raise ValueError("draws debe ser >= 1")
    n_samples = losses.shape[1]
    signs = rng.choice(np.array([-1.0, 1.0]), size=(draws, n_samples))
    correlations = signs @ losses.T / n_samples
    return float(np.mean(np.max(correlations, axis=1)))


def greedy_cover_count(points: np.ndarray, r: float) -> int:
    """Tamano de una r-red voraz (centros r-separados que cubren todos los puntos)."""
    if not r > 0.0:
        raise ValueError(f"El radio debe ser positivo, recibido {r}")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    covered = np.zeros(len(points), dtype=bool)
    count = 0
    for index in range(len(points)):
        if covered[index]:
            continue
        count += 1
        covered |= np.linalg.norm(points - points[index], axis=1) <= r
    return count


# =============================================================================
# Cota de generalizacion
# =============================================================================
def term_confidence(c_ell: float, n_samples: int, delta: float) -> float:
    _check_delta(delta)
    return 4.0 * c_ell * math.sqrt(2.0 * math.log(4.0 / delta) / n_samples)


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta debe estar en (0, 1), recibido {delta}")


def theorem_terms(
    l_ell: float,
    c_out: float,
    l_hat: float,
    c_params: float,
    c_ell: float,
    p: int,
    n_samples: int,
    delta: float,
) -> tuple[float, float]:
    """(termino de Rademacher, termino de confianza)."""
    _check_delta(delta)
    _require_nonnegative(c_ell=c_ell)
    rademacher = 2.0 * rademacher_closed(l_ell, c_out, l_hat, c_params, p, n_samples)
    return rademacher, term_confidence(c_ell, n_samples, delta)


def generalization_bound(
    constants: "ConstantsReport",
    chain: LipschitzChain,
    p: int,
    n_samples: int,
    delta: float,
) -> BoundReport:
    term_rademacher, confidence = theorem_terms(
        constants.l_ell,
        constants.c_out,
        chain.l_hat,
        constants.c_params,
        constants.c_ell,
        p,
        n_samples,
        delta,
    )
    return BoundReport(
        n_samples=n_samples,
        param_count=p,
        delta=delta,
        term_rademacher=term_rademacher,
        term_confidence=confidence,
        total_excess=term_rademacher + confidence,
        constants=constants.model_dump(mode="json"),
        chain=chain,
    )


def asymptotic_constant(l_ell: float, c_out: float, p: int, c_ell: float, delta: float) -> float:
    """Limite de total_excess * sqrt(N) cuando N -> infinito."""
    _check_delta(delta)
    return 8.0 * l_ell * c_out * math.sqrt(p) + 4.0 * c_ell * math.sqrt(2.0 * math.log(4.0 / delta))
