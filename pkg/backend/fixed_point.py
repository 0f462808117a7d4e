"""
Solver de Banach para x = T_psi(x; d) con certificado de convergencia.

Inicializacion x_0 = 0 y parada por norma de la actualizacion
||x_{k+1} - x_k|| <= tolerancia. La cota a priori tras K iteraciones es
L_x^K / (1 - L_x) * ||x_1 - x_0||.
"""
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bound import chain, l_psi_for
from config import (
    SOLVER_BUDGET_SCALE,
    SOLVER_ITERATION_CAP,
    SOLVER_MAX_ITERS,
    SOLVER_TOLERANCE,
)
from errors import DimensionError, NonConvergence
from numerics import DenseMatrix
from operators import (
    Family,
    OperatorSpec,
    ParamSet,
    affine_form,
    build_operator,
    certify,
    final_apply,
    operator_activation,
    phi_bound,
    psi_bound,
    psi_distance,
    theta_distance,
    with_alpha,
)


class SolveConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(SOLVER_TOLERANCE, gt=0.0)
    max_iters: int = Field(SOLVER_MAX_ITERS, ge=1)


class FixedPointResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_star: DenseMatrix
    iterations: int
    update_norm: float
    error_bound: float
    l_x: float


class BatchResult(BaseModel):
    """Puntos fijos de un lote: x_star es k x B (una columna por entrada)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_star: DenseMatrix
    iterations: int
    update_norms: DenseMatrix
    error_bounds: DenseMatrix
    l_x: float


def solver_config_for(l_x: float, tolerance: float = SOLVER_TOLERANCE) -> SolveConfig:
    """
    Presupuesto de iteraciones suficiente para L_x dado: nunca menor que el
    valor por defecto y acotado por SOLVER_ITERATION_CAP.
    """
    if l_x <= 0.0:
        return SolveConfig(tolerance=tolerance)
    needed = math.log(tolerance * (1.0 - l_x) / SOLVER_BUDGET_SCALE) / math.log(l_x)
    budget = min(SOLVER_ITERATION_CAP, max(SOLVER_MAX_ITERS, math.ceil(needed)))
    return SolveConfig(tolerance=tolerance, max_iters=budget)


def _certified(spec: OperatorSpec, params: ParamSet) -> ParamSet:
    return params if params.certificate is not None else certify(spec, params)


def solve(
    spec: OperatorSpec,
    params: ParamSet,
    d: np.ndarray,
    cfg: SolveConfig = SolveConfig(),
) -> FixedPointResult:
    """Iteracion de punto fijo para una sola entrada d."""
    params = _certified(spec, params)
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (spec.input_dim,):
        raise DimensionError(f"d tiene forma {d.shape}, se esperaba ({spec.input_dim},)")
    operator = build_operator(spec, params)
    l_x = params.certificate.l_x

    x = np.zeros(spec.state_dim)
    first_update = None
    update = math.inf
    for iteration in range(1, cfg.max_iters + 1):
        x_next = operator(x, d)
        update = float(np.linalg.norm(x_next - x))
        if first_update is None:
            first_update = update
        x = x_next
        if update <= cfg.tolerance:
            return FixedPointResult(
                x_star=x,
                iterations=iteration,
                update_norm=update,
                error_bound=l_x ** iteration / (1.0 - l_x) * first_update,
                l_x=l_x,
            )
    raise NonConvergence(x, update, cfg.max_iters)


def solve_batch(
    spec: OperatorSpec,
    params: ParamSet,
    inputs: np.ndarray,
    cfg: SolveConfig = SolveConfig(),
) -> BatchResult:
    """Itera todas las columnas de inputs (m x B) a la vez hasta que la mayor actualizacion cae bajo la tolerancia."""
    params = _certified(spec, params)
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] != spec.input_dim:
        raise DimensionError(f"inputs tiene forma {inputs.shape}, se esperaba ({spec.input_dim}, B)")
    operator = build_operator(spec, params)
    l_x = params.certificate.l_x

    x = np.zeros((spec.state_dim, inputs.shape[1]))
    first_updates = None
    updates = np.full(inputs.shape[1], math.inf)
    for iteration in range(1, cfg.max_iters + 1):
        x_next = operator(x, inputs)
        updates = np.linalg.norm(x_next - x, axis=0)
        if first_updates is None:
            first_updates = updates
        x = x_next
        if updates.size == 0 or updates.max() <= cfg.tolerance:
            return BatchResult(
                x_star=x,
                iterations=iteration,
                update_norms=updates,
                error_bounds=l_x ** iteration / (1.0 - l_x) * first_updates,
                l_x=l_x,
            )
    raise NonConvergence(x, float(updates.max()), cfg.max_iters, index=int(np.argmax(updates)))


def _common_alpha(spec: OperatorSpec, first: ParamSet, second: ParamSet) -> tuple[ParamSet, ParamSet]:
    """Mismo alpha (el menor) para comparar dos ParamSet de MON o LGD."""
    if spec.family == Family.CONTRACTIVE or first.alpha == second.alpha:
        return _certified(spec, first), _certified(spec, second)
    alpha = min(first.alpha, second.alpha)
    return with_alpha(spec, first, alpha), with_alpha(spec, second, alpha)


def _pointwise_l_psi(spec: OperatorSpec, alpha: float | None, c_out_T: float, c_d: float) -> float:
    return l_psi_for(
        spec.family,
        c_out_T,
        c_d,
        alpha=alpha,
        c_params=psi_bound(spec),
        c_params_psi=psi_bound(spec),
    )


def perturbation_check(
    spec: OperatorSpec,
    first: ParamSet,
    second: ParamSet,
    d: np.ndarray,
    cfg: SolveConfig = SolveConfig(),
) -> tuple[float, float]:
    """
    Ambos lados de ||x*_1 - x*_2|| <= L ||psi_1 - psi_2||, con L = L_psi / (1 - L_x).

    C_out,T y C_d se toman en el punto: max(||x*_1||, ||x*_2||) y ||d||.
    """
    first, second = _common_alpha(spec, first, second)
    x_first = solve(spec, first, d, cfg).x_star
    x_second = solve(spec, second, d, cfg).x_star

    l_x = max(first.certificate.l_x, second.certificate.l_x)
    c_out_T = max(np.linalg.norm(x_first), np.linalg.norm(x_second))
    l_psi = _pointwise_l_psi(spec, first.alpha, float(c_out_T), float(np.linalg.norm(d)))
    lipschitz = chain(l_psi, l_x).l
    lhs = float(np.linalg.norm(x_first - x_second))
    return lhs, lipschitz * psi_distance(first, second)


def network_perturbation_check(
    spec: OperatorSpec,
    first: ParamSet,
    second: ParamSet,
    d: np.ndarray,
    cfg: SolveConfig = SolveConfig(),
) -> tuple[float, float]:
    """Ambos lados de ||P_phi1(x*_1) - P_phi2(x*_2)|| <= L^ ||theta_1 - theta_2||."""
    first, second = _common_alpha(spec, first, second)
    x_first = solve(spec, first, d, cfg).x_star
    x_second = solve(spec, second, d, cfg).x_star

    l_x = max(first.certificate.l_x, second.certificate.l_x)
    c_out_T = float(max(np.linalg.norm(x_first), np.linalg.norm(x_second)))
    l_psi = _pointwise_l_psi(spec, first.alpha, c_out_T, float(np.linalg.norm(d)))
    l_hat = chain(l_psi, l_x, spec.final_layer, phi_bound(spec), c_out_T).l_hat
    lhs = float(np.linalg.norm(final_apply(first.phi, x_first) - final_apply(second.phi, x_second)))
    return lhs, l_hat * theta_distance(first, second)


def solve_stacked(
    spec: OperatorSpec,
    thetas: list[ParamSet],
    inputs: np.ndarray,
    cfg: SolveConfig = SolveConfig(),
) -> np.ndarray:
    """
    Puntos fijos de varios theta sobre el mismo lote de entradas (m x B).

    Returns:
        Array P x k x B con P = len(thetas).
    """
    thetas = [_certified(spec, theta) for theta in thetas]
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] != spec.input_dim:
        raise DimensionError(f"inputs tiene forma {inputs.shape}, se esperaba ({spec.input_dim}, B)")
    forms = [affine_form(spec, theta) for theta in thetas]
    F = np.stack([form[0] for form in forms])
    offset = np.stack([form[1] @ inputs + form[2][:, None] for form in forms])
    sigma = operator_activation(spec)

    x = np.zeros((len(thetas), spec.state_dim, inputs.shape[1]))
    updates = np.full((len(thetas), inputs.shape[1]), math.inf)
    for _ in range(cfg.max_iters):
        x_next = sigma(F @ x + offset)
        updates = np.linalg.norm(x_next - x, axis=1)
        x = x_next
        if updates.size == 0 or updates.max() <= cfg.tolerance:
            return x
    worst_theta = int(np.unravel_index(np.argmax(updates), updates.shape)[0])
    raise NonConvergence(x, float(updates.max()), cfg.max_iters, index=worst_theta)
