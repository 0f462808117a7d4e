"""
Verificación empírica (Monte Carlo) de las propiedades en las que se apoya la cota.

Cada comprobación devuelve un LemmaCheck con el peor cociente
empírico / analítico observado; la comprobación pasa si ese cociente es <= 1.
"""
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bound import (
    asymptotic_constant,
    chain,
    covering_bound,
    empirical_rademacher,
    greedy_cover_count,
    l_psi_for,
    lipschitz_chain_for,
    rademacher_closed,
    rademacher_integral,
    theorem_terms,
)
from config import (
    DEFAULT_DELTA,
    DESK_K,
    DESK_M,
    DESK_N,
    VERIFY_BASES,
    VERIFY_CE_SAMPLES,
    VERIFY_CONTRACTION_PAIRS,
    VERIFY_COVERING_GRID,
    VERIFY_COVERING_RADII,
    VERIFY_DUDLEY_SETS,
    VERIFY_FD_SAMPLES,
    VERIFY_FD_STEP,
    VERIFY_FD_TOLERANCE,
    VERIFY_INPUTS_PER_PAIR,
    VERIFY_NETWORK_BASES,
    VERIFY_NETWORK_PERTURBATIONS,
    VERIFY_PERTURB_SCALE,
    VERIFY_PERTURBATIONS,
    VERIFY_POWER_TOLERANCE,
    VERIFY_RADEMACHER_DRAWS,
    VERIFY_RADIUS_SAMPLES,
    VERIFY_RADIUS_THETAS,
    VERIFY_RATIO_SLACK,
    VERIFY_SEED,
)
from console import banner, log, progress
from constants import estimate_constants, fixed_points, process_radius, sample_thetas
from datasets import gen_blobs, sample_forward_matrix
from errors import CertificationError
from fixed_point import solve_stacked, solver_config_for
from losses import ce_softmax_grad, ce_softmax_loss, loss_spec, loss_value
from numerics import make_rng, spectral_norm_exact
from operators import (
    Activation,
    Family,
    FinalLayer,
    OperatorSpec,
    ParamSet,
    affine_form,
    build_operator,
    final_apply,
    iteration_matrix,
    operator_activation,
    perturb,
    phi_bound,
    psi_bound,
    psi_distance,
    sample_params,
    theta_distance,
)

# Claves de flujo aleatorio de la verificación
VERIFY_STREAM = 7


class LemmaCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    samples: int
    worst_ratio: float
    passed: bool
    detail: str = ""


class VerifySizes(BaseModel):
    """Tamaños de las comprobaciones (por defecto, los del protocolo completo)."""
    model_config = ConfigDict(frozen=True)

    k: int = Field(DESK_K, ge=1)
    m: int = Field(DESK_M, ge=1)
    n: int = Field(DESK_N, ge=1)
    bases: int = Field(VERIFY_BASES, ge=1)
    perturbations: int = Field(VERIFY_PERTURBATIONS, ge=1)
    inputs_per_pair: int = Field(VERIFY_INPUTS_PER_PAIR, ge=1)
    perturb_scale: float = Field(VERIFY_PERTURB_SCALE, gt=0.0)
    contraction_pairs: int = Field(VERIFY_CONTRACTION_PAIRS, ge=1)
    network_bases: int = Field(VERIFY_NETWORK_BASES, ge=1)
    network_perturbations: int = Field(VERIFY_NETWORK_PERTURBATIONS, ge=1)
    covering_radii: list[float] = Field(default_factory=lambda: list(VERIFY_COVERING_RADII))
    covering_grid: int = Field(VERIFY_COVERING_GRID, ge=2)
    dudley_sets: int = Field(VERIFY_DUDLEY_SETS, ge=1)
    ce_samples: int = Field(VERIFY_CE_SAMPLES, ge=1)
    fd_samples: int = Field(VERIFY_FD_SAMPLES, ge=1)
    radius_samples: int = Field(VERIFY_RADIUS_SAMPLES, ge=1)
    radius_thetas: int = Field(VERIFY_RADIUS_THETAS, ge=1)
    rademacher_draws: int = Field(VERIFY_RADEMACHER_DRAWS, ge=1)


def _check(name: str, samples: int, ratios: list[float] | np.ndarray, detail: str = "") -> LemmaCheck:
    worst = float(np.max(ratios)) if len(ratios) else 0.0
    return LemmaCheck(
        name=name,
        samples=samples,
        worst_ratio=worst,
        passed=bool(worst <= 1.0 + VERIFY_RATIO_SLACK),
        detail=detail,
    )


def _ratio(lhs: np.ndarray, rhs: np.ndarray, slack: float = 0.0) -> np.ndarray:
    """lhs / rhs con 0/0 = 0; un lhs positivo (por encima de slack) con rhs = 0 da inf."""
    lhs = np.maximum(np.asarray(lhs, dtype=np.float64) - slack, 0.0)
    rhs = np.asarray(rhs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0.0, lhs / np.where(rhs > 0.0, rhs, 1.0), np.where(lhs > 0.0, np.inf, 0.0))
    return ratio


# =============================================================================
# Montaje
# =============================================================================
def verification_spec(
    family: Family,
    rng: np.random.Generator,
    sizes: VerifySizes = VerifySizes(),
    final_layer: FinalLayer = FinalLayer.IDENTITY,
) -> OperatorSpec:
    """Spec de escritorio; lgd usa m = max(m, 2k) para que A tenga rango columna completo."""
    k = sizes.k
    n = k if final_layer == FinalLayer.IDENTITY else sizes.n
    if family == Family.LGD:
        m = max(sizes.m, 2 * k)
        return OperatorSpec(
            family=family, state_dim=k, input_dim=m, output_dim=n,
            forward_matrix=sample_forward_matrix(m, k, rng), final_layer=final_layer,
        )
    return OperatorSpec(
        family=family, state_dim=k, input_dim=sizes.m, output_dim=n,
        activation=Activation.RELU, final_layer=final_layer,
    )


def random_inputs(m: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Columnas d de norma ~1."""
    return rng.standard_normal((m, count)) / math.sqrt(m)


def perturbed_neighbours(
    spec: OperatorSpec,
    base: ParamSet,
    count: int,
    scale: float,
    rng: np.random.Generator,
    include_phi: bool = False,
) -> list[ParamSet]:
    """count vecinos certificados de base con el mismo alpha."""
    neighbours, attempts = [], 0
    while len(neighbours) < count:
        attempts += 1
        if attempts > 10 * count:
            raise CertificationError(f"Solo {len(neighbours)} de {count} vecinos certificables")
        try:
            candidate = perturb(spec, base, scale, rng, include_phi=include_phi)
        except CertificationError:
            continue
        if theta_distance(base, candidate) > 0.0:
            neighbours.append(candidate)
    return neighbours


def _pointwise_l_psi(spec: OperatorSpec, alpha, c_out_T: np.ndarray, c_d: np.ndarray) -> np.ndarray:
    bound = psi_bound(spec)
    return np.array([
        l_psi_for(spec.family, float(x), float(d), alpha=alpha, c_params=bound, c_params_psi=bound)
        for x, d in zip(c_out_T, c_d)
    ])


# =============================================================================
# Contracción y método de la potencia
# =============================================================================
def check_contraction(
    spec: OperatorSpec, thetas: list[ParamSet], pairs: int, rng: np.random.Generator,
) -> LemmaCheck:
    """||T(x1; d) - T(x2; d)|| <= L_x ||x1 - x2|| para pares aleatorios."""
    ratios = []
    per_theta = max(1, pairs // len(thetas))
    for theta in thetas:
        operator = build_operator(spec, theta)
        first = rng.standard_normal((spec.state_dim, per_theta))
        second = rng.standard_normal((spec.state_dim, per_theta))
        inputs = random_inputs(spec.input_dim, per_theta, rng)
        lhs = np.linalg.norm(operator(first, inputs) - operator(second, inputs), axis=0)
        rhs = theta.certificate.l_x * np.linalg.norm(first - second, axis=0)
        ratios.append(_ratio(lhs, rhs, 1e-12))
    return _check(f"contraction[{spec.family.value}]", per_theta * len(thetas), np.concatenate(ratios))


def check_power_method(spec: OperatorSpec, thetas: list[ParamSet]) -> LemmaCheck:
    """|L_x certificado - ||M||_2 por SVD| <= 10^-6."""
    gaps = [
        abs(theta.certificate.l_x - spectral_norm_exact(iteration_matrix(spec, theta)))
        for theta in thetas
    ]
    return _check(
        f"power_method[{spec.family.value}]",
        len(thetas),
        np.array(gaps) / VERIFY_POWER_TOLERANCE,
        detail=f"max |L_x - oracle| = {max(gaps):.3e}",
    )


# =============================================================================
# Lipschitz en los parámetros
# =============================================================================
def check_parameter_lipschitz(
    spec: OperatorSpec,
    bases: list[ParamSet],
    sizes: VerifySizes,
    rng: np.random.Generator,
) -> tuple[LemmaCheck, LemmaCheck]:
    """
    Dos comprobaciones sobre los mismos puntos fijos:
    - ||x*_1 - x*_2|| <= L_psi / (1 - L_x) ||psi_1 - psi_2||
    - ||T_psi1(x*_1; d) - T_psi2(x*_1; d)|| <= L_psi ||psi_1 - psi_2||
    """
    fixed_ratios, two_point_ratios, pairs = [], [], 0
    for base in progress(bases, f"Lipschitz psi [{spec.family.value}]"):
        neighbours = perturbed_neighbours(spec, base, sizes.perturbations, sizes.perturb_scale, rng)
        inputs = random_inputs(spec.input_dim, sizes.inputs_per_pair, rng)
        thetas = [base] + neighbours
        cfg = solver_config_for(max(theta.certificate.l_x for theta in thetas))
        states = solve_stacked(spec, thetas, inputs, cfg)
        sigma = operator_activation(spec)
        x_base = states[0]
        base_norms = np.linalg.norm(x_base, axis=0)
        input_norms = np.linalg.norm(inputs, axis=0)

        for index, theta in enumerate(neighbours, start=1):
            distance = psi_distance(base, theta)
            pairs += 1
            x_theta = states[index]
            c_out_T = np.maximum(base_norms, np.linalg.norm(x_theta, axis=0))
            l_psi = _pointwise_l_psi(spec, base.alpha, c_out_T, input_norms)
            l_x = max(base.certificate.l_x, theta.certificate.l_x)
            lhs = np.linalg.norm(x_base - x_theta, axis=0)
            fixed_ratios.append(_ratio(lhs, l_psi / (1.0 - l_x) * distance, 2.0 * cfg.tolerance / (1.0 - l_x)))

            F0, G0, c0 = affine_form(spec, base)
            F1, G1, c1 = affine_form(spec, theta)
            step_base = sigma(F0 @ x_base + G0 @ inputs + c0[:, None])
            step_theta = sigma(F1 @ x_base + G1 @ inputs + c1[:, None])
            lhs = np.linalg.norm(step_base - step_theta, axis=0)
            l_psi_at = _pointwise_l_psi(spec, base.alpha, base_norms, input_norms)
            two_point_ratios.append(_ratio(lhs, l_psi_at * distance, 1e-12))

    family = spec.family.value
    return (
        _check(f"fixed_point_lipschitz[{family}]", pairs, np.concatenate(fixed_ratios),
               detail=f"{pairs} pares x {sizes.inputs_per_pair} entradas"),
        _check(f"psi_lipschitz[{family}]", pairs * sizes.inputs_per_pair, np.concatenate(two_point_ratios)),
    )


def check_network_lipschitz(
    spec: OperatorSpec, sizes: VerifySizes, rng: np.random.Generator,
) -> LemmaCheck:
    """||P_phi1(x*_1) - P_phi2(x*_2)|| <= L^ ||theta_1 - theta_2|| con capa final lineal."""
    ratios, pairs = [], 0
    for _ in range(sizes.network_bases):
        base = sample_params(spec, rng)
        neighbours = perturbed_neighbours(
            spec, base, sizes.network_perturbations, sizes.perturb_scale, rng, include_phi=True
        )
        inputs = random_inputs(spec.input_dim, sizes.inputs_per_pair, rng)
        thetas = [base] + neighbours
        cfg = solver_config_for(max(theta.certificate.l_x for theta in thetas))
        states = solve_stacked(spec, thetas, inputs, cfg)
        out_base = final_apply(base.phi, states[0])
        input_norms = np.linalg.norm(inputs, axis=0)

        for index, theta in enumerate(neighbours, start=1):
            pairs += 1
            c_out_T = np.maximum(np.linalg.norm(states[0], axis=0), np.linalg.norm(states[index], axis=0))
            l_psi = _pointwise_l_psi(spec, base.alpha, c_out_T, input_norms)
            l_x = max(base.certificate.l_x, theta.certificate.l_x)
            l_hat = np.array([
                chain(value, l_x, FinalLayer.LINEAR, phi_bound(spec), float(radius)).l_hat
                for value, radius in zip(l_psi, c_out_T)
            ])
            lhs = np.linalg.norm(out_base - final_apply(theta.phi, states[index]), axis=0)
            ratios.append(_ratio(lhs, l_hat * theta_distance(base, theta), 2.0 * cfg.tolerance / (1.0 - l_x)))
    return _check(f"network_lipschitz[{spec.family.value}]", pairs, np.concatenate(ratios))


# =============================================================================
# Recubrimiento, Dudley y asintótica
# =============================================================================
def parameter_ball_grid(dim: int, radius: float, grid: int) -> np.ndarray:
    """Rejilla de la bola de radio dado: grid^2 puntos en 1-D, grid x grid recortada al disco en 2-D."""
    if dim == 1:
        return np.linspace(-radius, radius, grid * grid)[:, None]
    axis = np.linspace(-radius, radius, grid)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])
    return points[np.linalg.norm(points, axis=1) <= radius]


def check_covering(
    dim: int, radii: list[float], grid: int, l_hat: float = 1.5, c_params: float = 1.0,
) -> LemmaCheck:
    """Recubrimiento voraz de la imagen L^-Lipschitz de la bola de parámetros frente a (1 + 2 L^ C / r)^p."""
    image = l_hat * parameter_ball_grid(dim, c_params, grid)
    ratios, details = [], []
    for r in radii:
        count = greedy_cover_count(image, r)
        bound = covering_bound(r, l_hat, c_params, dim)
        ratios.append(count / bound)
        details.append(f"r={r}: {count}/{bound:.1f}")
    return _check(f"covering_p{dim}", len(image), ratios, detail="; ".join(details))


def check_dudley(sets: int, rng: np.random.Generator) -> LemmaCheck:
    """Integral de Dudley <= forma cerrada para conjuntos de constantes aleatorios."""
    ratios = []
    for _ in range(sets):
        l_ell = float(rng.choice([1.0, 2.0]))
        c_out = float(rng.uniform(0.1, 10.0))
        l_hat = float(rng.uniform(0.1, 10.0))
        c_params = float(rng.uniform(0.5, 3.0))
        p = int(rng.integers(1, 10_001))
        n_samples = int(rng.integers(10, 100_001))
        integral = rademacher_integral(l_ell, c_out, l_hat, c_params, p, n_samples)
        closed = rademacher_closed(l_ell, c_out, l_hat, c_params, p, n_samples)
        ratios.append(integral / closed)
    return _check("dudley_ordering", sets, ratios)


def check_asymptotics(delta: float = DEFAULT_DELTA) -> LemmaCheck:
    """total_excess * sqrt(N) a N = 10^12 dentro del 1% de la constante asintótica."""
    n_samples = 10 ** 12
    rademacher, confidence = theorem_terms(1.0, 1.0, 2.0, 2.0, 1.0, 100, n_samples, delta)
    scaled = (rademacher + confidence) * math.sqrt(n_samples)
    limit = asymptotic_constant(1.0, 1.0, 100, 1.0, delta)
    return _check("asymptotics", 1, [abs(scaled - limit) / limit / 0.01])


# =============================================================================
# Entropía cruzada
# =============================================================================
def _random_one_hot(classes: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return np.eye(classes)[rng.integers(0, classes, size=count)].T


def check_ce_gradient_norm(samples: int, rng: np.random.Generator, classes: int = DESK_N) -> LemmaCheck:
    """||softmax(x) - y|| <= 2."""
    logits = 5.0 * rng.standard_normal((classes, samples))
    targets = _random_one_hot(classes, samples, rng)
    norms = np.linalg.norm(ce_softmax_grad(logits, targets), axis=0)
    return _check("ce_gradient_norm", samples, norms / 2.0)


def check_ce_finite_differences(samples: int, rng: np.random.Generator, classes: int = DESK_N) -> LemmaCheck:
    """Gradiente analítico frente a diferencias centradas (paso 10^-6)."""
    ratios = []
    for _ in range(samples):
        logits = 3.0 * rng.standard_normal(classes)
        target = _random_one_hot(classes, 1, rng)[:, 0]
        analytic = ce_softmax_grad(logits, target)
        for index in range(classes):
            step = np.zeros(classes)
            step[index] = VERIFY_FD_STEP
            numeric = (
                ce_softmax_loss(logits + step, target) - ce_softmax_loss(logits - step, target)
            ) / (2.0 * VERIFY_FD_STEP)
            ratios.append(abs(numeric - analytic[index]) / VERIFY_FD_TOLERANCE)
    return _check("ce_finite_differences", samples * classes, ratios)


# =============================================================================
# Radio del proceso y Rademacher empírico
# =============================================================================
def check_radius_and_rademacher(
    sizes: VerifySizes, seed: int, rng: np.random.Generator,
) -> tuple[LemmaCheck, LemmaCheck]:
    """
    sup_theta sqrt(sum_i ||h(d_i)||^2) <= sqrt(N) C_out y Rademacher empírico de
    la clase finita de theta <= forma cerrada.
    """
    spec = OperatorSpec(
        family=Family.CONTRACTIVE, state_dim=sizes.k, input_dim=sizes.m, output_dim=sizes.n,
        final_layer=FinalLayer.LINEAR,
    )
    dataset = gen_blobs(sizes.m, sizes.n, sizes.radius_samples, 0.5, rng)
    loss = loss_spec("ce")
    thetas = sample_thetas(spec, sizes.radius_thetas, seed, cell=VERIFY_STREAM)
    report = estimate_constants(spec, dataset, loss, thetas=thetas, seed=seed)

    outputs = [final_apply(theta.phi, fixed_points(spec, theta, dataset)) for theta in thetas]

    radius = process_radius(outputs)
    ceiling = math.sqrt(dataset.size) * report.c_out
    radius_check = _check("process_radius", len(thetas), [radius / ceiling])

    losses = np.vstack([loss_value(loss, output, dataset.targets.T) for output in outputs])
    empirical = empirical_rademacher(losses, sizes.rademacher_draws, rng)
    closed = rademacher_closed(
        report.l_ell, report.c_out, lipschitz_chain_for(report).l_hat, report.c_params,
        report.p_model, dataset.size,
    )
    rademacher_check = _check(
        "empirical_rademacher", sizes.rademacher_draws, [empirical / closed],
        detail=f"empirico {empirical:.4g} frente a {closed:.4g}",
    )
    return radius_check, rademacher_check


# =============================================================================
# Suite completa
# =============================================================================
def run_family_checks(family: Family, sizes: VerifySizes, seed: int) -> list[LemmaCheck]:
    index = list(Family).index(family)
    rng = make_rng(seed, VERIFY_STREAM, index)
    spec = verification_spec(family, rng, sizes)
    bases = [sample_params(spec, rng) for _ in range(sizes.bases)]

    checks = [
        check_contraction(spec, bases, sizes.contraction_pairs, rng),
        check_power_method(spec, bases),
    ]
    checks.extend(check_parameter_lipschitz(spec, bases, sizes, rng))
    linear_spec = verification_spec(family, rng, sizes, FinalLayer.LINEAR)
    checks.append(check_network_lipschitz(linear_spec, sizes, rng))
    return checks


def run_lemma_suite(
    seed: int = VERIFY_SEED,
    sizes: VerifySizes = VerifySizes(),
    families: list[Family] | None = None,
) -> list[LemmaCheck]:
    """Todas las comprobaciones, en orden fijo."""
    checks: list[LemmaCheck] = []
    for family in families or list(Family):
        banner(f"Verificación familia {family.value}")
        checks.extend(run_family_checks(family, sizes, seed))

    banner("Verificación de la cota")
    rng = make_rng(seed, VERIFY_STREAM, len(Family))
    checks.append(check_covering(1, sizes.covering_radii, sizes.covering_grid))
    checks.append(check_covering(2, sizes.covering_radii, sizes.covering_grid))
    checks.append(check_dudley(sizes.dudley_sets, rng))
    checks.append(check_asymptotics())
    checks.append(check_ce_gradient_norm(sizes.ce_samples, rng))
    checks.append(check_ce_finite_differences(sizes.fd_samples, rng))
    checks.extend(check_radius_and_rademacher(sizes, seed, rng))

    for check in checks:
        status = "OK" if check.passed else "FALLO"
        log(f"{status:5} {check.name:32} ratio={check.worst_ratio:.4g} ({check.samples} muestras)")
    return checks
