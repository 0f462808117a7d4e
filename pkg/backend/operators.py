"""
Operadores de punto fijo T_psi(x; d) y capa final P_phi.

Familias soportadas:
- contractive: T(x; d) = sigma(W x + U d + b), con ||W||_2 < 1
- mon:         T(x; d) = sigma((I - alpha (I - W)) x + alpha (U d + b)),
               W = (1 - m) I - A^T A + B - B^T
- lgd:         T(x; d) = x - alpha (A^T (A x - d) + R^T R x), A fija

Todos los bloques de psi se normalizan a norma de Frobenius 1, de modo que la
norma euclidea del vector de parametros apilado es sqrt(#bloques).
"""
import math
from enum import Enum
from typing import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import (
    ALPHA_SLACK,
    CERT_POWER_ITERATIONS,
    CERT_POWER_SQUARINGS,
    CERT_RELATIVE_MARGIN,
    CONTRACTION_MARGIN,
    DEFAULT_M_MON,
    LEAKY_SLOPE,
    LGD_CONDITION_FLOOR,
    POWER_ITERATIONS,
    POWER_SEED,
    SPECTRAL_TARGET,
)
from errors import CertificationError, ContractionViolation, DimensionError
from numerics import (
    DenseMatrix,
    check_finite,
    frobenius_norm,
    make_rng,
    power_method,
    project_to_ball,
    sample_on_norm_sphere,
    spectral_norm_exact,
)


# =============================================================================
# Tipos
# =============================================================================
class Family(str, Enum):
    CONTRACTIVE = "contractive"
    MON = "mon"
    LGD = "lgd"


class Activation(str, Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    IDENTITY = "identity"


class FinalLayer(str, Enum):
    IDENTITY = "identity"
    LINEAR = "linear"


# Bloques de psi por familia, en el orden en que se apilan
PSI_BLOCKS: dict[Family, tuple[str, ...]] = {
    Family.CONTRACTIVE: ("W", "U", "b"),
    Family.MON: ("A", "B", "U", "b"),
    Family.LGD: ("R",),
}

# Radio de la bola de Frobenius de cada bloque (normalizacion de los pesos)
BLOCK_RADIUS = 1.0


class OperatorSpec(BaseModel):
    """Arquitectura: familia, dimensiones, activacion y capa final."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: Family
    state_dim: int = Field(ge=1)
    input_dim: int = Field(ge=1)
    output_dim: int = Field(ge=1)
    activation: Activation = Activation.RELU
    leaky_slope: float = Field(LEAKY_SLOPE, gt=0.0, lt=1.0)
    m_mon: float = Field(DEFAULT_M_MON, gt=0.0, le=1.0)
    lgd_rows: int | None = Field(None, ge=1)
    forward_matrix: DenseMatrix | None = None
    final_layer: FinalLayer = FinalLayer.IDENTITY

    @model_validator(mode="after")
    def _check_dimensions(self):
        if self.final_layer == FinalLayer.IDENTITY and self.state_dim != self.output_dim:
            raise ValueError(
                f"La capa final identidad exige k = n (k={self.state_dim}, n={self.output_dim})"
            )
        if self.family == Family.LGD:
            if self.forward_matrix is None:
                raise ValueError("La familia lgd necesita la matriz directa A")
            if self.forward_matrix.shape != (self.input_dim, self.state_dim):
                raise ValueError(
                    f"A debe ser {self.input_dim}x{self.state_dim}, "
                    f"recibida {self.forward_matrix.shape}"
                )
            check_finite(self.forward_matrix, "A")
        return self

    @property
    def regularizer_rows(self) -> int:
        return self.lgd_rows or self.state_dim

    def block_shapes(self) -> dict[str, tuple[int, ...]]:
        k, m = self.state_dim, self.input_dim
        shapes = {
            Family.CONTRACTIVE: {"W": (k, k), "U": (k, m), "b": (k,)},
            Family.MON: {"A": (k, k), "B": (k, k), "U": (k, m), "b": (k,)},
            Family.LGD: {"R": (self.regularizer_rows, k)},
        }[self.family]
        if self.final_layer == FinalLayer.LINEAR:
            shapes["phi"] = (self.output_dim, k)
        return shapes


class Certificate(BaseModel):
    """Metadatos de certificacion de un ParamSet."""
    model_config = ConfigDict(frozen=True)

    block_norms: dict[str, float]
    l_x: float
    alpha_max: float | None = None
    spectral_norm_w: float | None = None
    lambda_min: float | None = None
    lambda_max: float | None = None


class ParamSet(BaseModel):
    """Pesos concretos theta = (phi, psi). Inmutable tras su construccion."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: Family
    W: DenseMatrix | None = None
    U: DenseMatrix | None = None
    b: DenseMatrix | None = None
    A: DenseMatrix | None = None
    B: DenseMatrix | None = None
    R: DenseMatrix | None = None
    phi: DenseMatrix | None = None
    alpha: float | None = None
    certificate: Certificate | None = None

    @model_validator(mode="after")
    def _freeze_arrays(self):
        for name in ("W", "U", "b", "A", "B", "R", "phi"):
            array = getattr(self, name)
            if array is not None:
                check_finite(array, name)
                array.setflags(write=False)
        return self

    def psi_blocks(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PSI_BLOCKS[self.family]}

    def block_norms(self) -> dict[str, float]:
        norms = {name: frobenius_norm(block) for name, block in self.psi_blocks().items()}
        if self.phi is not None:
            norms["phi"] = frobenius_norm(self.phi)
        return norms

    def psi_vector(self) -> np.ndarray:
        return np.concatenate([block.ravel() for block in self.psi_blocks().values()])

    def theta_vector(self) -> np.ndarray:
        parts = [self.psi_vector()]
        if self.phi is not None:
            parts.append(self.phi.ravel())
        return np.concatenate(parts)

    def replace(self, **changes) -> "ParamSet":
        """Copia validada con campos sustituidos (se pierde el certificado)."""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields["certificate"] = None
        fields.update(changes)
        return ParamSet(**fields)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ParamSet":
        return cls.model_validate_json(text)


# =============================================================================
# Activaciones
# =============================================================================
def activate(z: np.ndarray, activation: Activation, slope: float = LEAKY_SLOPE) -> np.ndarray:
    """Activacion 1-Lipschitz elemento a elemento."""
    if activation == Activation.RELU:
        return np.maximum(z, 0.0)
    if activation == Activation.LEAKY_RELU:
        return np.where(z >= 0.0, z, slope * z)
    return np.array(z, dtype=np.float64)


def _column(vector: np.ndarray, like: np.ndarray) -> np.ndarray:
    return vector if like.ndim == 1 else vector[:, None]


def _check_state(spec: OperatorSpec, x: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x.shape[0] != spec.state_dim:
        raise DimensionError(f"x tiene dimension {x.shape[0]}, se esperaba k={spec.state_dim}")
    if d.shape[0] != spec.input_dim:
        raise DimensionError(f"d tiene dimension {d.shape[0]}, se esperaba m={spec.input_dim}")
    if x.ndim == 2 and d.ndim == 1:
        d = np.repeat(d[:, None], x.shape[1], axis=1)
    if x.ndim == 2 and x.shape[1] != d.shape[1]:
        raise DimensionError(f"Lotes de tamano distinto: x {x.shape[1]}, d {d.shape[1]}")
    return x, d


def _check_blocks(spec: OperatorSpec, params: ParamSet) -> None:
    if params.family != spec.family:
        raise CertificationError(f"ParamSet de familia {params.family.value}, spec {spec.family.value}")
    for name, shape in spec.block_shapes().items():
        block = getattr(params, name)
        if block is None:
            raise DimensionError(f"Falta el bloque {name}")
        if block.shape != shape:
            raise DimensionError(f"Bloque {name} con forma {block.shape}, se esperaba {shape}")
    if spec.final_layer == FinalLayer.IDENTITY and params.phi is not None:
        raise DimensionError("Capa final identidad: phi debe estar ausente")


# =============================================================================
# Familia MON
# =============================================================================
def mon_build_W(A: np.ndarray, B: np.ndarray, m_mon: float) -> np.ndarray:
    """W = (1 - m) I - A^T A + B - B^T, con x^T (I - W) x >= m ||x||^2."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    k = A.shape[1]
    if A.shape != (k, k) or B.shape != (k, k):
        raise DimensionError(f"A y B deben ser cuadradas del mismo tamano: {A.shape}, {B.shape}")
    return (1.0 - m_mon) * np.eye(k) - A.T @ A + B - B.T


def mon_alpha_max(spec: OperatorSpec, params: ParamSet) -> float:
    """Extremo superior 2 m / ||I - W||^2 del intervalo admisible de alpha."""
    W = mon_build_W(params.A, params.B, spec.m_mon)
    gap = spectral_norm_exact(np.eye(W.shape[0]) - W) ** 2
    return math.inf if gap == 0.0 else 2.0 * spec.m_mon / gap


def _check_mon_alpha(spec: OperatorSpec, params: ParamSet) -> float:
    alpha = params.alpha
    upper = mon_alpha_max(spec, params)
    if alpha is None or alpha < 0.0 or alpha > upper * (1.0 + ALPHA_SLACK):
        raise CertificationError(f"alpha={alpha} fuera del intervalo admisible [0, {upper:.6g}]")
    return upper


# =============================================================================
# Familia LGD
# =============================================================================
def lgd_spectrum(spec: OperatorSpec, params: ParamSet) -> tuple[float, float]:
    """(lambda_min, lambda_max) de A^T A + R^T R."""
    A = spec.forward_matrix
    hessian = A.T @ A + params.R.T @ params.R
    eigenvalues = np.linalg.eigvalsh(hessian)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def _check_lgd(spec: OperatorSpec, params: ParamSet) -> tuple[float, float]:
    lam_min, lam_max = lgd_spectrum(spec, params)
    if lam_max <= 0.0 or lam_min < LGD_CONDITION_FLOOR * lam_max:
        raise CertificationError(
            f"A^T A + R^T R mal condicionada (lambda_min={lam_min:.3e}, lambda_max={lam_max:.3e}); "
            "no hay contraccion estricta"
        )
    alpha = params.alpha
    if alpha is None or not 0.0 < alpha < 2.0 / lam_max:
        raise CertificationError(f"alpha={alpha} fuera de (0, {2.0 / lam_max:.6g})")
    return lam_min, lam_max


# =============================================================================
# Operador compilado
# =============================================================================
def iteration_matrix(spec: OperatorSpec, params: ParamSet) -> np.ndarray:
    """Matriz cuya norma espectral es el factor de contraccion L_x."""
    if spec.family == Family.CONTRACTIVE:
        return np.array(params.W)
    if spec.family == Family.MON:
        W = mon_build_W(params.A, params.B, spec.m_mon)
        return np.eye(spec.state_dim) - params.alpha * (np.eye(spec.state_dim) - W)
    A = spec.forward_matrix
    hessian = A.T @ A + params.R.T @ params.R
    return np.eye(spec.state_dim) - params.alpha * hessian


def affine_form(spec: OperatorSpec, params: ParamSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (F, G, c) con T(x; d) = sigma(F x + G d + c); para lgd sigma es la identidad.
    """
    _check_blocks(spec, params)
    if spec.family == Family.CONTRACTIVE:
        return np.array(params.W), np.array(params.U), np.array(params.b)
    if spec.family == Family.MON:
        return iteration_matrix(spec, params), params.alpha * params.U, params.alpha * params.b
    return (
        iteration_matrix(spec, params),
        params.alpha * spec.forward_matrix.T,
        np.zeros(spec.state_dim),
    )


def operator_activation(spec: OperatorSpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.family == Family.LGD:
        return lambda z: z
    return lambda z: activate(z, spec.activation, spec.leaky_slope)


def build_operator(spec: OperatorSpec, params: ParamSet) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """
    Precalcula las matrices de T_psi y devuelve T(x, d).

    x puede ser un vector (k,) o un lote (k, B) con d de forma (m, B).
    """
    F, G, c = affine_form(spec, params)
    sigma = operator_activation(spec)

    def operator(x, d):
        return sigma(F @ x + G @ d + _column(c, x))

    return operator


def apply(spec: OperatorSpec, params: ParamSet, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Un paso de T_psi para cualquier familia."""
    if spec.family == Family.CONTRACTIVE:
        return contractive_apply(params, spec, x, d)
    if spec.family == Family.MON:
        return mon_apply(params, spec, x, d)
    return lgd_apply(params, spec, x, d)


def contractive_apply(params: ParamSet, spec: OperatorSpec, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """sigma(W x + U d + b)."""
    x, d = _check_state(spec, x, d)
    _check_blocks(spec, params)
    norm_w = (
        params.certificate.spectral_norm_w
        if params.certificate is not None and params.certificate.spectral_norm_w is not None
        else spectral_norm_exact(params.W)
    )
    if norm_w >= 1.0:
        raise CertificationError(f"W no certificado: ||W||_2 = {norm_w:.6g} >= 1")
    return build_operator(spec, params)(x, d)


def mon_apply(params: ParamSet, spec: OperatorSpec, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Paso forward-backward sigma((I - alpha (I - W)) x + alpha (U d + b))."""
    x, d = _check_state(spec, x, d)
    _check_blocks(spec, params)
    _check_mon_alpha(spec, params)
    return build_operator(spec, params)(x, d)


def lgd_apply(params: ParamSet, spec: OperatorSpec, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Paso de descenso de gradiente sobre 1/2 ||A x - d||^2 + 1/2 ||R x||^2."""
    x, d = _check_state(spec, x, d)
    _check_blocks(spec, params)
    _check_lgd(spec, params)
    return build_operator(spec, params)(x, d)


def final_apply(phi: np.ndarray | None, x: np.ndarray) -> np.ndarray:
    """P_phi(x): identidad si phi es None, si no phi @ x."""
    x = np.asarray(x, dtype=np.float64)
    if phi is None:
        return np.array(x)
    if phi.shape[1] != x.shape[0]:
        raise DimensionError(f"phi es {phi.shape} pero x tiene dimension {x.shape[0]}")
    return phi @ x


# =============================================================================
# Muestreo y certificacion
# =============================================================================
def _unit_block(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    rows = shape[0]
    cols = shape[1] if len(shape) == 2 else 1
    return sample_on_norm_sphere(rows, cols, BLOCK_RADIUS, rng).reshape(shape)


def _spectral_normalize(W: np.ndarray) -> np.ndarray:
    norm = spectral_norm_exact(W)
    return W * (SPECTRAL_TARGET / norm) if norm > SPECTRAL_TARGET else W


def sample_params(spec: OperatorSpec, rng: np.random.Generator) -> ParamSet:
    """Pesos aleatorios con cada bloque de psi (y phi) de norma de Frobenius 1."""
    blocks = {name: _unit_block(shape, rng) for name, shape in spec.block_shapes().items()}
    params = ParamSet(family=spec.family, **blocks)

    if spec.family == Family.CONTRACTIVE:
        params = params.replace(W=_spectral_normalize(params.W))
    elif spec.family == Family.MON:
        # Punto medio del intervalo admisible [0, 2m/||I-W||^2]
        params = params.replace(alpha=mon_alpha_max(spec, params) / 2.0)
    else:
        _, lam_max = lgd_spectrum(spec, params)
        params = params.replace(alpha=1.0 / lam_max)
    return certify(spec, params)


def contraction_factor(
    params: ParamSet,
    spec: OperatorSpec,
    iters: int = POWER_ITERATIONS,
    rng: np.random.Generator | None = None,
    squarings: int = 0,
) -> float:
    """L_x por iteracion de potencia sobre la matriz de iteracion de la familia."""
    if spec.family == Family.MON:
        _check_mon_alpha(spec, params)
    elif spec.family == Family.LGD:
        _check_lgd(spec, params)
    matrix = iteration_matrix(spec, params)
    factor, _ = power_method(
        matrix, iters, rng if rng is not None else make_rng(POWER_SEED), squarings=squarings
    )
    if factor >= 1.0 - CONTRACTION_MARGIN:
        raise ContractionViolation(factor)
    return factor


def certify(spec: OperatorSpec, params: ParamSet, iters: int = CERT_POWER_ITERATIONS) -> ParamSet:
    """Comprueba dimensiones, normas y contraccion; devuelve el ParamSet certificado."""
    _check_blocks(spec, params)
    norms = params.block_norms()
    for name, norm in norms.items():
        if norm > BLOCK_RADIUS * (1.0 + 1e-12):
            raise CertificationError(f"||{name}||_F = {norm:.6g} supera la cota {BLOCK_RADIUS}")

    extra: dict[str, float | None] = {}
    if spec.family == Family.CONTRACTIVE:
        norm_w = spectral_norm_exact(params.W)
        if norm_w >= 1.0:
            raise ContractionViolation(norm_w, f"||W||_2 = {norm_w:.6g} >= 1")
        extra["spectral_norm_w"] = norm_w
    elif spec.family == Family.MON:
        upper = _check_mon_alpha(spec, params)
        extra["alpha_max"] = upper if math.isfinite(upper) else None
    else:
        lam_min, lam_max = _check_lgd(spec, params)
        extra.update(lambda_min=lam_min, lambda_max=lam_max, alpha_max=2.0 / lam_max)

    # El cociente de Rayleigh es cota inferior de ||M||_2^2; con 2^8 potencias por paso el error
    # relativo cae como (sigma_2/sigma_1)^(2^9 t) y queda muy por debajo del margen salvo que los
    # dos primeros valores singulares casi coincidan sin ser iguales.
    l_x = contraction_factor(params, spec, iters, squarings=CERT_POWER_SQUARINGS) * (1.0 + CERT_RELATIVE_MARGIN)
    if l_x >= 1.0 - CONTRACTION_MARGIN:
        raise ContractionViolation(l_x)
    certificate = Certificate(block_norms=norms, l_x=l_x, **extra)
    return params.replace(certificate=certificate)


def with_alpha(spec: OperatorSpec, params: ParamSet, alpha: float) -> ParamSet:
    return certify(spec, params.replace(alpha=alpha))


def perturb(
    spec: OperatorSpec,
    params: ParamSet,
    scale: float,
    rng: np.random.Generator,
    include_phi: bool = False,
) -> ParamSet:
    """
    ParamSet cercano: cada bloque se desplaza una distancia aleatoria <= scale y se
    reproyecta a la bola unidad. Se conserva alpha; si deja de ser admisible se
    lanza CertificationError y el llamador vuelve a muestrear.
    """
    changes = {}
    names = list(PSI_BLOCKS[spec.family]) + (["phi"] if include_phi and params.phi is not None else [])
    for name in names:
        block = getattr(params, name)
        step = _unit_block(block.shape, rng) * (scale * rng.uniform())
        changes[name] = project_to_ball(block + step, BLOCK_RADIUS)
    if spec.family == Family.CONTRACTIVE:
        changes["W"] = _spectral_normalize(changes["W"])
    return certify(spec, params.replace(**changes))


def admissible_alpha(spec: OperatorSpec, params: ParamSet) -> float:
    """Extremo superior (abierto para lgd) del intervalo de alpha."""
    if spec.family == Family.MON:
        return mon_alpha_max(spec, params)
    if spec.family == Family.LGD:
        _, lam_max = lgd_spectrum(spec, params)
        return 2.0 / lam_max
    raise CertificationError("La familia contractive no tiene paso alpha")


# =============================================================================
# Utilidades
# =============================================================================
def param_count(spec: OperatorSpec) -> int:
    """Numero de parametros p = p_Phi + p_Psi."""
    return sum(math.prod(shape) for shape in spec.block_shapes().values())


def psi_bound(spec: OperatorSpec) -> float:
    """C_params,Psi = sqrt(#bloques de psi) con bloques de norma unidad."""
    return math.sqrt(len(PSI_BLOCKS[spec.family])) * BLOCK_RADIUS


def phi_bound(spec: OperatorSpec) -> float:
    """C_params,Phi: 0 para la identidad, radio del bloque para la capa lineal."""
    return BLOCK_RADIUS if spec.final_layer == FinalLayer.LINEAR else 0.0


def psi_distance(first: ParamSet, second: ParamSet) -> float:
    return float(np.linalg.norm(first.psi_vector() - second.psi_vector()))


def theta_distance(first: ParamSet, second: ParamSet) -> float:
    return float(np.linalg.norm(first.theta_vector() - second.theta_vector()))
