"""
Nucleos numericos compartidos: matrices densas, metodo de la potencia,
cuadratura 1-D con singularidad integrable en cero y generador aleatorio
reproducible.

Generador: PCG64 de numpy, sembrado mediante SeedSequence(seed, *claves).
Misma semilla y misma secuencia de llamadas producen los mismos valores en
cualquier plataforma.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Annotated, Callable, Iterator, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, model_validator

from config import (
    POWER_EARLY_STOP,
    POWER_ITERATIONS,
    POWER_SEED,
    QUAD_DYADIC_LEVELS,
    QUAD_INITIAL_PANELS,
    QUAD_MAX_PANELS,
    QUAD_ORDER,
    QUAD_SINGULAR_FRACTION,
    QUAD_TOLERANCE,
)
from console import progress
from errors import NonFiniteError, QuadratureError

T = TypeVar("T")
R = TypeVar("R")


# =============================================================================
# Matrices densas
# =============================================================================
def _to_array(value):
    if value is None:
        return None
    if isinstance(value, dict):
        return np.asarray(value["entries"], dtype=np.float64).reshape(value["shape"])
    return np.array(value, dtype=np.float64)


def _from_array(array: np.ndarray) -> dict:
    return {"shape": list(array.shape), "entries": array.ravel().tolist()}


# Matriz densa (o vector) serializable: {"shape": [...], "entries": [fila a fila]}
DenseMatrix = Annotated[
    np.ndarray,
    BeforeValidator(_to_array),
    PlainSerializer(_from_array, return_type=dict),
]


def check_finite(array: np.ndarray, name: str = "matriz") -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(f"{name} contiene entradas no finitas")
    return array


def frobenius_norm(array: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(array, dtype=np.float64).ravel()))


def spectral_norm_exact(matrix: np.ndarray) -> float:
    """Norma espectral por SVD; solo como referencia y para certificar pesos."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def project_to_ball(array: np.ndarray, radius: float) -> np.ndarray:
    """Proyeccion euclidea (Frobenius) sobre la bola cerrada de radio dado."""
    norm = frobenius_norm(array)
    if norm <= radius:
        return np.array(array, dtype=np.float64)
    return np.asarray(array, dtype=np.float64) * (radius / norm)


# =============================================================================
# Generador aleatorio
# =============================================================================
def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generador PCG64 derivado de (seed, *keys); las claves identifican tareas hijas."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: int = 1,
    desc: str | None = None,
) -> list[R]:
    """map ordenado; con threads > 1 usa un ThreadPoolExecutor (numpy libera el GIL)."""
    if threads <= 1:
        results = map(fn, items)
        return list(progress(results, desc, total=len(items)) if desc else results)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = executor.map(fn, items)
        return list(progress(results, desc, total=len(items)) if desc else results)


def sample_on_norm_sphere(rows: int, cols: int, target_norm: float, rng: np.random.Generator) -> np.ndarray:
    """Matriz con direccion uniforme y norma de Frobenius exactamente target_norm."""
    if target_norm <= 0:
        raise ValueError(f"target_norm debe ser positivo, recibido {target_norm}")
    sample = rng.standard_normal((rows, cols))
    norm = frobenius_norm(sample)
    while norm == 0.0:
        sample = rng.standard_normal((rows, cols))
        norm = frobenius_norm(sample)
    return sample * (target_norm / norm)


# =============================================================================
# Metodo de la potencia
# =============================================================================
def power_iterates(
    matrix: np.ndarray, iters: int, rng: np.random.Generator, squarings: int = 0,
) -> Iterator[float]:
    """
    Cocientes de Rayleigh sucesivos de M^T M con iterantes normalizados.

    Con squarings = s cada paso aplica (M^T M)^(2^s): los iterantes son una
    subsucesión de la iteración simple. Cada valor es una cota inferior de
    ||M||_2^2 y la sucesión es no decreciente.
    """
    gram = matrix.T @ matrix
    step = gram
    for _ in range(squarings):
        step = step @ step
        scale = np.linalg.norm(step)
        if scale == 0.0:
            break
        step = step / scale
    vector = rng.standard_normal(gram.shape[0])
    vector /= np.linalg.norm(vector)
    for _ in range(iters):
        yield float(vector @ gram @ vector)
        image = step @ vector
        norm = np.linalg.norm(image)
        if norm == 0.0:
            return
        vector = image / norm


def power_method(
    matrix: np.ndarray,
    iters: int = POWER_ITERATIONS,
    rng: np.random.Generator | None = None,
    tol: float = POWER_EARLY_STOP,
    squarings: int = 0,
) -> tuple[float, float]:
    """
    Estima la norma espectral de M por iteracion de potencia sobre M^T M.

    Returns:
        (sigma_max, residual): sigma_max es cota inferior de ||M||_2 y residual
        el ultimo cambio relativo del cociente de Rayleigh.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    check_finite(matrix, "M")
    if iters < 1:
        raise ValueError("iters debe ser >= 1")
    if not np.any(matrix):
        return 0.0, 0.0
    if rng is None:
        rng = make_rng(POWER_SEED)

    estimate = 0.0
    residual = 0.0
    for step, value in enumerate(power_iterates(matrix, iters, rng, squarings)):
        residual = abs(value - estimate) / value if value > 0 else 0.0
        estimate = max(estimate, value)
        if step > 0 and residual < tol:
            break
    return math.sqrt(estimate), residual


# =============================================================================
# Cuadratura
# =============================================================================
class QuadratureSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower: float = Field(0.0, ge=0.0)
    upper: float
    panels: int = Field(QUAD_INITIAL_PANELS, ge=1)
    singular_at_zero: bool = False

    @model_validator(mode="after")
    def _check_interval(self):
        if not self.upper > self.lower:
            raise ValueError(f"upper ({self.upper}) debe ser mayor que lower ({self.lower})")
        return self


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(QUAD_ORDER)


def _evaluate(f: Callable[[float], float], points: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(f(points), dtype=np.float64)
        values = np.broadcast_to(values, points.shape) if values.ndim == 0 else values
    except (TypeError, ValueError):
        values = None
    if values is None or values.shape != points.shape:
        values = np.array([f(float(x)) for x in points], dtype=np.float64)
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise QuadratureError(f"Integrando no finito en r = {points[np.argmax(bad)]!r}")
    return values


def _composite(f: Callable, edges: np.ndarray) -> float:
    left, right = edges[:-1], edges[1:]
    half = (right - left) / 2.0
    mid = (right + left) / 2.0
    points = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    values = _evaluate(f, points).reshape(len(left), QUAD_ORDER)
    return float(np.sum(half * (values @ _GL_WEIGHTS)))


def _edges(lower: float, upper: float, panels: int, graded: bool) -> np.ndarray:
    if graded and lower > 0:
        return np.geomspace(lower, upper, panels + 1)
    return np.linspace(lower, upper, panels + 1)


def _singular_slice(f: Callable, eps: float) -> float:
    # Integrando decreciente: en [eps/2^(j+1), eps/2^j] se acota por f en el extremo izquierdo
    total = 0.0
    right = eps
    for _ in range(QUAD_DYADIC_LEVELS):
        left = right / 2.0
        value = float(_evaluate(f, np.array([left]))[0])
        total += (right - left) * value
        right = left
    return total + right * float(_evaluate(f, np.array([right]))[0])


def integrate_with_error(
    f: Callable[[float], float],
    spec: QuadratureSpec,
    tol: float = QUAD_TOLERANCE,
) -> tuple[float, float, int]:
    """
    Gauss-Legendre compuesto con duplicacion de paneles.

    Returns:
        (valor, estimacion de error |I_2k - I_k|, paneles finales)
    """
    lower = spec.lower
    head = 0.0
    graded = spec.singular_at_zero
    if spec.singular_at_zero and lower == 0.0:
        eps = spec.upper * QUAD_SINGULAR_FRACTION
        head = _singular_slice(f, eps)
        lower = eps

    panels = spec.panels
    previous = _composite(f, _edges(lower, spec.upper, panels, graded))
    while True:
        panels *= 2
        current = _composite(f, _edges(lower, spec.upper, panels, graded))
        error = abs(current - previous)
        if error <= tol * abs(head + current) or error <= 1e-300:
            return head + current, error, panels
        if panels >= QUAD_MAX_PANELS:
            raise QuadratureError(
                f"Cuadratura sin converger con {panels} paneles (error estimado {error:.3e})"
            )
        previous = current


def integrate(f: Callable[[float], float], spec: QuadratureSpec, tol: float = QUAD_TOLERANCE) -> float:
    value, _, _ = integrate_with_error(f, spec, tol)
    return value
