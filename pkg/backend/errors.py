"""
Jerarquia de excepciones de ImplicitBound.

La CLI traduce cada familia a un codigo de salida (ver config.EXIT_*).
"""
from typing import Any


class ImplicitBoundError(Exception):
    """Base de todos los errores propios."""


class ConfigError(ImplicitBoundError):
    """Configuracion invalida o fichero de entrada inexistente."""


class DimensionError(ImplicitBoundError, ValueError):
    """Dimensiones incompatibles entre operandos."""


class NonFiniteError(ImplicitBoundError, ValueError):
    """Aparece un NaN o infinito donde solo se admiten reales finitos."""


class CertificationError(ImplicitBoundError):
    """Un ParamSet u operador no cumple sus condiciones de certificacion."""


class ContractionViolation(CertificationError):
    """El factor de contraccion calculado no es estrictamente menor que 1."""

    def __init__(self, factor: float, message: str | None = None):
        self.factor = factor
        super().__init__(message or f"Factor de contraccion {factor:.12g} >= 1")


class RankDeficiency(CertificationError):
    """La matriz directa de un problema inverso no tiene rango columna completo."""


class NonConvergence(ImplicitBoundError):
    """La iteracion de punto fijo agota max_iters sin alcanzar la tolerancia."""

    def __init__(self, last_iterate: Any, update_norm: float, iterations: int, index: int | None = None):
        self.last_iterate = last_iterate
        self.index = index
        self.update_norm = update_norm
        self.iterations = iterations
        super().__init__(
            f"Sin convergencia tras {iterations} iteraciones "
            f"(ultima actualizacion {update_norm:.3e})"
        )


class SolveFailure(ImplicitBoundError):
    """Fallo del solver durante una estimacion, con los indices implicados."""

    def __init__(self, theta_index: int, data_index: int, cause: NonConvergence):
        self.theta_index = theta_index
        self.data_index = data_index
        self.cause = cause
        super().__init__(f"Fallo en theta #{theta_index}, dato #{data_index}: {cause}")


class QuadratureError(ImplicitBoundError):
    """La cuadratura no converge o el integrando no es finito."""


class IdxFormatError(ImplicitBoundError, ValueError):
    """Fichero IDX mal formado."""


class DivergenceError(ImplicitBoundError):
    """El entrenamiento de la capa final diverge."""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"Entrenamiento divergente en el paso {step} (perdida {loss:.3e})")


class VerificationFailure(ImplicitBoundError):
    """Alguna comprobacion empirica de los lemas falla."""
