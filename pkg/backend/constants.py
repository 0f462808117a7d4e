"""
Estimación empírica de las constantes de la cota.

Protocolo: se resuelven los puntos fijos x*_{psi,d} para todo d del dataset
sobre 100 theta aleatorios (bloques de norma de Frobenius 1) y se toman los
máximos observados, inflados por un factor de seguridad de 1.05.
"""
import math
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import POWER_ITERATIONS, SAFETY_FACTOR, THETA_SAMPLES
from console import log
from datasets import Dataset
from errors import NonConvergence, SolveFailure
from fixed_point import solve_batch, solver_config_for
from losses import LossKind, LossSpec, loss_value
from numerics import make_rng, parallel_map
from operators import (
    Family,
    FinalLayer,
    OperatorSpec,
    ParamSet,
    contraction_factor,
    final_apply,
    param_count,
    phi_bound,
    psi_bound,
    sample_params,
)

# Clave de flujo aleatorio para los theta muestreados
THETA_STREAM = 1


class Provenance(str, Enum):
    ESTIMATED = "estimated"
    ANALYTIC = "analytic"


class ConstantsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Family
    final_layer: FinalLayer
    k: int = Field(ge=1)
    m: int = Field(ge=1)
    n: int = Field(ge=1)
    c_d: float = Field(ge=0.0)
    c_out: float = Field(ge=0.0)
    c_out_T: float = Field(ge=0.0)
    c_ell: float = Field(ge=0.0)
    l_x: float = Field(ge=0.0, lt=1.0)
    alpha: float | None = Field(None, ge=0.0)
    c_params_phi: float = Field(ge=0.0)
    c_params_psi: float = Field(ge=0.0)
    c_params: float = Field(ge=0.0)
    l_ell: float = Field(ge=0.0)
    loss: LossKind
    theta_samples: int = Field(ge=1)
    seed: int
    p_model: int = Field(ge=1)
    safety_factor: float = Field(ge=1.0)
    provenance: dict[str, Provenance] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_params(self):
        combined = math.hypot(self.c_params_phi, self.c_params_psi)
        if abs(self.c_params - combined) > 1e-12 * max(1.0, combined):
            raise ValueError(
                f"c_params={self.c_params} no es sqrt(c_params_phi^2 + c_params_psi^2) = {combined}"
            )
        return self

    def csv_row(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "k": self.k,
            "m": self.m,
            "n": self.n,
            "c_d": self.c_d,
            "c_out_T": self.c_out_T,
            "c_out": self.c_out,
            "c_ell": self.c_ell,
            "l_x": self.l_x,
            "c_params": self.c_params,
            "l_ell": self.l_ell,
            "seed": self.seed,
            "n_theta": self.theta_samples,
        }

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ConstantsReport":
        return cls.model_validate_json(text)


class ThetaEvaluation(BaseModel):
    """Máximos observados para un theta sobre todo el dataset."""
    model_config = ConfigDict(frozen=True)

    max_state_norm: float
    max_output_norm: float
    max_loss: float | None = None
    output_radius: float


# =============================================================================
# Muestreo de theta y evaluación
# =============================================================================
def sample_thetas(
    spec: OperatorSpec, n_theta: int, seed: int, threads: int = 1, cell: int = 0,
) -> list[ParamSet]:
    """n_theta ParamSet certificados; el i-ésimo usa el flujo (seed, THETA_STREAM, cell, i)."""
    return parallel_map(
        lambda index: sample_params(spec, make_rng(seed, THETA_STREAM, cell, index)),
        range(n_theta),
        threads,
        desc="Muestreo de theta",
    )


def fixed_points(spec: OperatorSpec, params: ParamSet, dataset: Dataset, theta_index: int = 0) -> np.ndarray:
    """Puntos fijos k x N para todas las entradas del dataset."""
    try:
        return solve_batch(spec, params, dataset.inputs.T, solver_config_for(params.certificate.l_x)).x_star
    except NonConvergence as exc:
        raise SolveFailure(theta_index, exc.index or 0, exc) from exc


def evaluate_theta(
    spec: OperatorSpec,
    params: ParamSet,
    dataset: Dataset,
    loss: LossSpec | None = None,
    theta_index: int = 0,
) -> ThetaEvaluation:
    states = fixed_points(spec, params, dataset, theta_index)
    outputs = final_apply(params.phi, states)
    max_loss = None
    if loss is not None:
        max_loss = float(np.max(np.abs(loss_value(loss, outputs, dataset.targets.T))))
    return ThetaEvaluation(
        max_state_norm=float(np.max(np.linalg.norm(states, axis=0))),
        max_output_norm=float(np.max(np.linalg.norm(outputs, axis=0))),
        max_loss=max_loss,
        output_radius=float(np.linalg.norm(outputs)),
    )


def _evaluate_all(
    spec: OperatorSpec,
    thetas: list[ParamSet],
    dataset: Dataset,
    loss: LossSpec | None,
    threads: int,
) -> list[ThetaEvaluation]:
    if dataset.size == 0:
        raise ValueError("El dataset esta vacio")
    return parallel_map(
        lambda item: evaluate_theta(spec, item[1], dataset, loss, item[0]),
        list(enumerate(thetas)),
        threads,
        desc="Puntos fijos",
    )


# =============================================================================
# Estimadores
# =============================================================================
def estimate_c_d(inputs: np.ndarray) -> float:
    """max_i ||d_i||."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[0] == 0 or inputs.size == 0:
        raise ValueError("El dataset esta vacio")
    return float(np.max(np.linalg.norm(inputs, axis=1)))


def estimate_c_out(
    spec: OperatorSpec,
    dataset: Dataset,
    n_theta: int = THETA_SAMPLES,
    seed: int = 0,
    thetas: list[ParamSet] | None = None,
    safety: float = SAFETY_FACTOR,
    threads: int = 1,
) -> tuple[float, float]:
    """(C_out, C_out,T) con el factor de seguridad aplicado."""
    thetas = thetas if thetas is not None else sample_thetas(spec, n_theta, seed, threads)
    evaluations = _evaluate_all(spec, thetas, dataset, None, threads)
    c_out_T = max(item.max_state_norm for item in evaluations)
    c_out = max(item.max_output_norm for item in evaluations)
    return safety * c_out, safety * c_out_T


def estimate_c_ell(
    loss: LossSpec,
    spec: OperatorSpec,
    dataset: Dataset,
    n_theta: int = THETA_SAMPLES,
    seed: int = 0,
    thetas: list[ParamSet] | None = None,
    safety: float = SAFETY_FACTOR,
    threads: int = 1,
) -> float:
    """max |l(P_phi(x*), y)| sobre theta y datos, por el factor de seguridad."""
    thetas = thetas if thetas is not None else sample_thetas(spec, n_theta, seed, threads)
    evaluations = _evaluate_all(spec, thetas, dataset, loss, threads)
    return safety * max(item.max_loss for item in evaluations)


def estimate_l_x(spec: OperatorSpec, params: ParamSet) -> float:
    """L_x por 100 iteraciones del método de la potencia."""
    return contraction_factor(params, spec, POWER_ITERATIONS)


def process_radius(outputs: list[np.ndarray]) -> float:
    """sup_theta sqrt(sum_i ||h(d_i)||^2) a partir de las salidas n x N de cada theta."""
    return max(float(np.linalg.norm(block)) for block in outputs)


def estimate_constants(
    spec: OperatorSpec,
    dataset: Dataset,
    loss: LossSpec,
    thetas: list[ParamSet] | None = None,
    n_theta: int = THETA_SAMPLES,
    seed: int = 0,
    safety: float = SAFETY_FACTOR,
    threads: int = 1,
) -> ConstantsReport:
    """Informe completo de constantes a partir de una lista explícita de theta."""
    thetas = thetas if thetas is not None else sample_thetas(spec, n_theta, seed, threads)
    log(f"Estimando constantes: familia {spec.family.value}, {len(thetas)} theta, N={dataset.size}")
    evaluations = _evaluate_all(spec, thetas, dataset, loss, threads)

    # El certificado usa más iteraciones que el protocolo; se toma el mayor de ambos
    l_x = max(max(estimate_l_x(spec, theta), theta.certificate.l_x) for theta in thetas)
    alphas = [theta.alpha for theta in thetas if theta.alpha is not None]
    c_params_phi, c_params_psi = phi_bound(spec), psi_bound(spec)

    return ConstantsReport(
        family=spec.family,
        final_layer=spec.final_layer,
        k=spec.state_dim,
        m=spec.input_dim,
        n=spec.output_dim,
        c_d=estimate_c_d(dataset.inputs),
        c_out=safety * max(item.max_output_norm for item in evaluations),
        c_out_T=safety * max(item.max_state_norm for item in evaluations),
        c_ell=safety * max(item.max_loss for item in evaluations),
        l_x=l_x,
        alpha=max(alphas) if alphas else None,
        c_params_phi=c_params_phi,
        c_params_psi=c_params_psi,
        c_params=math.hypot(c_params_phi, c_params_psi),
        l_ell=loss.lipschitz_constant,
        loss=loss.kind,
        theta_samples=len(thetas),
        seed=seed,
        p_model=param_count(spec),
        safety_factor=safety,
        provenance={
            "c_d": Provenance.ESTIMATED,
            "c_out": Provenance.ESTIMATED,
            "c_out_T": Provenance.ESTIMATED,
            "c_ell": Provenance.ESTIMATED,
            "l_x": Provenance.ESTIMATED,
            "alpha": Provenance.ESTIMATED,
            "c_params": Provenance.ANALYTIC,
            "l_ell": Provenance.ANALYTIC,
        },
    )
