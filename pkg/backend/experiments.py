"""
Experimentos: entrenamiento de la capa final, medida del error de
generalización empírico y barridos de la cota sobre la rejilla (N, p).

psi nunca se entrena: la versión "optimizada" de los pesos solo ajusta P_phi
sobre las características fijas x*_{psi,d}.
"""
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bound import BoundReport, generalization_bound, lipschitz_chain_for
from config import (
    CT_FULL_SCALE,
    DEFAULT_DELTA,
    DIVERGENCE_LOSS,
    THETA_SAMPLES,
    TRAIN_LR,
    TRAIN_STEPS,
    TRAINED_THETAS,
)
from console import banner, log, warn
from constants import ConstantsReport, estimate_constants, fixed_points, sample_thetas
from datasets import Dataset, heldout_size
from errors import DivergenceError, SolveFailure
from losses import LossSpec, loss_gradient, loss_value
from numerics import make_rng, parallel_map, project_to_ball
from operators import FinalLayer, OperatorSpec, ParamSet, certify, final_apply, phi_bound

# Claves de flujo aleatorio de los experimentos
SPLIT_STREAM = 2
TRAIN_STREAM = 3


class DataSource(Protocol):
    def draw_split(self, n_train: int, n_heldout: int, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
        ...


class GapRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta_id: int
    trained: bool = False
    train_loss: float
    heldout_loss: float
    gap: float = Field(ge=0.0)


class GapReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: list[GapRow]
    n_train: int
    n_heldout: int
    failures: int = 0

    @property
    def max_gap(self) -> float:
        return max((row.gap for row in self.rows), default=0.0)

    def max_gap_where(self, trained: bool) -> float | None:
        gaps = [row.gap for row in self.rows if row.trained == trained]
        return max(gaps) if gaps else None


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    N: int
    p: int
    term_rademacher: float
    term_confidence: float
    total_excess: float
    max_gap_random: float | None = None
    max_gap_trained: float | None = None


class SweepResult(BaseModel):
    rows: list[SweepRow]
    reports: list[BoundReport]
    constants: list[ConstantsReport]
    gaps: list[GapReport] = Field(default_factory=list)
    # Dimensiones del experimento CT a escala completa que la celda de escritorio sustituye
    full_scale: dict[str, float] = Field(default_factory=lambda: dict(CT_FULL_SCALE))


# =============================================================================
# Pérdidas y entrenamiento
# =============================================================================
def losses_per_sample(spec: OperatorSpec, params: ParamSet, dataset: Dataset, loss: LossSpec) -> np.ndarray:
    outputs = final_apply(params.phi, fixed_points(spec, params, dataset))
    return np.atleast_1d(loss_value(loss, outputs, dataset.targets.T))


def mean_loss(spec: OperatorSpec, params: ParamSet, dataset: Dataset, loss: LossSpec) -> float:
    """Pérdida empírica L^(theta) = (1/N) sum_i l(P_phi(x*_{psi,d_i}), y_i)."""
    return float(np.mean(losses_per_sample(spec, params, dataset, loss)))


def train_final_layer(
    spec: OperatorSpec,
    params: ParamSet,
    dataset: Dataset,
    loss: LossSpec,
    steps: int = TRAIN_STEPS,
    lr: float = TRAIN_LR,
    rng: np.random.Generator | None = None,
    batch_size: int | None = None,
) -> np.ndarray:
    """
    Descenso de gradiente sobre phi con psi fijo.

    Tras cada paso phi se proyecta sobre la bola de Frobenius de radio
    C_params,Phi. Con rng y batch_size se usan minilotes.

    Raises:
        DivergenceError: si la pérdida media alcanza 10^6 o deja de ser finita
    """
    if spec.final_layer != FinalLayer.LINEAR or params.phi is None:
        raise ValueError("Solo se entrena una capa final lineal")
    states = fixed_points(spec, params, dataset)
    targets = dataset.targets.T
    radius = phi_bound(spec)
    phi = np.array(params.phi)

    for step in range(steps):
        columns = slice(None)
        if rng is not None and batch_size is not None and batch_size < dataset.size:
            columns = rng.choice(dataset.size, size=batch_size, replace=False)
        features, labels = states[:, columns], targets[:, columns]
        outputs = phi @ features
        value = float(np.mean(loss_value(loss, outputs, labels)))
        if not np.isfinite(value) or value >= DIVERGENCE_LOSS:
            raise DivergenceError(step, value)
        gradient = loss_gradient(loss, outputs, labels) @ features.T / features.shape[1]
        phi = project_to_ball(phi - lr * gradient, radius)
    return phi


def train_thetas(
    spec: OperatorSpec,
    thetas: list[ParamSet],
    dataset: Dataset,
    loss: LossSpec,
    seed: int,
    steps: int = TRAIN_STEPS,
    lr: float = TRAIN_LR,
    threads: int = 1,
) -> list[ParamSet]:
    """Copias de thetas con la capa final entrenada (y recertificadas)."""
    def train(item: tuple[int, ParamSet]) -> ParamSet:
        index, params = item
        phi = train_final_layer(spec, params, dataset, loss, steps, lr, make_rng(seed, TRAIN_STREAM, index))
        return certify(spec, params.replace(phi=phi))

    return parallel_map(train, list(enumerate(thetas)), threads, desc="Entrenando P_phi")


# =============================================================================
# Error de generalización
# =============================================================================
def measure_gap(
    spec: OperatorSpec,
    thetas: list[ParamSet],
    train: Dataset,
    heldout: Dataset,
    loss: LossSpec,
    trained: list[bool] | None = None,
    threads: int = 1,
) -> GapReport:
    """Por theta: pérdida en entrenamiento, estimación de L en validación y |diferencia|."""
    trained = trained if trained is not None else [False] * len(thetas)

    def evaluate(index: int) -> GapRow | None:
        try:
            train_loss = mean_loss(spec, thetas[index], train, loss)
            heldout_loss = mean_loss(spec, thetas[index], heldout, loss)
        except SolveFailure:
            return None
        return GapRow(
            theta_id=index,
            trained=trained[index],
            train_loss=train_loss,
            heldout_loss=heldout_loss,
            gap=abs(heldout_loss - train_loss),
        )

    results = parallel_map(evaluate, range(len(thetas)), threads, desc="Midiendo gaps")
    rows = [row for row in results if row is not None]
    failures = len(results) - len(rows)
    if failures:
        warn(f"{failures} theta excluidos por fallo del solver")
    return GapReport(rows=rows, n_train=train.size, n_heldout=heldout.size, failures=failures)


# =============================================================================
# Barrido (N, p)
# =============================================================================
def sweep(
    spec: OperatorSpec,
    source: DataSource,
    n_grid: list[int],
    p_grid: list[int],
    loss: LossSpec,
    delta: float = DEFAULT_DELTA,
    seed: int = 0,
    n_theta: int = THETA_SAMPLES,
    with_gaps: bool = False,
    train_final: bool = False,
    threads: int = 1,
) -> SweepResult:
    """
    Para cada N: nuevos datos, theta muestreados (más theta entrenados si se
    pide), constantes y cota para cada p de la rejilla.

    Las filas salen en el orden de la rejilla (N exterior, p interior).
    """
    if not n_grid or not p_grid:
        raise ValueError("Las rejillas de N y p no pueden estar vacías")
    if train_final and spec.final_layer != FinalLayer.LINEAR:
        raise ValueError("train_final requiere capa final lineal")

    rows, reports, constants, gaps = [], [], [], []
    for n_index, n_samples in enumerate(n_grid):
        banner(f"Celda N={n_samples} ({n_index + 1}/{len(n_grid)})")
        train, heldout = source.draw_split(
            n_samples, heldout_size(n_samples), make_rng(seed, SPLIT_STREAM, n_index)
        )
        thetas = sample_thetas(spec, n_theta, seed, threads, cell=n_index)
        flags = [False] * len(thetas)
        if train_final:
            trained = train_thetas(spec, thetas[:TRAINED_THETAS], train, loss, seed, threads=threads)
            thetas, flags = thetas + trained, flags + [True] * len(trained)

        report = estimate_constants(spec, train, loss, thetas=thetas, seed=seed, threads=threads)
        constants.append(report)
        chain = lipschitz_chain_for(report)

        gap_report = None
        if with_gaps or train_final:
            gap_report = measure_gap(spec, thetas, train, heldout, loss, flags, threads)
            gaps.append(gap_report)

        # Constantes y gaps dependen solo de N: las columnas de gap se repiten en las filas de p de la celda
        for p in p_grid:
            bound = generalization_bound(report, chain, p, n_samples, delta)
            reports.append(bound)
            rows.append(
                SweepRow(
                    family=spec.family.value,
                    N=n_samples,
                    p=p,
                    term_rademacher=bound.term_rademacher,
                    term_confidence=bound.term_confidence,
                    total_excess=bound.total_excess,
                    max_gap_random=gap_report.max_gap_where(False) if gap_report else None,
                    max_gap_trained=gap_report.max_gap_where(True) if gap_report else None,
                )
            )
        log(f"N={n_samples}: cota {reports[-1].total_excess:.4g} (p={p_grid[-1]})")
    return SweepResult(rows=rows, reports=reports, constants=constants, gaps=gaps)
