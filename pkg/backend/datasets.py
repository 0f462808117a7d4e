"""
Conjuntos de datos de escritorio:
- problema inverso lineal sintético d = A x + ruido (regresión, objetivo x)
- nubes gaussianas con objetivos one-hot (clasificación)

Todos los generadores tienen soporte compacto por construcción: la verdad
terreno vive en una caja y el ruido se trunca.
"""
import math
from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import (
    BLOB_CENTER_RADIUS,
    BLOB_CLIP,
    DEFAULT_BLOB_SPREAD,
    DEFAULT_NOISE_PCT,
    HELDOUT_CAP,
    HELDOUT_FACTOR,
    INVERSE_BOX,
    NOISE_CLIP,
    RANK_REDRAWS,
)
from errors import DimensionError, RankDeficiency
from numerics import DenseMatrix, check_finite, sample_on_norm_sphere


class DatasetKind(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class Dataset(BaseModel):
    """Muestras S = {(d_i, y_i)}: inputs es N x m y targets N x n."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    inputs: DenseMatrix
    targets: DenseMatrix
    kind: DatasetKind
    metadata: dict[str, Any] = Field(default_factory=dict)
    forward_matrix: DenseMatrix | None = None

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise DimensionError("inputs y targets deben ser matrices N x dim")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DimensionError(
                f"{self.inputs.shape[0]} entradas frente a {self.targets.shape[0]} objetivos"
            )
        check_finite(self.inputs, "inputs")
        check_finite(self.targets, "targets")
        self.inputs.setflags(write=False)
        self.targets.setflags(write=False)
        return self

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def subset(self, indices) -> "Dataset":
        return Dataset(
            inputs=self.inputs[indices],
            targets=self.targets[indices],
            kind=self.kind,
            metadata=dict(self.metadata),
            forward_matrix=self.forward_matrix,
        )

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        return cls.model_validate_json(text)


def heldout_size(n_train: int) -> int:
    """Tamaño del conjunto de validación: 4 N acotado por 10^5."""
    return min(HELDOUT_FACTOR * n_train, HELDOUT_CAP)


# =============================================================================
# Fuentes de datos
# =============================================================================
class InverseProblemSource(BaseModel):
    """Problema inverso lineal con A fija; cada draw genera muestras nuevas."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    forward_matrix: DenseMatrix
    noise_pct: float = Field(DEFAULT_NOISE_PCT, ge=0.0)
    box: float = Field(INVERSE_BOX, ge=0.0)

    @property
    def input_dim(self) -> int:
        return self.forward_matrix.shape[0]

    @property
    def state_dim(self) -> int:
        return self.forward_matrix.shape[1]

    def draw(self, n_samples: int, rng: np.random.Generator) -> Dataset:
        m, k = self.forward_matrix.shape
        truth = rng.uniform(0.0, self.box, size=(n_samples, k))
        signal = truth @ self.forward_matrix.T
        # Ruido relativo a la magnitud de cada coordenada de la señal
        gaussian = np.clip(rng.standard_normal((n_samples, m)), -NOISE_CLIP, NOISE_CLIP)
        measurements = signal + (self.noise_pct / 100.0) * np.abs(signal) * gaussian
        return Dataset(
            inputs=measurements,
            targets=truth,
            kind=DatasetKind.REGRESSION,
            metadata={"generator": "inverse_problem", "noise_pct": self.noise_pct, "box": self.box},
            forward_matrix=self.forward_matrix,
        )

    def draw_split(self, n_train: int, n_heldout: int, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
        return self.draw(n_train, rng), self.draw(n_heldout, rng)


class BlobSource(BaseModel):
    """Nubes gaussianas alrededor de centros fijos, clases asignadas por turnos."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    centers: DenseMatrix
    spread: float = Field(DEFAULT_BLOB_SPREAD, ge=0.0)

    @property
    def classes(self) -> int:
        return self.centers.shape[0]

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    def draw(self, n_samples: int, rng: np.random.Generator, offset: int = 0) -> Dataset:
        labels = (offset + np.arange(n_samples)) % self.classes
        limit = BLOB_CLIP * self.spread
        jitter = np.clip(self.spread * rng.standard_normal((n_samples, self.input_dim)), -limit, limit)
        return Dataset(
            inputs=self.centers[labels] + jitter,
            targets=np.eye(self.classes)[labels],
            kind=DatasetKind.CLASSIFICATION,
            metadata={"generator": "blobs", "spread": self.spread, "classes": self.classes},
        )

    def draw_split(self, n_train: int, n_heldout: int, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
        return self.draw(n_train, rng), self.draw(n_heldout, rng, offset=n_train)

    def support_radius(self) -> float:
        """Cota de ||d|| sobre todo el soporte."""
        centers = float(np.max(np.linalg.norm(self.centers, axis=1)))
        return centers + BLOB_CLIP * self.spread * math.sqrt(self.input_dim)


class PoolSource(BaseModel):
    """Remuestreo con reemplazo de un conjunto fijo (p. ej. MNIST ya cargado)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pool: Dataset

    @property
    def input_dim(self) -> int:
        return self.pool.input_dim

    def draw(self, n_samples: int, rng: np.random.Generator) -> Dataset:
        return self.pool.subset(rng.integers(0, self.pool.size, size=n_samples))

    def draw_split(self, n_train: int, n_heldout: int, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
        # Particion disjunta de indices del pool, luego remuestreo dentro de cada parte
        order = rng.permutation(self.pool.size)
        cut = max(1, self.pool.size // 5)
        train_pool = self.pool.subset(order[cut:])
        heldout_pool = self.pool.subset(order[:cut])
        return (
            train_pool.subset(rng.integers(0, train_pool.size, size=n_train)),
            heldout_pool.subset(rng.integers(0, heldout_pool.size, size=n_heldout)),
        )


# =============================================================================
# Generadores
# =============================================================================
def sample_forward_matrix(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """A m x k con entradas N(0, 1/m) y rango columna completo (hasta RANK_REDRAWS intentos)."""
    for _ in range(RANK_REDRAWS):
        matrix = rng.standard_normal((m, k)) / math.sqrt(m)
        if np.linalg.matrix_rank(matrix) == k:
            return matrix
    raise RankDeficiency(
        f"A ({m}x{k}) sin rango columna completo tras {RANK_REDRAWS} intentos"
        + (" (m < k)" if m < k else "")
    )


def inverse_problem_source(
    m: int, k: int, noise_pct: float, rng: np.random.Generator, box: float = INVERSE_BOX,
) -> InverseProblemSource:
    return InverseProblemSource(forward_matrix=sample_forward_matrix(m, k, rng), noise_pct=noise_pct, box=box)


def gen_inverse_problem(
    m: int,
    k: int,
    n_samples: int,
    noise_pct: float,
    rng: np.random.Generator,
    box: float = INVERSE_BOX,
) -> tuple[Dataset, np.ndarray]:
    """Dataset de regresión (d = A x + ruido, objetivo x) y la matriz A usada."""
    if min(m, k, n_samples) < 1:
        raise ValueError("m, k y N deben ser >= 1")
    source = inverse_problem_source(m, k, noise_pct, rng, box)
    return source.draw(n_samples, rng), np.array(source.forward_matrix)


def blob_source(m: int, classes: int, spread: float, rng: np.random.Generator) -> BlobSource:
    if classes < 2:
        raise ValueError(f"Se necesitan al menos 2 clases, recibido {classes}")
    centers = np.vstack([sample_on_norm_sphere(1, m, BLOB_CENTER_RADIUS, rng) for _ in range(classes)])
    return BlobSource(centers=centers, spread=spread)


def gen_blobs(
    m: int, classes: int, n_samples: int, spread: float, rng: np.random.Generator,
) -> Dataset:
    """Nubes gaussianas con objetivos one-hot, balanceadas por asignación circular."""
    return blob_source(m, classes, spread, rng).draw(n_samples, rng)
