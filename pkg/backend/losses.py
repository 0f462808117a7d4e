"""
Funciones de perdida con su constante de Lipschitz:
- l1:  ||pred - target||_1, L_l = 1
- ce:  entropia cruzada del softmax, L_l = 2
"""
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from errors import DimensionError

_LIPSCHITZ = {"l1": 1.0, "ce": 2.0}


class LossKind(str, Enum):
    L1 = "l1"
    CE = "ce"


class LossSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: LossKind
    lipschitz_constant: float

    @model_validator(mode="after")
    def _check_constant(self):
        expected = _LIPSCHITZ[self.kind.value]
        if self.lipschitz_constant != expected:
            raise ValueError(
                f"La perdida {self.kind.value} tiene L_l = {expected}, recibido {self.lipschitz_constant}"
            )
        return self


def loss_spec(kind: LossKind | str) -> LossSpec:
    kind = LossKind(kind)
    return LossSpec(kind=kind, lipschitz_constant=_LIPSCHITZ[kind.value])


def _pair(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"pred {pred.shape} y target {target.shape} no coinciden")
    return pred, target


def _hot_index(target: np.ndarray) -> np.ndarray:
    """Indice caliente por columna (axis 0); exige one-hot exacto."""
    is_binary = np.all((target == 0.0) | (target == 1.0), axis=0)
    if not np.all(is_binary & (target.sum(axis=0) == 1.0)):
        raise ValueError("target no es un vector one-hot")
    return np.argmax(target, axis=0)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> float | np.ndarray:
    """Suma de diferencias absolutas; con lotes (n x B) devuelve una perdida por columna."""
    pred, target = _pair(pred, target)
    return np.sum(np.abs(pred - target), axis=0) if pred.ndim == 2 else float(np.sum(np.abs(pred - target)))


def l1_subgradient(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    pred, target = _pair(pred, target)
    return np.sign(pred - target)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax estabilizado por resta del maximo (por columnas si es 2-D)."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=0)
    weights = np.exp(shifted)
    return weights / np.sum(weights, axis=0)


def ce_softmax_loss(logits: np.ndarray, target: np.ndarray) -> float | np.ndarray:
    """-log softmax_k(logits) con k el indice caliente de target."""
    logits, target = _pair(logits, target)
    hot = _hot_index(target)
    peak = np.max(logits, axis=0)
    log_partition = peak + np.log(np.sum(np.exp(logits - peak), axis=0))
    if logits.ndim == 1:
        return float(log_partition - logits[hot])
    return log_partition - logits[hot, np.arange(logits.shape[1])]


def ce_softmax_grad(logits: np.ndarray, target: np.ndarray) -> np.ndarray:
    """softmax(logits) - target."""
    logits, target = _pair(logits, target)
    _hot_index(target)
    return softmax(logits) - target


def loss_value(loss: LossSpec, pred: np.ndarray, target: np.ndarray) -> float | np.ndarray:
    if loss.kind == LossKind.L1:
        return l1_loss(pred, target)
    return ce_softmax_loss(pred, target)


def loss_gradient(loss: LossSpec, pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradiente (o subgradiente para l1) respecto a pred."""
    if loss.kind == LossKind.L1:
        return l1_subgradient(pred, target)
    return ce_softmax_grad(pred, target)
