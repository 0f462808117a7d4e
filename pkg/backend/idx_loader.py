"""
Lectura y escritura del formato binario IDX (MNIST).

Estructura de un fichero IDX:
    magic      uint32 big-endian  (0x00000803 imágenes, 0x00000801 etiquetas)
    tamaños    uint32 big-endian por dimensión
    datos      bytes sin signo, orden por filas

Los ficheros con extensión .gz se leen y escriben comprimidos.
"""
import gzip
import math
import struct
from pathlib import Path

import numpy as np

from config import DEFAULT_CLASSES, MNIST_DIR, MNIST_POOL
from console import log
from datasets import Dataset, DatasetKind
from errors import ConfigError, IdxFormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

# Nombres estándar de los ficheros de MNIST
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Fichero IDX no encontrado: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # mtime fijo para que el .gz sea idéntico byte a byte entre ejecuciones
    if path.suffix == ".gz":
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(payload)
    else:
        path.write_bytes(payload)


def read_idx(path: Path, expected_magic: int, dims: int) -> np.ndarray:
    """Lee un fichero IDX de bytes sin signo y devuelve el array con su forma."""
    data = _read_bytes(path)
    if len(data) < 4:
        raise IdxFormatError(f"{path}: fichero truncado (cabecera incompleta, {len(data)} bytes)")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: número mágico 0x{magic:08x}, se esperaba 0x{expected_magic:08x}"
        )
    header_end = 4 + 4 * dims
    if len(data) < header_end:
        raise IdxFormatError(f"{path}: fichero truncado (faltan tamaños de dimensión)")
    sizes = struct.unpack(f">{dims}I", data[4:header_end])
    count = math.prod(sizes)
    payload = data[header_end:]
    if len(payload) < count:
        raise IdxFormatError(f"{path}: fichero truncado ({len(payload)} de {count} bytes de datos)")
    return np.frombuffer(payload, dtype=np.uint8, count=count).reshape(sizes)


def load_idx(images_path: Path, labels_path: Path, classes: int = DEFAULT_CLASSES) -> Dataset:
    """
    Carga un par imágenes/etiquetas IDX.

    Returns:
        Dataset de clasificación con píxeles en [0, 1] (fila a fila) y
        etiquetas one-hot.
    """
    images = read_idx(images_path, IMAGES_MAGIC, 3)
    labels = read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"Número de imágenes ({images.shape[0]}) distinto del de etiquetas ({labels.shape[0]})"
        )
    if labels.size and int(labels.max()) >= classes:
        raise IdxFormatError(f"Etiqueta {int(labels.max())} fuera de rango para {classes} clases")

    count, rows, cols = images.shape
    return Dataset(
        inputs=images.reshape(count, rows * cols) / 255.0,
        targets=np.eye(classes)[labels],
        kind=DatasetKind.CLASSIFICATION,
        metadata={"generator": "idx", "images": str(images_path), "rows": rows, "cols": cols},
    )


def write_idx(images: np.ndarray, labels: np.ndarray, images_path: Path, labels_path: Path) -> None:
    """Escribe imágenes (N x filas x columnas, uint8) y etiquetas (N) en formato IDX."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.ndim != 3:
        raise ValueError(f"Las imágenes deben ser N x filas x columnas, recibido {images.shape}")
    if labels.shape != (images.shape[0],):
        raise ValueError(f"Se esperaban {images.shape[0]} etiquetas, recibido {labels.shape}")
    header = struct.pack(">I3I", IMAGES_MAGIC, *images.shape)
    _write_bytes(images_path, header + images.astype(np.uint8).tobytes())
    header = struct.pack(">II", LABELS_MAGIC, labels.shape[0])
    _write_bytes(labels_path, header + labels.astype(np.uint8).tobytes())


def average_pool(images: np.ndarray, factor: int) -> np.ndarray:
    """Media en bloques factor x factor (se recortan filas/columnas sobrantes)."""
    count, rows, cols = images.shape
    rows, cols = rows // factor * factor, cols // factor * factor
    cropped = images[:, :rows, :cols]
    return cropped.reshape(count, rows // factor, factor, cols // factor, factor).mean(axis=(2, 4))


def _find(directory: Path, name: str) -> Path:
    for candidate in (directory / name, directory / f"{name}.gz"):
        if candidate.exists():
            return candidate
    raise ConfigError(f"No se encuentra {name}[.gz] en {directory}")


def load_mnist_subset(
    directory: Path = MNIST_DIR,
    limit: int | None = None,
    rng: np.random.Generator | None = None,
    split: str = "train",
    pool: int = MNIST_POOL,
) -> Dataset:
    """
    Subconjunto de MNIST reducido a escala de escritorio: 28x28 -> (28/pool)^2
    características por media en bloques.
    """
    images_name, labels_name = MNIST_FILES[split]
    images_path, labels_path = _find(Path(directory), images_name), _find(Path(directory), labels_name)
    images = read_idx(images_path, IMAGES_MAGIC, 3)
    labels = read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"Número de imágenes ({images.shape[0]}) distinto del de etiquetas ({labels.shape[0]})"
        )

    indices = np.arange(images.shape[0])
    if limit is not None and limit < len(indices):
        indices = np.sort(rng.choice(indices, size=limit, replace=False)) if rng is not None else indices[:limit]

    pooled = average_pool(images[indices].astype(np.float64) / 255.0, pool)
    log(f"MNIST {split}: {len(indices)} imágenes, {pooled.shape[1]}x{pooled.shape[2]} tras media en bloques")
    return Dataset(
        inputs=pooled.reshape(len(indices), -1),
        targets=np.eye(DEFAULT_CLASSES)[labels[indices]],
        kind=DatasetKind.CLASSIFICATION,
        metadata={"generator": "mnist", "split": split, "pool": pool, "images": str(images_path)},
    )
