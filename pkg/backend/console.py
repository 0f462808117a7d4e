"""
Salida por consola con marca de tiempo, compartida por todos los modulos.
"""
from datetime import datetime
from typing import Iterable, TypeVar

from tqdm import tqdm

T = TypeVar("T")

_QUIET = False


def set_quiet(quiet: bool) -> None:
    """Silencia (o reactiva) todos los mensajes y barras de progreso."""
    global _QUIET
    _QUIET = quiet


def is_quiet() -> bool:
    return _QUIET


def timestamp() -> str:
    """Devuelve marca de tiempo actual."""
    return datetime.now().strftime("%H:%M:%S")


def banner(title: str) -> None:
    if _QUIET:
        return
    print("=" * 60)
    print(f"[{timestamp()}] {title}")
    print("=" * 60)


def log(message: str) -> None:
    if not _QUIET:
        print(f"[{timestamp()}] {message}")


def warn(message: str) -> None:
    if not _QUIET:
        print(f"  [WARN] {message}")


def error(message: str) -> None:
    # Los errores se muestran siempre, incluso en modo silencioso
    print(f"[ERROR] {message}")


def progress(iterable: Iterable[T], desc: str, total: int | None = None) -> Iterable[T]:
    """Barra de progreso tqdm que respeta el modo silencioso."""
    return tqdm(iterable, desc=desc, total=total, disable=_QUIET, leave=False)
