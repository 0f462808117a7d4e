"""
Almacén de resultados en disco.

Estructura de archivos:
resultados/
├── dataset.json    - Instantánea del dataset generado
├── params.json     - ParamSet muestreado (reproducibilidad)
├── constants.json  - ConstantsReport
├── constants.csv   - Una fila por informe de constantes
├── bound.json      - BoundReport por celda (N, p)
├── bound.csv
├── sweep.csv       - Filas del barrido
├── sweep.svg       - Curvas del barrido
├── gaps.json       - GapReport
└── verify.json     - Resultado de la verificación de lemas

JSON con claves ordenadas e indentación fija; CSV con '\\n' como fin de línea y
reales escritos con repr para que dos ejecuciones iguales den los mismos bytes.
"""
import csv
import json
from pathlib import Path
from typing import Any, Iterable

from pydantic import BaseModel

from config import OUTPUT_DIR
from console import log
from errors import ConfigError

ARTIFACTS = [
    "dataset.json", "params.json", "constants.json", "constants.csv", "bound.json",
    "bound.csv", "sweep.csv", "sweep.svg", "gaps.json", "verify.json",
]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _plain(data: BaseModel | list | dict) -> Any:
    if isinstance(data, BaseModel):
        return data.model_dump(mode="json")
    if isinstance(data, list):
        return [_plain(item) for item in data]
    return data


class ReportStore:
    """Directorio de salida con nombres de artefacto fijos."""

    def __init__(self, base_dir: Path = OUTPUT_DIR):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def _get_paths(self) -> dict[str, Path]:
        """Rutas de todos los artefactos conocidos."""
        return {name: self.base_dir / name for name in ARTIFACTS}

    def path(self, name: str) -> Path:
        paths = self._get_paths()
        if name not in paths:
            raise ConfigError(f"Artefacto desconocido: {name}")
        return paths[name]

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def save_json(self, name: str, data: BaseModel | list | dict) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(_plain(data), f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        log(f"Guardado {path}")
        return path

    def load_json(self, name: str) -> Any:
        path = self.path(name)
        if not path.exists():
            raise ConfigError(f"No existe {path}")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def save_csv(self, name: str, columns: list[str], rows: Iterable[dict[str, Any]]) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(column)) for column in columns])
        log(f"Guardado {path}")
        return path

    def load_csv(self, name: str) -> list[dict[str, str]]:
        path = self.path(name)
        if not path.exists():
            raise ConfigError(f"No existe {path}")
        with open(path, "r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))

    def save_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        log(f"Guardado {path}")
        return path
