"""
Descarga los cuatro ficheros IDX de MNIST en datos/mnist/.

Uso (desde la raiz del proyecto):
    python datos/download_mnist.py
    python datos/download_mnist.py --mirror https://otro.mirror/mnist/ --force

Los ficheros se guardan comprimidos (.gz); el cargador del backend los lee
directamente sin descomprimir.
"""
import argparse
import sys
from pathlib import Path

import requests
from tqdm import tqdm

DEFAULT_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"
FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]
CHUNK_SIZE = 1 << 16
TIMEOUT = 60


def download(url: str, target: Path) -> None:
    """Descarga en streaming a un .part y lo renombra al terminar."""
    partial = target.with_suffix(target.suffix + ".part")
    with requests.get(url, stream=True, timeout=TIMEOUT) as response:
        response.raise_for_status()
        total = int(response.headers.get("content-length", 0)) or None
        with open(partial, "wb") as f, tqdm(total=total, unit="B", unit_scale=True, desc=target.name) as bar:
            for chunk in response.iter_content(chunk_size=CHUNK_SIZE):
                f.write(chunk)
                bar.update(len(chunk))
    partial.replace(target)


def main():
    parser = argparse.ArgumentParser(description="Descarga MNIST (formato IDX)")
    parser.add_argument("--mirror", default=DEFAULT_MIRROR, help="URL base con los cuatro ficheros")
    parser.add_argument("--out", default=str(Path(__file__).parent / "mnist"), help="Directorio destino")
    parser.add_argument("--force", action="store_true", help="Descargar aunque ya existan")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mirror = args.mirror if args.mirror.endswith("/") else args.mirror + "/"

    failed = 0
    for name in FILES:
        target = out / name
        if target.exists() and not args.force:
            print(f"  [OK] {name} ya existe")
            continue
        try:
            download(mirror + name, target)
        except requests.RequestException as e:
            print(f"[ERROR] No se pudo descargar {name}: {e}")
            failed += 1

    if failed:
        sys.exit(1)
    print(f"\nMNIST disponible en {out}")


if __name__ == "__main__":
    main()
