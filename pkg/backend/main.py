"""
Punto de entrada de ImplicitBound.

Subcomandos:
- generate: genera el dataset y guarda una instantánea (dataset.json)
- estimate: estima las constantes de la cota (constants.json, constants.csv)
- bound:    evalúa la cota sobre la rejilla (N, p) (bound.json, bound.csv)
- sweep:    barrido completo con curvas (sweep.csv, sweep.svg, gaps.json)
- gap:      mide el error de generalización empírico (gaps.json)
- verify:   verificación Monte Carlo de los lemas (verify.json)

Códigos de salida: 0 ok, 1 verificación fallida, 2 configuración,
3 certificación, 4 solver.
"""
import argparse
import json
import sys
import time
from enum import Enum
from pathlib import Path
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator

from bound import generalization_bound, lipschitz_chain_for
from config import (
    BOUND_CSV_COLUMNS,
    CONSTANTS_CSV_COLUMNS,
    DATASET_SIZE,
    DEFAULT_BLOB_SPREAD,
    DEFAULT_CLASSES,
    DEFAULT_DELTA,
    DEFAULT_N_GRID,
    DEFAULT_NOISE_PCT,
    DESK_K,
    DESK_M,
    EXIT_CERTIFICATION,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VERIFICATION,
    MNIST_DIR,
    OUTPUT_DIR,
    SUPPORTED_FAMILIES,
    SUPPORTED_LOSSES,
    SWEEP_CSV_COLUMNS,
    THETA_SAMPLES,
    TRAINED_THETAS,
    VERIFY_SEED,
)
from console import banner, error, log, set_quiet
from constants import ConstantsReport, estimate_constants, sample_thetas
from datasets import (
    BlobSource,
    Dataset,
    InverseProblemSource,
    PoolSource,
    blob_source,
    heldout_size,
    inverse_problem_source,
)
from errors import (
    CertificationError,
    ConfigError,
    DivergenceError,
    NonConvergence,
    SolveFailure,
    VerificationFailure,
)
from experiments import SPLIT_STREAM, measure_gap, sweep, train_thetas
from idx_loader import load_mnist_subset
from losses import LossKind, loss_spec
from numerics import make_rng
from operators import Family, FinalLayer, OperatorSpec, param_count
from report_store import ReportStore
from svg_plot import render, sweep_plot
from verification import VerifySizes, run_lemma_suite

# Claves de flujo aleatorio de la CLI
SOURCE_STREAM = 4
DATA_STREAM = 5


class DataKind(str, Enum):
    INVERSE_PROBLEM = "inverse_problem"
    BLOBS = "blobs"
    MNIST = "mnist"


class DataSourceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: DataKind = DataKind.INVERSE_PROBLEM
    size: PositiveInt = DATASET_SIZE
    noise_pct: float = Field(DEFAULT_NOISE_PCT, ge=0.0)
    spread: float = Field(DEFAULT_BLOB_SPREAD, gt=0.0)
    classes: int = Field(DEFAULT_CLASSES, ge=2)
    mnist_dir: Path = MNIST_DIR
    mnist_limit: PositiveInt | None = None

    @property
    def is_classification(self) -> bool:
        return self.kind != DataKind.INVERSE_PROBLEM


class RunConfig(BaseModel):
    """Configuración de una ejecución: fichero JSON (--config) más flags."""
    model_config = ConfigDict(extra="forbid")

    family: Family = Family.CONTRACTIVE
    m: PositiveInt | None = None
    k: PositiveInt = DESK_K
    final_layer: FinalLayer | None = None
    data: DataSourceConfig = Field(default_factory=DataSourceConfig)
    n_grid: list[PositiveInt] = Field(default_factory=lambda: list(DEFAULT_N_GRID))
    p_grid: list[PositiveInt] | None = None
    delta: float = Field(DEFAULT_DELTA, gt=0.0, lt=1.0)
    loss: LossKind | None = None
    seed: int | None = Field(None, ge=0, lt=2 ** 64)
    out: Path = OUTPUT_DIR
    threads: PositiveInt = 1
    n_theta: PositiveInt = THETA_SAMPLES
    with_gaps: bool = False
    train_final_layer: bool = False
    dataset: Path | None = None
    constants: Path | None = None
    verify: VerifySizes = Field(default_factory=VerifySizes)

    @model_validator(mode="after")
    def _check_combination(self):
        if not self.n_grid:
            raise ValueError("n_grid no puede estar vacía")
        if self.p_grid is not None and not self.p_grid:
            raise ValueError("p_grid no puede estar vacía")
        if self.family == Family.LGD and self.data.is_classification:
            raise ValueError("La familia lgd necesita datos inverse_problem (matriz directa A)")
        if self.train_final_layer and self.resolved_final_layer != FinalLayer.LINEAR:
            raise ValueError("--train-final-layer requiere capa final lineal")
        return self

    @property
    def resolved_seed(self) -> int:
        return self.seed if self.seed is not None else 0

    @property
    def resolved_final_layer(self) -> FinalLayer:
        if self.final_layer is not None:
            return self.final_layer
        return FinalLayer.LINEAR if self.data.is_classification else FinalLayer.IDENTITY

    @property
    def resolved_loss(self) -> LossKind:
        if self.loss is not None:
            return self.loss
        return LossKind.CE if self.data.is_classification else LossKind.L1


# =============================================================================
# Montaje de datos y arquitectura
# =============================================================================
def load_config(args: argparse.Namespace) -> RunConfig:
    """RunConfig desde --config (si existe) con los flags de la línea de órdenes encima."""
    values: dict = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"No existe el fichero de configuración: {path}")
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} no es JSON válido: {e}") from e

    overrides = {
        "family": args.family,
        "seed": args.seed,
        "out": args.out,
        "n_grid": args.n_grid,
        "p_grid": args.p_grid,
        "delta": args.delta,
        "loss": args.loss,
        "threads": args.threads,
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    if args.with_gaps:
        values["with_gaps"] = True
    if args.train_final_layer:
        values["train_final_layer"] = True
    return RunConfig.model_validate(values)


def build_source(cfg: RunConfig) -> tuple[OperatorSpec, InverseProblemSource | BlobSource | PoolSource]:
    """Arquitectura y fuente de datos coherentes con la configuración."""
    rng = make_rng(cfg.resolved_seed, SOURCE_STREAM)
    k = cfg.k
    final_layer = cfg.resolved_final_layer

    if cfg.data.kind == DataKind.INVERSE_PROBLEM:
        # A m x k debe tener rango columna completo
        m = cfg.m or 2 * k
        source = inverse_problem_source(m, k, cfg.data.noise_pct, rng)
        n = k
        forward = source.forward_matrix if cfg.family == Family.LGD else None
    elif cfg.data.kind == DataKind.BLOBS:
        m = cfg.m or DESK_M
        source = blob_source(m, cfg.data.classes, cfg.data.spread, rng)
        n, forward = cfg.data.classes, None
    else:
        pool = load_mnist_subset(cfg.data.mnist_dir, cfg.data.mnist_limit, rng)
        source = PoolSource(pool=pool)
        m, n, forward = pool.input_dim, pool.output_dim, None

    if cfg.data.is_classification and final_layer == FinalLayer.IDENTITY and n != k:
        raise ConfigError(f"Capa final identidad con {n} clases exige k = {n}")
    spec = OperatorSpec(
        family=cfg.family,
        state_dim=k,
        input_dim=m,
        output_dim=n,
        forward_matrix=forward,
        final_layer=final_layer,
    )
    return spec, source


def load_dataset(cfg: RunConfig) -> tuple[OperatorSpec, Dataset]:
    """Dataset de --dataset (instantánea JSON) o generado con la semilla."""
    spec, source = build_source(cfg)
    if cfg.dataset is None:
        return spec, source.draw(cfg.data.size, make_rng(cfg.resolved_seed, DATA_STREAM))

    if not cfg.dataset.exists():
        raise ConfigError(f"No existe el dataset: {cfg.dataset}")
    dataset = Dataset.from_json(cfg.dataset.read_text(encoding="utf-8"))
    if dataset.input_dim != spec.input_dim or dataset.output_dim != spec.output_dim:
        raise ConfigError(
            f"El dataset es {dataset.input_dim}->{dataset.output_dim}, "
            f"la arquitectura {spec.input_dim}->{spec.output_dim}"
        )
    if spec.family == Family.LGD:
        if dataset.forward_matrix is None:
            raise ConfigError("La familia lgd necesita un dataset con forward_matrix")
        spec = spec.model_copy(update={"forward_matrix": dataset.forward_matrix})
    return spec, dataset


# =============================================================================
# Comandos
# =============================================================================
def cmd_generate(cfg: RunConfig) -> Dataset:
    """Genera el dataset configurado y guarda dataset.json."""
    banner("GENERANDO DATASET")
    _, dataset = load_dataset(cfg.model_copy(update={"dataset": None}))
    ReportStore(cfg.out).save_json("dataset.json", dataset)
    log(f"{dataset.size} muestras ({dataset.kind.value}), m={dataset.input_dim}, n={dataset.output_dim}")
    return dataset


def cmd_estimate(cfg: RunConfig) -> ConstantsReport:
    """Estima las constantes de la cota."""
    banner(f"ESTIMANDO CONSTANTES ({cfg.family.value})")
    spec, dataset = load_dataset(cfg)
    thetas = sample_thetas(spec, cfg.n_theta, cfg.resolved_seed, cfg.threads)
    report = estimate_constants(
        spec, dataset, loss_spec(cfg.resolved_loss), thetas=thetas, seed=cfg.resolved_seed, threads=cfg.threads
    )

    store = ReportStore(cfg.out)
    store.save_json("params.json", thetas[0])
    store.save_json("constants.json", report)
    store.save_csv("constants.csv", CONSTANTS_CSV_COLUMNS, [report.csv_row()])
    log(
        f"C_out={report.c_out:.4g} C_out,T={report.c_out_T:.4g} C_l={report.c_ell:.4g} "
        f"L_x={report.l_x:.6f} C_params={report.c_params:.4g}"
    )
    return report


def cmd_bound(cfg: RunConfig) -> list:
    """Evalúa la cota sobre la rejilla (N, p) a partir de constants.json."""
    banner("EVALUANDO COTA")
    store = ReportStore(cfg.out)
    path = cfg.constants or store.path("constants.json")
    if not Path(path).exists():
        raise ConfigError(f"No existe el fichero de constantes: {path}")
    report = ConstantsReport.from_json(Path(path).read_text(encoding="utf-8"))
    chain = lipschitz_chain_for(report)

    p_grid = cfg.p_grid or [report.p_model]
    reports = [
        generalization_bound(report, chain, p, n_samples, cfg.delta)
        for n_samples in cfg.n_grid
        for p in p_grid
    ]
    store.save_json("bound.json", reports)
    store.save_csv("bound.csv", BOUND_CSV_COLUMNS, [item.csv_row() for item in reports])
    log(f"L^={chain.l_hat:.4g}; {len(reports)} celdas, menor exceso {min(r.total_excess for r in reports):.4g}")
    return reports


def cmd_sweep(cfg: RunConfig):
    """Barrido completo: CSV y curvas SVG."""
    banner(f"BARRIDO ({cfg.family.value})")
    spec, source = build_source(cfg)
    result = sweep(
        spec,
        source,
        cfg.n_grid,
        cfg.p_grid or [param_count(spec)],
        loss_spec(cfg.resolved_loss),
        delta=cfg.delta,
        seed=cfg.resolved_seed,
        n_theta=cfg.n_theta,
        with_gaps=cfg.with_gaps,
        train_final=cfg.train_final_layer,
        threads=cfg.threads,
    )

    store = ReportStore(cfg.out)
    store.save_csv("sweep.csv", SWEEP_CSV_COLUMNS, [row.model_dump() for row in result.rows])
    store.save_text("sweep.svg", render(sweep_plot(result.rows, spec.family.value)))
    if result.gaps:
        store.save_json("gaps.json", result.gaps)
    return result


def cmd_gap(cfg: RunConfig):
    """Mide el error de generalización empírico."""
    banner(f"MIDIENDO GAPS ({cfg.family.value})")
    spec, source = build_source(cfg)
    n_train = cfg.data.size
    train, heldout = source.draw_split(
        n_train, heldout_size(n_train), make_rng(cfg.resolved_seed, SPLIT_STREAM, 0)
    )
    loss = loss_spec(cfg.resolved_loss)
    thetas = sample_thetas(spec, cfg.n_theta, cfg.resolved_seed, cfg.threads)
    flags = [False] * len(thetas)
    if cfg.train_final_layer:
        trained = train_thetas(spec, thetas[:TRAINED_THETAS], train, loss, cfg.resolved_seed, threads=cfg.threads)
        thetas, flags = thetas + trained, flags + [True] * len(trained)

    report = measure_gap(spec, thetas, train, heldout, loss, flags, cfg.threads)
    ReportStore(cfg.out).save_json("gaps.json", report)
    trained_gap = report.max_gap_where(True)
    log(
        f"gap máximo aleatorio {report.max_gap_where(False) or 0.0:.4g}; "
        f"entrenado {'-' if trained_gap is None else f'{trained_gap:.4g}'}"
    )
    return report


def cmd_verify(cfg: RunConfig):
    """Verificación Monte Carlo de los lemas."""
    banner("VERIFICANDO LEMAS")
    seed = cfg.seed if cfg.seed is not None else VERIFY_SEED
    checks = run_lemma_suite(seed, cfg.verify)
    ReportStore(cfg.out).save_json("verify.json", checks)
    failed = [check.name for check in checks if not check.passed]
    if failed:
        raise VerificationFailure(f"Comprobaciones fallidas: {', '.join(failed)}")
    log(f"{len(checks)} comprobaciones superadas")
    return checks


COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "gap": cmd_gap,
    "verify": cmd_verify,
}


# =============================================================================
# Línea de órdenes
# =============================================================================
def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Lista de enteros no válida: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Fichero JSON con un RunConfig")
    common.add_argument("--family", choices=SUPPORTED_FAMILIES, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=str, default=None, help="Directorio de salida")
    common.add_argument("--n-grid", type=_int_list, default=None, help="Valores de N separados por comas")
    common.add_argument("--p-grid", type=_int_list, default=None, help="Valores de p separados por comas")
    common.add_argument("--delta", type=float, default=None)
    common.add_argument("--loss", choices=SUPPORTED_LOSSES, default=None)
    common.add_argument("--threads", type=int, default=None, help="Máximo de hilos de trabajo")
    common.add_argument("--with-gaps", action="store_true", help="Medir gaps en cada celda del barrido")
    common.add_argument("--train-final-layer", action="store_true", help="Añadir theta con P_phi entrenada")
    common.add_argument("--quiet", action="store_true", help="Sin mensajes ni barras de progreso")

    parser = argparse.ArgumentParser(
        description="Cotas de generalización para redes implícitas contractivas",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos:
  python main.py estimate --family mon --seed 1
  python main.py bound --n-grid 100,1000,10000 --p-grid 100,1000
  python main.py sweep --family contractive --with-gaps --train-final-layer \\
      --config ../datos/blobs.json
  python main.py verify
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=command.__doc__ or name)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    set_quiet(args.quiet)
    start = time.time()
    try:
        cfg = load_config(args)
        COMMANDS[args.command](cfg)
    except VerificationFailure as e:
        error(str(e))
        return EXIT_VERIFICATION
    except (ConfigError, ValidationError, FileNotFoundError) as e:
        error(str(e))
        return EXIT_CONFIG
    except CertificationError as e:
        error(str(e))
        return EXIT_CERTIFICATION
    except (NonConvergence, SolveFailure, DivergenceError) as e:
        error(str(e))
        return EXIT_SOLVER
    except ValueError as e:
        # Argumentos fuera de dominio detectados por la biblioteca (rejillas vacías, capa final)
        error(str(e))
        return EXIT_CONFIG
    log(f"Tiempo total: {time.time() - start:.1f}s")
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
