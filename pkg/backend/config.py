"""
Configuración centralizada de ImplicitBound.
"""
from pathlib import Path

# Rutas base
PROJECT_ROOT = Path(__file__).parent.parent
DATA_DIR = PROJECT_ROOT / "datos"
MNIST_DIR = DATA_DIR / "mnist"
OUTPUT_DIR = DATA_DIR / "resultados"

# Metodo de la potencia (100 iteraciones como en el protocolo experimental)
POWER_ITERATIONS = 100
POWER_EARLY_STOP = 1e-12
POWER_SEED = 0
CERT_POWER_ITERATIONS = 5000  # Certificacion de L_x (parada temprana igualmente)
CERT_POWER_SQUARINGS = 8  # Certificacion: cada paso aplica (M^T M)^(2^8)
CERT_RELATIVE_MARGIN = 1e-9  # L_x certificado = estimacion * (1 + margen), por encima de ||M||_2

# Cuadratura Gauss-Legendre compuesta
QUAD_ORDER = 16
QUAD_TOLERANCE = 1e-8
QUAD_SINGULAR_FRACTION = 1e-6  # epsilon = upper * fraccion
QUAD_DYADIC_LEVELS = 64
QUAD_INITIAL_PANELS = 8
QUAD_MAX_PANELS = 2 ** 15

# Solver de punto fijo
SOLVER_TOLERANCE = 1e-10
SOLVER_MAX_ITERS = 10_000
SOLVER_ITERATION_CAP = 200_000  # Tope del presupuesto adaptado a L_x (MON con L_x ~ 0.998)
SOLVER_BUDGET_SCALE = 1e3  # Cota generosa de ||x_1 - x_0|| para dimensionar el presupuesto

# Operadores
DEFAULT_M_MON = 0.1
LEAKY_SLOPE = 0.01
SPECTRAL_TARGET = 0.99
LGD_CONDITION_FLOOR = 1e-8  # lambda_min >= floor * lambda_max
CONTRACTION_MARGIN = 1e-9
ALPHA_SLACK = 1e-12  # Holgura relativa al comprobar intervalos de alpha

# Estimacion de constantes
THETA_SAMPLES = 100
SAFETY_FACTOR = 1.05

# Cota de generalizacion
DEFAULT_DELTA = 1e-2

# Experimentos (escala de escritorio)
DESK_M = 20
DESK_K = 30
DESK_N = 10
DEFAULT_N_GRID = [100, 1_000, 10_000]
HELDOUT_FACTOR = 4
HELDOUT_CAP = 100_000
DEFAULT_NOISE_PCT = 1.5
DEFAULT_BLOB_SPREAD = 0.5
DEFAULT_CLASSES = 10
BLOB_CENTER_RADIUS = 3.0  # Norma de cada centro de clase
BLOB_CLIP = 10.0  # Soporte: caja de radio BLOB_CLIP * spread alrededor del centro
INVERSE_BOX = 1.0  # Verdad terreno uniforme en [0, box]^k
NOISE_CLIP = 5.0  # Ruido gaussiano truncado a +-5 sigma (soporte compacto)
DATASET_SIZE = 1_000
RANK_REDRAWS = 5
TRAIN_STEPS = 200
TRAIN_LR = 0.5
TRAINED_THETAS = 3
DIVERGENCE_LOSS = 1e6
MNIST_POOL = 4  # 28x28 -> 7x7 por media en bloques

# Dimensiones del experimento CT original (fuera de alcance, solo metadatos)
CT_FULL_SCALE = {
    "angles": 30,
    "beams": 183,
    "measurements": 5490,
    "unknowns": 16384,
    "image_side": 128,
    "noise_pct": 1.5,
}

# Verificacion de lemas (cmd_verify)
VERIFY_SEED = 2024
VERIFY_BASES = 10  # theta base por familia
VERIFY_PERTURBATIONS = 100  # vecinos por theta base (10 x 100 = 10^3 pares)
VERIFY_INPUTS_PER_PAIR = 10  # entradas d por par (10^4 muestras de dos puntos)
VERIFY_PERTURB_SCALE = 0.1
VERIFY_CONTRACTION_PAIRS = 10_000
VERIFY_NETWORK_BASES = 2
VERIFY_NETWORK_PERTURBATIONS = 50
VERIFY_RATIO_SLACK = 1e-9
VERIFY_FD_SAMPLES = 100
VERIFY_FD_STEP = 1e-6
VERIFY_FD_TOLERANCE = 1e-5
VERIFY_POWER_TOLERANCE = 1e-6
VERIFY_RADIUS_SAMPLES = 200
VERIFY_RADIUS_THETAS = 10
VERIFY_RADEMACHER_DRAWS = 2_000
VERIFY_COVERING_RADII = [0.05, 0.1, 0.5, 1.0, 2.0]
VERIFY_COVERING_GRID = 120
VERIFY_DUDLEY_SETS = 50
VERIFY_CE_SAMPLES = 100_000

# Familias, perdidas y activaciones soportadas
SUPPORTED_FAMILIES = ["contractive", "mon", "lgd"]
SUPPORTED_LOSSES = ["l1", "ce"]
SUPPORTED_ACTIVATIONS = ["relu", "leaky_relu", "identity"]

# Columnas de los CSV (orden fijo, forman parte del contrato de salida)
CONSTANTS_CSV_COLUMNS = [
    "family", "k", "m", "n", "c_d", "c_out_T", "c_out", "c_ell",
    "l_x", "c_params", "l_ell", "seed", "n_theta",
]
BOUND_CSV_COLUMNS = [
    "N", "p", "delta", "term_rademacher", "term_confidence", "total_excess",
]
SWEEP_CSV_COLUMNS = [
    "family", "N", "p", "term_rademacher", "term_confidence", "total_excess",
    "max_gap_random", "max_gap_trained",
]

# Codigos de salida de la CLI
EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_CERTIFICATION = 3
EXIT_SOLVER = 4
