"""Constants for the spin network control package."""

from logging import Logger, getLogger

LOGGER: Logger = getLogger(__package__)

DOMAIN = "spin_control"
REPORT_SCHEMA = "spin-control-report/1"

# Pendant control convention: spin 1 is the isolated spin, spin 2 its partner.
PENDANT_VERTEX = 1
CONTROL_VERTEX = 2

# Automorphism search and symmetry search budgets.
MAX_AUTOMORPHISM_SPINS = 12
MAX_SYMMETRY_DIM = 70
MAX_ORACLE_SPINS = 10

# Tolerances.
WEIGHT_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
NULL_SPACE_RCOND = 1e-10
DEGENERACY_RTOL = 1e-8
DARK_THRESHOLD = 1e-9
NORM_ATOL = 1e-9
PHASE_ATOL = 1e-9
LIE_RANK_RTOL = 1e-10

# Pulse synthesis and simulation.
RWA_CAP = 0.05
DEFAULT_QUALITY = 0.02
STEP_SCALE = 0.01
NORMALIZATION_DRIFT = 1e-6
RAMAN_DETUNING_FRACTION = 0.5
REFINE_BUDGET = 200
TRAJECTORY_SAMPLES = 2000

# System identification.
PERTURBATIVE_FRACTION = 0.05
PEAK_MEDIAN_FACTOR = 3.0
UNIDENTIFIABLE_ALPHA = 0.02
SIGN_SCAN_PHASES = (-0.2, -0.1, 0.0, 0.1, 0.2)

FIXTURE_NAMES = ("fig1", "fig2", "example1", "triangle", "triangle_tail")
