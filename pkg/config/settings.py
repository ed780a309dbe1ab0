import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Output locations
OUTPUT_DIR = os.getenv("NSSTAT_OUTPUT_DIR", "runs")
LOG_DIR = os.getenv("NSSTAT_LOG_DIR", "logs")
LOG_LEVEL = os.getenv("NSSTAT_LOG_LEVEL", "INFO")

# Worker threads for FFTs and ensemble members
THREADS = int(os.getenv("NSSTAT_THREADS", "1"))

# Default flow setup
DEFAULT_NU = 0.1
DEFAULT_RESOLUTION = 16
DEFAULT_PERIOD = 6.283185307179586  # 2*pi

# Snapshot / container formats
SNAPSHOT_MAGIC = b"SNSE"
SNAPSHOT_VERSION = 1
TRAJECTORY_FOOTER_MAGIC = b"SNTX"
MEASURE_MAGIC = b"SNSM"

# Tolerances
HERMITIAN_RTOL = 1e-10
DIVERGENCE_RTOL = 1e-10
WEIGHT_TOL = 1e-12
PASTE_TOL = 1e-10
BUDGET_RTOL = 1e-8
BALL_RTOL = 1e-8
ESTIMATE_RTOL = 1e-6
BOUND_RTOL = 1e-8
BOUND_ATOL = 1e-12
STATIONARITY_TOL = 1e-2
CONVERGENCE_TOL = 1e-2
TIME_RTOL = 1e-9

# Picard sweeps for the Crank-Nicolson midpoint
PICARD_MAX_ITER = 50
PICARD_TOL = 1e-13

# Weak-topology surrogate: |k_i| <= cutoff, i.e. 33 modes per axis
WEAK_MODE_CUTOFF = 16

# Statistical tolerance for ensemble counts
WILSON_CONFIDENCE = 0.95

# Shape-constant estimation
SHAPE_SAMPLES = 64
