"""
Configuration for HeomCast.
Environment variables override the defaults here (e.g. HEOMCAST_WORKERS for batch hosts).
"""

import os
from pathlib import Path

# Where user presets and API job records live
HEOMCAST_HOME = Path(os.environ.get("HEOMCAST_HOME", str(Path.home() / ".heomcast")))

# Hierarchy capacity budget (MiB). enumerate_hierarchy refuses layouts whose
# state + RK4 stages would not fit.
MEMORY_BUDGET_MB = int(os.environ.get("HEOMCAST_MEMORY_BUDGET_MB", "2048"))

# Default worker count for sweeps and benchmarks
WORKERS = int(os.environ.get("HEOMCAST_WORKERS", "1"))

# Propagation defaults: 1.0 ps on a 0.2 fs grid gives 5001 samples
DT_PS = float(os.environ.get("HEOMCAST_DT_PS", "0.0002"))
DEPTH = int(os.environ.get("HEOMCAST_DEPTH", "20"))
T_TOTAL_PS = float(os.environ.get("HEOMCAST_T_TOTAL_PS", "1.0"))

# REST API
API_HOST = os.environ.get("API_HOST", "0.0.0.0")
API_PORT = int(os.environ.get("API_PORT", "8060"))
