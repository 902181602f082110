"""
Configuration settings for npg-lab.

Numerical tolerances and controller defaults. Every value can be overridden
through an ``NPG_LAB_*`` environment variable (a ``.env`` file is honoured).
"""

import os
from typing import Final

from dotenv import load_dotenv

load_dotenv()


def _float(name: str, default: float) -> float:
    return float(os.getenv(f"NPG_LAB_{name}", default))


def _int(name: str, default: int) -> int:
    return int(os.getenv(f"NPG_LAB_{name}", default))


# Tolerances
STOCHASTIC_TOL: Final[float] = _float("STOCHASTIC_TOL", 1e-12)
FEASIBILITY_TOL: Final[float] = _float("FEASIBILITY_TOL", 1e-10)
PINV_RTOL: Final[float] = _float("PINV_RTOL", 1e-10)
BOUNDARY_TOL: Final[float] = _float("BOUNDARY_TOL", 1e-9)
FD_STEP: Final[float] = _float("FD_STEP", 1e-5)

# Step controller and stop criteria defaults
DEFAULT_BASE_DT: Final[float] = _float("BASE_DT", 0.1)
DEFAULT_MAX_PARAM_STEP: Final[float] = _float("MAX_PARAM_STEP", 1.0)
DEFAULT_MAX_ETA_STEP: Final[float] = _float("MAX_ETA_STEP", 0.05)
DEFAULT_MIN_DT: Final[float] = _float("MIN_DT", 1e-12)
DEFAULT_MAX_ITERS: Final[int] = _int("MAX_ITERS", 20000)
DEFAULT_GAP_TOL: Final[float] = _float("GAP_TOL", 1e-10)
DEFAULT_GRAD_TOL: Final[float] = _float("GRAD_TOL", 1e-12)

# Oracle
ENUMERATION_LIMIT: Final[int] = _int("ENUMERATION_LIMIT", 10**6)
VALUE_TIE_TOL: Final[float] = _float("VALUE_TIE_TOL", 1e-12)
NEWTON_TOL: Final[float] = _float("NEWTON_TOL", 1e-13)

# Rate fitting
FIT_FLOOR: Final[float] = _float("FIT_FLOOR", 1e-12)
FIT_MIN_POINTS: Final[int] = _int("FIT_MIN_POINTS", 20)

LOG_LEVEL: Final[str] = os.getenv("NPG_LAB_LOG_LEVEL", "INFO")
LOG_DIR: Final[str] = os.getenv("NPG_LAB_LOG_DIR", "logs")
