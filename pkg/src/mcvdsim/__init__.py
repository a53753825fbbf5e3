"""Monte Carlo simulation and signal analysis for molecular communication
through a flowing cylindrical channel with an absorbing receiver.

Subpackages cover particle transport (``geometry``, ``kernels``), channel
characterization (``channel``), concentration-shift keying with and without
pre-equalization (``modulation``), bit-error-rate estimation (``ber``),
eye-diagram analysis (``eye``), and reproducible experiment orchestration
(``runner``, ``cli``).
"""

from .config import (
    BCSK,
    BCSK_CPA,
    ENVIRONMENT_PRESETS,
    SCHEMES,
    EnvironmentConfig,
    ModulationConfig,
)
from .kernels import ACTIVE_BACKEND, available_backends

__version__ = "0.1.0"

__all__ = [
    "BCSK",
    "BCSK_CPA",
    "ENVIRONMENT_PRESETS",
    "SCHEMES",
    "EnvironmentConfig",
    "ModulationConfig",
    "ACTIVE_BACKEND",
    "available_backends",
    "__version__",
]
