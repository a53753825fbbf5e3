"""Kernel backend selection: compiled Cython core with a NumPy fallback.

Both backends implement the stepping protocol documented in ``kernels_py``
and produce bit-identical results for the same generator state. The
compiled kernel is preferred; set ``MCVDSIM_FORCE_PYTHON_KERNEL=1`` to force
the pure-NumPy path (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import kernels_py
from .config import EnvironmentConfig

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on build environment
    _kernels = None

if _kernels is not None and not os.environ.get("MCVDSIM_FORCE_PYTHON_KERNEL"):
    _impl = _kernels
else:
    _impl = kernels_py

#: Name of the backend actually in use ("compiled" or "python").
ACTIVE_BACKEND: str = _impl.KERNEL_NAME


def available_backends() -> dict[str, object]:
    """Map backend name -> module for every importable kernel."""
    backends: dict[str, object] = {kernels_py.KERNEL_NAME: kernels_py}
    if _kernels is not None:
        backends[_kernels.KERNEL_NAME] = _kernels
    return backends


def simulate_hit_steps(
    env: EnvironmentConfig,
    n: int,
    steps_max: int,
    rng: np.random.Generator,
    backend=None,
) -> np.ndarray:
    """Release ``n`` particles at the origin and step them to absorption.

    Returns an int64 array: 1-based absorbing step per particle, -1 for
    particles still alive after ``steps_max`` steps. Hit time is
    ``step * env.time_step``.
    """
    impl = backend if backend is not None else _impl
    drift = env.flow_velocity * env.time_step
    sigma = math.sqrt(2.0 * env.diffusion_coeff * env.time_step)
    return impl.simulate_hit_steps(
        rng,
        int(n),
        int(steps_max),
        drift,
        sigma,
        env.distance,
        env.channel_radius,
        env.receiver_radius,
    )


def steps_for_duration(duration: float, time_step: float) -> int:
    """Number of whole steps fitting in ``duration`` (tolerant of float fuzz)."""
    return int(math.floor(duration / time_step + 1e-9))
