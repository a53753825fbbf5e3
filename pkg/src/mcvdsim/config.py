"""Configuration types for the vessel environment and the modulation scheme.

Units are micrometers, seconds, and molecule counts throughout. The vessel is
a cylinder aligned with the x axis; the transmitter sits on the axis at the
origin and the absorbing receiver disk lies in the plane x = ``distance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

BCSK = "bcsk"
BCSK_CPA = "bcsk-cpa"
SCHEMES = (BCSK, BCSK_CPA)

#: Named environments used for the eye-diagram analysis: (distance µm,
#: diffusion coefficient µm²/s, flow velocity µm/s).
ENVIRONMENT_PRESETS = {
    "good": (4.0, 150.0, 5.0),
    "moderate": (5.0, 100.0, 2.5),
    "harsh": (6.0, 50.0, 0.0),
}


@dataclass(frozen=True)
class EnvironmentConfig:
    """Physical channel parameters for one simulation environment.

    channel_radius / receiver_radius : µm
        Vessel radius and radius of the absorbing receiver disk. The disk is
        centered on the axis in the plane x = ``distance``; the rest of that
        plane reflects (an end cap with an absorbing window). With
        ``receiver_radius == channel_radius`` the receiver spans the full
        cross-section.
    distance : µm
        Transmitter-to-receiver distance along the vessel axis.
    diffusion_coeff : µm²/s
    flow_velocity : µm/s
        Uniform plug flow along +x (toward the receiver).
    time_step : s
        Simulation step; per-axis diffusion displacement per step is
        N(0, 2·D·Δt).
    rng_seed : int
        Default seed when a caller does not supply its own generator.
    """

    channel_radius: float = 5.0
    receiver_radius: float = 5.0
    distance: float = 6.0
    diffusion_coeff: float = 100.0
    flow_velocity: float = 0.0
    time_step: float = 1e-4
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.channel_radius <= 0:
            raise ValueError("channel_radius must be > 0")
        if self.receiver_radius <= 0:
            raise ValueError("receiver_radius must be > 0")
        if self.receiver_radius > self.channel_radius:
            raise ValueError("receiver_radius must not exceed channel_radius")
        if self.distance <= 0:
            raise ValueError("distance must be > 0")
        if self.diffusion_coeff < 0:
            raise ValueError("diffusion_coeff must be >= 0")
        if self.flow_velocity < 0:
            raise ValueError("flow_velocity must be >= 0")
        if self.time_step <= 0:
            raise ValueError("time_step must be > 0")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be >= 0")

    @property
    def step_sigma(self) -> float:
        """Per-axis diffusion standard deviation per step, √(2DΔt) (µm)."""
        return math.sqrt(2.0 * self.diffusion_coeff * self.time_step)

    def with_time_step(self, dt: float) -> "EnvironmentConfig":
        return replace(self, time_step=dt)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "EnvironmentConfig":
        """Build a config from a named preset (good / moderate / harsh)."""
        try:
            d, diff, v = ENVIRONMENT_PRESETS[name]
        except KeyError:
            raise ValueError(
                f"unknown preset {name!r}; expected one of {sorted(ENVIRONMENT_PRESETS)}"
            ) from None
        params = dict(distance=d, diffusion_coeff=diff, flow_velocity=v)
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class ModulationConfig:
    """Modulation parameters shared by BCSK and BCSK-CPA.

    scheme : "bcsk" or "bcsk-cpa"
    n1 : molecules emitted for an isolated bit-1 (the CPA base amount)
    n0 : molecules emitted for bit-0 (fixed at 0)
    symbol_duration : slot length t_s (s)
    threshold : decision threshold λ (molecules); a received slot count
        ≥ λ decodes as 1. ``None`` means "derive the default from the
        measured channel profile" (half the equalized bit-1 level).
    memory : ISI window m — number of past slots that matter
    """

    scheme: str = BCSK
    n1: int = 300
    n0: int = 0
    symbol_duration: float = 0.5
    threshold: int | None = None
    memory: int = 5

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.n0 != 0:
            raise ValueError("n0 is fixed at 0 (bit-0 slots emit nothing)")
        if self.n1 < 1:
            raise ValueError("n1 must be >= 1")
        if self.symbol_duration <= 0:
            raise ValueError("symbol_duration must be > 0")
        if self.threshold is not None and self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        if self.memory < 0 or (self.scheme == BCSK_CPA and self.memory < 1):
            raise ValueError("memory must be >= 1 for bcsk-cpa and >= 0 otherwise")


def round_half_up(x: float) -> int:
    """Round to nearest integer, ties away from zero toward +inf.

    Used for molecule counts so results do not depend on banker's rounding.
    """
    return int(math.floor(x + 0.5))
