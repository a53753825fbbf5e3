"""Particle transport in the flowing vessel and the first-passage oracle.

The vessel is a cylinder of radius ``channel_radius`` around the x axis,
unbounded upstream, with a reflecting wall. The receiver is an absorbing
disk of radius ``receiver_radius`` centered on the axis in the plane
x = ``distance``; the rest of that plane reflects. Per time step a particle
moves by the flow drift plus independent Gaussian diffusion displacements on
each axis; wall crossings are folded back specularly in the cross-sectional
plane and absorption is checked at step end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import erfc, erfcx

from . import kernels
from .config import EnvironmentConfig


class HitRecord(NamedTuple):
    """One absorption event: when it happened and which emission it came from."""

    hit_time: float
    emission_index: int


@dataclass
class Particle:
    """A single messenger molecule.

    ``position`` is (x, y, z) in µm, ``time`` the age in seconds. A particle
    with ``hit_time`` set has been absorbed and must not be stepped again.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0
    hit_time: Optional[float] = None

    @property
    def alive(self) -> bool:
        return self.hit_time is None


def _fold_radial(y: float, z: float, channel_radius: float) -> tuple[float, float]:
    """Specularly reflect a cross-sectional position into the vessel.

    The radial excess is folded about the wall circle (r -> 2·r_ch − r with
    the angle preserved), repeatedly until the point is inside. A fold from
    beyond 2·r_ch passes through the axis; the negative scale factor handles
    that case, so iteration converges for any finite displacement.
    """
    rr = y * y + z * z
    rch2 = channel_radius * channel_radius
    while rr > rch2:
        r = math.sqrt(rr)
        f = (2.0 * channel_radius - r) / r
        y *= f
        z *= f
        rr = y * y + z * z
    return y, z


def step_particle(
    p: Particle, env: EnvironmentConfig, rng: np.random.Generator
) -> Particle:
    """Advance one particle by one time step of drift plus diffusion.

    Returns a new ``Particle``. Absorption is detected at step end: if the
    post-step axial position reaches the receiver plane and the (folded)
    radial position lies within the receiver disk, the particle is absorbed
    with ``hit_time`` equal to the end of the current step. A crossing
    outside the disk reflects off the end cap (x -> 2·distance − x).
    """
    if not p.alive:
        raise ValueError("cannot step an absorbed particle")
    drift = env.flow_velocity * env.time_step
    sigma = env.step_sigma
    g = rng.standard_normal(3)
    x = p.position[0] + drift + sigma * g[0]
    y = p.position[1] + sigma * g[1]
    z = p.position[2] + sigma * g[2]
    y, z = _fold_radial(y, z, env.channel_radius)
    t = p.time + env.time_step
    if x >= env.distance:
        if y * y + z * z <= env.receiver_radius * env.receiver_radius:
            return Particle(position=np.array([x, y, z]), time=t, hit_time=t)
        x = 2.0 * env.distance - x
    return Particle(position=np.array([x, y, z]), time=t, hit_time=None)


def simulate_emission(
    n: int, env: EnvironmentConfig, t_max: float, rng: np.random.Generator
) -> list[HitRecord]:
    """Release ``n`` particles at the origin at t=0 and collect absorptions.

    Each particle is stepped until it is absorbed or ``t_max`` elapses.
    Returns one record per absorbed particle with ``emission_index`` equal
    to the particle's index in the batch; hit times lie in (0, t_max].
    """
    if n <= 0:
        raise ValueError("n must be > 0")
    if t_max <= 0:
        raise ValueError("t_max must be > 0")
    steps_max = kernels.steps_for_duration(t_max, env.time_step)
    hit_steps = kernels.simulate_hit_steps(env, n, steps_max, rng)
    dt = env.time_step
    return [
        HitRecord(hit_time=int(step) * dt, emission_index=i)
        for i, step in enumerate(hit_steps)
        if step > 0
    ]


def first_passage_cdf_1d(d: float, D: float, v: float, t) -> float:
    """P(a particle released at 0 has reached the plane x=d by time t).

    Valid whenever the receiver spans the vessel cross-section, in which
    case transverse motion and wall reflections cannot affect absorption and
    hitting reduces to the first passage of 1D Brownian motion with drift
    ``v`` and variance rate 2·D:

        F(t) = Φ((v·t − d)/√(2·D·t)) + exp(v·d/D)·Φ(−(v·t + d)/√(2·D·t))

    evaluated in the scaled-complementary-error-function form, which stays
    finite for arbitrarily strong drift. Accepts scalar or array ``t``.
    """
    if d <= 0:
        raise ValueError("d must be > 0")
    if D <= 0:
        raise ValueError("D must be > 0")
    if v < 0:
        raise ValueError("v must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    tp = t_arr[pos]
    s = np.sqrt(4.0 * D * tp)  # √2 · std of the displacement at time t
    a = (d - v * tp) / s
    b = (d + v * tp) / s
    # Φ((vt−d)/√(2Dt)) = erfc(a)/2 ; exp(vd/D)·Φ(−b·√2) = erfcx(b)·exp(−a²)/2
    out[pos] = 0.5 * (erfc(a) + erfcx(b) * np.exp(-a * a))
    result = np.clip(out, 0.0, 1.0)
    return float(result) if np.isscalar(t) or np.ndim(t) == 0 else result
