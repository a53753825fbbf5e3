"""Bit-error-rate estimation: particle simulation and Gaussian approximation.

The semi-analytical path models the slot arrival count as a Gaussian whose
moments follow from the channel profile (a sum of independent binomial
contributions), then averages the decision-error tail probability over all
equally likely transmit histories inside the ISI window. The simulated path
releases the scheduled molecules, bins absorptions by arrival slot, decodes,
and counts bit errors.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from . import kernels
from .channel import ChannelProfile, steps_per_slot
from .config import EnvironmentConfig, ModulationConfig
from .modulation import EmissionSchedule, decode, encode, resolve_threshold

#: History enumeration grows as 2^m; beyond this the semi-analytical model
#: is impractical and almost certainly a configuration mistake.
MAX_ENUMERATED_MEMORY = 16


class GaussianSlotParams(NamedTuple):
    """Moments of the Gaussian approximation of one slot's arrival count."""

    mean: float
    variance: float


class BerResult(NamedTuple):
    simulated_ber: float
    semi_analytical_ber: float
    bits_tested: int
    errors_observed: int


def gaussian_slot_params(
    schedule: EmissionSchedule, profile: ChannelProfile, k: int
) -> GaussianSlotParams:
    """Mean and variance of the arrival count in slot k.

    Each emission contributes binomially: mean p_i·emitted[k−i] and variance
    p_i·(1−p_i)·emitted[k−i]; emissions before the sequence start are zero.
    """
    p = profile.slot_fractions
    counts = schedule.counts
    mean = 0.0
    var = 0.0
    for i in range(len(p)):
        j = k - i
        if 0 <= j < len(counts) and counts[j]:
            mean += p[i] * counts[j]
            var += p[i] * (1.0 - p[i]) * counts[j]
    return GaussianSlotParams(mean=mean, variance=var)


def _history_moments(
    cfg: ModulationConfig, profile: ChannelProfile
) -> list[tuple[int, float, float]]:
    """(current_bit, mean, variance) for every history/bit combination.

    Histories are the 2^m equally likely bit windows preceding the decision
    slot; emission counts are what the configured scheme would actually send
    for that window (with nothing before it), so the pre-adjustment scheme's
    history-dependent reductions are reflected exactly.
    """
    m = cfg.memory
    out = []
    for h in range(2**m):
        history = tuple((h >> i) & 1 for i in range(m))  # chronological order
        for current in (0, 1):
            bits = history + (current,)
            schedule = encode(bits, cfg, profile)
            params = gaussian_slot_params(schedule, profile, m)
            out.append((current, params.mean, params.variance))
    return out


def _error_term(current: int, mean: float, variance: float, lam: float) -> float:
    """P(decode error) for one history under the Gaussian approximation.

    Decode decides 1 iff count ≥ λ. The Gaussian tail is taken at λ − 0.5
    (continuity correction for the integer-valued count); a zero-variance
    slot is deterministic and contributes an exact 0/1 indicator instead.
    """
    if variance == 0.0:
        decided_one = mean >= lam
        return float(decided_one if current == 0 else not decided_one)
    z = (lam - 0.5 - mean) / math.sqrt(variance)
    tail_ge = float(ndtr(-z))  # P(count ≥ λ)
    return tail_ge if current == 0 else 1.0 - tail_ge


def semi_analytical_ber(cfg: ModulationConfig, profile: ChannelProfile) -> float:
    """Average error probability over all 2^m histories and both bit values."""
    if cfg.memory > MAX_ENUMERATED_MEMORY:
        raise ValueError(
            f"memory={cfg.memory} would enumerate 2^{cfg.memory} histories; "
            f"the limit is {MAX_ENUMERATED_MEMORY}"
        )
    lam = resolve_threshold(cfg, profile)
    weight = 1.0 / (2**cfg.memory * 2)
    total = 0.0
    for current, mean, var in _history_moments(cfg, profile):
        total += weight * _error_term(current, mean, var, lam)
    return total


def optimal_threshold(
    cfg: ModulationConfig,
    profile: ChannelProfile,
    candidates: Optional[Sequence[int]] = None,
) -> int:
    """Threshold with the lowest predicted error rate.

    Sweeps candidate thresholds (default 1..n1) against the history
    enumeration; ties resolve to the smallest threshold.
    """
    if cfg.memory > MAX_ENUMERATED_MEMORY:
        raise ValueError(f"memory={cfg.memory} too large to enumerate")
    moments = _history_moments(cfg, profile)
    weight = 1.0 / (2**cfg.memory * 2)
    if candidates is None:
        candidates = range(1, cfg.n1 + 1)
    best_lam, best_ber = None, math.inf
    for lam in candidates:
        ber = sum(weight * _error_term(c, mu, var, lam) for c, mu, var in moments)
        if ber < best_ber - 1e-15:
            best_lam, best_ber = lam, ber
    return int(best_lam)


def simulate_arrivals(
    schedule: EmissionSchedule,
    env: EnvironmentConfig,
    t_s: float,
    isi_window: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Release the scheduled molecules and return absolute absorption steps.

    Slot k's molecules are released together at the slot start (step k·sps).
    Each molecule is tracked for (isi_window + 1) slots and then dropped.
    Returns the 1-based absolute step index of every absorption, unsorted.
    """
    sps = steps_per_slot(t_s, env.time_step)
    horizon = (isi_window + 1) * sps
    counts = np.asarray(schedule.counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    emit_slot = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    hit = kernels.simulate_hit_steps(env, total, horizon, rng)
    mask = hit > 0
    return emit_slot[mask] * sps + hit[mask]


def slot_counts_from_steps(abs_steps: np.ndarray, sps: int, n_slots: int) -> np.ndarray:
    """Per-slot arrival counts from absolute absorption steps.

    Step s (1-based) belongs to slot (s−1)//sps; arrivals after the last
    slot are discarded (the tail of the final emissions' tracking window).
    """
    if len(abs_steps) == 0:
        return np.zeros(n_slots, dtype=np.int64)
    slots = (abs_steps - 1) // sps
    slots = slots[slots < n_slots]
    return np.bincount(slots, minlength=n_slots).astype(np.int64)


def simulate_ber(
    cfg: ModulationConfig,
    env: EnvironmentConfig,
    profile: ChannelProfile,
    n_bits: int,
    n_reps: int,
    rng: np.random.Generator,
) -> BerResult:
    """Monte Carlo BER over independently drawn random bit sequences.

    Each replication draws a fresh uniform bit sequence, encodes it, runs
    the particle simulation, decodes with the configured (or default)
    threshold, and accumulates bit errors. The matching history-enumeration
    value is reported alongside.
    """
    if n_bits < 1 or n_reps < 1:
        raise ValueError("n_bits and n_reps must be >= 1")
    if not math.isclose(profile.symbol_duration, cfg.symbol_duration):
        raise ValueError(
            "profile symbol_duration does not match the modulation config"
        )
    lam = resolve_threshold(cfg, profile)
    sps = steps_per_slot(cfg.symbol_duration, env.time_step)
    errors = 0
    for _ in range(n_reps):
        bits = tuple(int(b) for b in rng.integers(0, 2, size=n_bits))
        schedule = encode(bits, cfg, profile)
        abs_steps = simulate_arrivals(
            schedule, env, cfg.symbol_duration, profile.isi_window, rng
        )
        counts = slot_counts_from_steps(abs_steps, sps, n_bits)
        decoded = decode(counts, lam)
        errors += sum(d != b for d, b in zip(decoded, bits))
    bits_tested = n_bits * n_reps
    fixed_cfg = cfg if cfg.threshold is not None else ModulationConfig(
        scheme=cfg.scheme,
        n1=cfg.n1,
        symbol_duration=cfg.symbol_duration,
        threshold=lam,
        memory=cfg.memory,
    )
    return BerResult(
        simulated_ber=errors / bits_tested,
        semi_analytical_ber=semi_analytical_ber(fixed_cfg, profile),
        bits_tested=bits_tested,
        errors_observed=errors,
    )


__all__ = [
    "BerResult",
    "GaussianSlotParams",
    "gaussian_slot_params",
    "semi_analytical_ber",
    "optimal_threshold",
    "simulate_arrivals",
    "slot_counts_from_steps",
    "simulate_ber",
]
