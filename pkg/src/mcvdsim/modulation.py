"""Bit encoding and decoding for concentration shift keying.

Two schemes are implemented. Plain BCSK emits ``n1`` molecules for every
bit-1 and nothing for bit-0. The pre-adjusted variant (BCSK-CPA) reduces the
emission of a bit-1 that follows z consecutive bit-1s, subtracting the
expected interference those emissions will contribute to the current slot:

    emitted[k] = n1 − (Σ_{i=1..z} p_i · emitted[k−i]) / p_0

rounded half-up and clamped at zero. The residual sum uses the counts that
were actually emitted (already adjusted), which makes every unclamped bit-1
slot carry the same expected arrival count p_0·n1 up to rounding slack.
Decoding thresholds the per-slot arrival count: 1 iff count ≥ λ.
"""

from __future__ import annotations

import csv
from typing import NamedTuple, Sequence

from .channel import ChannelProfile
from .config import BCSK, BCSK_CPA, ModulationConfig, round_half_up


class EmissionSchedule(NamedTuple):
    """Transmitted bits and the per-slot molecule counts that realize them."""

    bits: tuple
    counts: tuple


def parse_bits(text: str) -> tuple:
    """Parse an ASCII string of '0'/'1' characters into a bit tuple."""
    if not text:
        raise ValueError("bit sequence must be non-empty")
    if set(text) - {"0", "1"}:
        raise ValueError(f"bit sequence may contain only 0 and 1, got {text!r}")
    return tuple(int(c) for c in text)


def cpa_history(bits: Sequence[int], k: int, m: int) -> int:
    """Number of consecutive bit-1s immediately before slot k, capped at m.

    The sequence start has no history (z_0 = 0). This single integer is the
    entire transmitter state the pre-adjustment scheme needs, versus the
    2^m-entry table a full history-indexed scheme would require.
    """
    if k < 0 or k >= len(bits):
        raise IndexError(f"slot index {k} out of range for {len(bits)} bits")
    z = 0
    j = k - 1
    while j >= 0 and bits[j] == 1 and z < m:
        z += 1
        j -= 1
    return z


def encode(
    bits: Sequence[int], cfg: ModulationConfig, profile: ChannelProfile
) -> EmissionSchedule:
    """Turn a bit sequence into per-slot emission counts."""
    bits = tuple(int(b) for b in bits)
    if not bits:
        raise ValueError("bit sequence must be non-empty")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    p = profile.slot_fractions
    if cfg.scheme == BCSK:
        return EmissionSchedule(bits=bits, counts=tuple(cfg.n1 * b for b in bits))
    if len(p) < cfg.memory + 1:
        raise ValueError(
            f"profile covers {len(p) - 1} trailing slots, need memory={cfg.memory}"
        )
    if p[0] <= 0.0:
        raise ValueError("first-slot fraction is zero; pre-adjustment is undefined")
    counts: list[int] = []
    for k, b in enumerate(bits):
        if b == 0:
            counts.append(0)
            continue
        z = cpa_history(bits, k, cfg.memory)
        residual = sum(p[i] * counts[k - i] for i in range(1, z + 1))
        adjusted = round_half_up(cfg.n1 - residual / p[0])
        counts.append(max(0, adjusted))
    return EmissionSchedule(bits=bits, counts=tuple(counts))


def decode(slot_counts: Sequence[float], threshold: int) -> tuple:
    """Threshold per-slot arrival counts into bits: 1 iff count ≥ threshold."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    return tuple(1 if c >= threshold else 0 for c in slot_counts)


def expected_arrivals(
    schedule: EmissionSchedule, profile: ChannelProfile, k: int
) -> float:
    """Expected molecules arriving in slot k given the whole schedule.

    Sums p_i · emitted[k−i] over the profile window, treating slots before
    the sequence start as empty.
    """
    p = profile.slot_fractions
    counts = schedule.counts
    return float(
        sum(p[i] * counts[k - i] for i in range(len(p)) if 0 <= k - i < len(counts))
    )


def equalized_contribution(
    schedule: EmissionSchedule, profile: ChannelProfile, k: int
) -> float:
    """Expected arrivals in slot k from the current emission and the
    consecutive bit-1 run it compensates for (the pre-adjustment target)."""
    p = profile.slot_fractions
    counts = schedule.counts
    z = cpa_history(schedule.bits, k, len(p) - 1)
    return float(sum(p[i] * counts[k - i] for i in range(0, z + 1)))


def default_threshold(profile: ChannelProfile, n1: int) -> int:
    """Default decision threshold: half the equalized bit-1 arrival level.

    An isolated (or perfectly pre-adjusted) bit-1 delivers p_0·n1 expected
    molecules in its own slot and a bit-0 delivers only interference, so the
    midpoint p_0·n1/2 separates the two; never below 1.
    """
    return max(1, round_half_up(profile.slot_fractions[0] * n1 / 2.0))


def resolve_threshold(cfg: ModulationConfig, profile: ChannelProfile) -> int:
    """The configured threshold, or the profile-derived default."""
    return cfg.threshold if cfg.threshold is not None else default_threshold(profile, cfg.n1)


def schedule_to_csv(schedule: EmissionSchedule, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot_index", "bit", "emitted_count"])
        for k, (b, c) in enumerate(zip(schedule.bits, schedule.counts)):
            w.writerow([k, b, c])
