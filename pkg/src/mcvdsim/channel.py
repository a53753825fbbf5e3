"""Channel characterization: per-slot absorption fractions and hit histogram.

The channel profile drives everything downstream: emission pre-adjustment,
the Gaussian error model, and the default decision threshold. Slot i covers
arrival times in (i·t_s, (i+1)·t_s]; particles are tracked for (m+1) slots
and then dropped, so the fractions deliberately exclude later arrivals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .config import EnvironmentConfig

#: Fine bins per symbol slot in the hit-time histogram (bin width = t_s/100).
BINS_PER_SLOT = 100

#: Minimum emission count for a usable estimate; below this the fractions are
#: too noisy to support emission pre-adjustment.
MIN_SAMPLES = 10_000


@dataclass(eq=False)
class ChannelProfile:
    """Measured arrival statistics of one emission.

    slot_fractions : tuple of p_0..p_m — fraction of emitted molecules
        absorbed during each following symbol slot (p_0 = same slot).
    symbol_duration : slot length t_s (s).
    isi_window : m, the number of trailing slots tracked beyond the first.
    histogram : absorption counts per fine time bin over (0, (m+1)·t_s].
    bin_width : histogram bin width (s).
    samples : number of molecules emitted for the estimate.
    """

    slot_fractions: tuple
    symbol_duration: float
    isi_window: int
    histogram: np.ndarray
    bin_width: float
    samples: int

    def __post_init__(self) -> None:
        self.slot_fractions = tuple(float(p) for p in self.slot_fractions)
        self.histogram = np.asarray(self.histogram, dtype=np.int64)
        if len(self.slot_fractions) != self.isi_window + 1:
            raise ValueError("need exactly isi_window + 1 slot fractions")
        if any(p < 0.0 or p > 1.0 for p in self.slot_fractions):
            raise ValueError("slot fractions must lie in [0, 1]")
        if sum(self.slot_fractions) > 1.0 + 1e-12:
            raise ValueError("slot fractions must sum to at most 1")
        if self.samples <= 0:
            raise ValueError("samples must be > 0")
        if self.histogram.sum() > self.samples:
            raise ValueError("histogram mass cannot exceed the emission count")

    # -- derived views -----------------------------------------------------

    @property
    def bins_per_slot(self) -> int:
        return len(self.histogram) // (self.isi_window + 1)

    @property
    def absorbed(self) -> int:
        return int(self.histogram.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChannelProfile):
            return NotImplemented
        return (
            self.slot_fractions == other.slot_fractions
            and self.symbol_duration == other.symbol_duration
            and self.isi_window == other.isi_window
            and self.bin_width == other.bin_width
            and self.samples == other.samples
            and np.array_equal(self.histogram, other.histogram)
        )

    # -- serialization -----------------------------------------------------

    def to_csv(self, path) -> None:
        """Write the profile as a flat CSV (parameters, fractions, histogram)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "m", "bin_width", "samples"])
            w.writerow(
                [repr(self.symbol_duration), self.isi_window, repr(self.bin_width), self.samples]
            )
            w.writerow(["slot_index", "fraction"])
            for i, p in enumerate(self.slot_fractions):
                w.writerow([i, repr(p)])
            w.writerow(["bin_start", "count"])
            for b, count in enumerate(self.histogram):
                w.writerow([repr(b * self.bin_width), int(count)])

    @classmethod
    def from_csv(cls, path) -> "ChannelProfile":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["t_s", "m", "bin_width", "samples"]:
            raise ValueError(f"unrecognized profile header in {path}")
        t_s, m, bin_width, samples = rows[1]
        fractions, hist = [], []
        section = None
        for row in rows[2:]:
            if row == ["slot_index", "fraction"]:
                section = "fractions"
            elif row == ["bin_start", "count"]:
                section = "histogram"
            elif section == "fractions":
                fractions.append(float(row[1]))
            elif section == "histogram":
                hist.append(int(row[1]))
        return cls(
            slot_fractions=tuple(fractions),
            symbol_duration=float(t_s),
            isi_window=int(m),
            histogram=np.array(hist, dtype=np.int64),
            bin_width=float(bin_width),
            samples=int(samples),
        )


def steps_per_slot(t_s: float, time_step: float) -> int:
    """Simulation steps per symbol slot; t_s must be a whole number of steps."""
    ratio = t_s / time_step
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-6 * n:
        raise ValueError(
            f"symbol duration {t_s} is not a whole number of time steps {time_step}"
        )
    return n


def histogram_from_hit_steps(
    hit_steps: np.ndarray, sps: int, m: int, bins_per_slot: int = BINS_PER_SLOT
) -> np.ndarray:
    """Bin 1-based absorption steps into (m+1)·bins_per_slot fine time bins.

    Bin b covers steps (b·sps/bins_per_slot, (b+1)·sps/bins_per_slot] by pure
    integer arithmetic, so bin edges are exact regardless of float rounding.
    """
    n_bins = (m + 1) * bins_per_slot
    hits = hit_steps[hit_steps > 0]
    bins = (hits - 1) * bins_per_slot // sps
    return np.bincount(bins, minlength=n_bins).astype(np.int64)[:n_bins]


def estimate_channel_profile(
    env: EnvironmentConfig,
    t_s: float,
    m: int,
    n_samples: int,
    rng: Optional[np.random.Generator] = None,
) -> ChannelProfile:
    """Measure the channel profile by releasing ``n_samples`` molecules.

    Molecules are tracked for (m+1) symbol slots; absorptions are binned at
    t_s/100 resolution and the slot fractions are the exact per-slot masses
    of that histogram divided by ``n_samples``.
    """
    if t_s <= 0:
        raise ValueError("t_s must be > 0")
    if m < 0:
        raise ValueError("m must be >= 0")
    if n_samples < MIN_SAMPLES:
        raise ValueError(
            f"n_samples must be at least {MIN_SAMPLES} for a usable estimate"
        )
    if rng is None:
        rng = np.random.default_rng(env.rng_seed)
    sps = steps_per_slot(t_s, env.time_step)
    steps_max = (m + 1) * sps
    hit_steps = kernels.simulate_hit_steps(env, n_samples, steps_max, rng)
    hist = histogram_from_hit_steps(hit_steps, sps, m)
    per_slot = hist.reshape(m + 1, BINS_PER_SLOT).sum(axis=1)
    fractions = tuple(float(c) / n_samples for c in per_slot)
    return ChannelProfile(
        slot_fractions=fractions,
        symbol_duration=t_s,
        isi_window=m,
        histogram=hist,
        bin_width=t_s / BINS_PER_SLOT,
        samples=n_samples,
    )
