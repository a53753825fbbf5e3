"""Molecule-count eye diagram and its quality metrics.

Arrival events are folded slot-by-slot: every symbol slot yields one trace
of cumulative within-slot arrival counts (interference from earlier
emissions included), labeled with the slot's transmitted bit. Three metrics
summarize the overlay of these traces:

* per-bit curve standard deviation — spread of the received-count curves;
* maximum eye height — the largest opening between the bit-1 and bit-0
  curve families within the slot;
* counting SNR — mean over standard deviation of the pairwise integral
  differences between bit-1 and bit-0 curves.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

STD_MODES = ("totals", "pooled")
OPENING_MODES = ("worst-case", "mean-curve")
NORMALIZATION_MODES = ("none", "signal-mean", "emission")
INTEGRAL_BASES = ("curve-area", "slot-totals")


class DegenerateEye(Exception):
    """The pairwise-difference spread is zero; the counting SNR is undefined."""


class SlotTrace(NamedTuple):
    """Cumulative within-slot arrival counts for one transmitted symbol.

    ``emitted`` records how many molecules the transmitter released for this
    slot; it is only needed by the "emission" eye-height normalization.
    """

    slot_index: int
    bit: int
    samples: np.ndarray
    emitted: Optional[int] = None


@dataclass
class EyeDiagram:
    """Overlay of per-slot cumulative arrival traces."""

    traces: list
    symbol_duration: float
    bin_width: float

    def __post_init__(self) -> None:
        lengths = {len(t.samples) for t in self.traces}
        if len(lengths) > 1:
            raise ValueError("all traces must have the same number of samples")
        if self.bin_width <= 0 or self.symbol_duration <= 0:
            raise ValueError("bin_width and symbol_duration must be > 0")
        self._matrix_cache: dict = {}

    def samples_matrix(self, bit: int) -> np.ndarray:
        """Stack of all traces with the given bit label, one row per trace.

        The stack is cached; callers must not modify the returned array.
        """
        if bit not in self._matrix_cache:
            rows = [t.samples for t in self.traces if t.bit == bit]
            self._matrix_cache[bit] = (
                np.vstack(rows).astype(float) if rows else np.empty((0, 0))
            )
        return self._matrix_cache[bit]


def _bins_per_slot(t_s: float, bin_width: float) -> int:
    ratio = t_s / bin_width
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-6 * n:
        raise ValueError(
            f"bin_width {bin_width} must divide the symbol duration {t_s}"
        )
    return n


def build_eye_diagram(hits, bits: Sequence[int], t_s: float, bin_width: float) -> EyeDiagram:
    """Fold absolute arrival times into per-slot cumulative traces.

    ``hits`` may be arrival times in seconds or records with a ``hit_time``
    attribute. Time is partitioned into len(bits) slots of length t_s; a hit
    in (g·bin_width, (g+1)·bin_width] increments the containing slot's trace
    from fine bin g%bins on. Arrivals after the last slot are discarded.
    """
    bits = tuple(int(b) for b in bits)
    if not bits:
        raise ValueError("bit sequence must be non-empty")
    bins = _bins_per_slot(t_s, bin_width)
    times = np.asarray(
        [h.hit_time if hasattr(h, "hit_time") else h for h in hits], dtype=float
    )
    counts = np.zeros((len(bits), bins), dtype=np.int64)
    if times.size:
        # right-closed bins: a hit exactly on a boundary belongs to the bin
        # it closes; the epsilon absorbs float noise in times that are exact
        # multiples of the bin width
        g = np.ceil(times / bin_width - 1e-9).astype(np.int64) - 1
        g = np.maximum(g, 0)
        keep = g < len(bits) * bins
        g = g[keep]
        np.add.at(counts, (g // bins, g % bins), 1)
    cumulative = np.cumsum(counts, axis=1)
    traces = [
        SlotTrace(slot_index=k, bit=b, samples=cumulative[k])
        for k, b in enumerate(bits)
    ]
    return EyeDiagram(traces=traces, symbol_duration=t_s, bin_width=bin_width)


def _require_traces(eye: EyeDiagram, bit: int, minimum: int) -> list:
    matching = [t for t in eye.traces if t.bit == bit]
    if len(matching) < minimum:
        raise ValueError(
            f"need at least {minimum} bit-{bit} trace(s), have {len(matching)}"
        )
    return matching


def curve_std(eye: EyeDiagram, bit: int, mode: str = "totals") -> float:
    """Sample standard deviation of the bit's received-count curves.

    mode "totals" measures the spread of end-of-slot totals (the decision
    statistic); mode "pooled" measures the spread of every sample of every
    matching curve.
    """
    if mode not in STD_MODES:
        raise ValueError(f"mode must be one of {STD_MODES}, got {mode!r}")
    traces = _require_traces(eye, bit, 2)
    if mode == "totals":
        values = np.array([t.samples[-1] for t in traces], dtype=float)
    else:
        values = np.concatenate([np.asarray(t.samples, dtype=float) for t in traces])
    return float(np.std(values, ddof=1))


def _scaled_matrices(
    eye: EyeDiagram, normalization: str, n1: Optional[int]
) -> tuple[np.ndarray, np.ndarray]:
    if normalization not in NORMALIZATION_MODES:
        raise ValueError(
            f"normalization must be one of {NORMALIZATION_MODES}, got {normalization!r}"
        )
    traces1 = _require_traces(eye, 1, 1)
    _require_traces(eye, 0, 1)
    m1 = eye.samples_matrix(1)
    m0 = eye.samples_matrix(0)
    if normalization == "signal-mean":
        if n1 is None:
            raise ValueError("normalization 'signal-mean' requires n1")
        level = m1[:, -1].mean()
        if level <= 0:
            raise ValueError("cannot normalize: mean bit-1 total is zero")
        scale = n1 / level
        m1 = m1 * scale
        m0 = m0 * scale
    elif normalization == "emission":
        # Rescale each bit-1 curve to the nominal release size so curves of
        # slots whose emission was adjusted (e.g. reduced to pre-compensate
        # interference) are compared on equal footing. Bit-0 curves carry no
        # emission and stay as observed. A zero-emission slot is left
        # unscaled: its curve is pure interference.
        if n1 is None:
            raise ValueError("normalization 'emission' requires n1")
        if any(t.emitted is None for t in traces1):
            raise ValueError(
                "normalization 'emission' requires the emitted count on "
                "every bit-1 trace"
            )
        scale = np.array(
            [n1 / t.emitted if t.emitted > 0 else 1.0 for t in traces1]
        )
        m1 = m1 * scale[:, None]
    return m1, m0


def max_eye_height(
    eye: EyeDiagram,
    opening_mode: str = "worst-case",
    normalization: str = "none",
    n1: Optional[int] = None,
) -> float:
    """Largest opening between the bit-1 and bit-0 curve families.

    opening_mode "worst-case" takes, at each sample time, the lowest bit-1
    curve minus the highest bit-0 curve; "mean-curve" uses the family means.
    The maximum over sample times is returned and may be negative for a
    closed eye. normalization "signal-mean" first rescales every curve so
    the mean end-of-slot bit-1 total equals ``n1``.
    """
    if opening_mode not in OPENING_MODES:
        raise ValueError(
            f"opening_mode must be one of {OPENING_MODES}, got {opening_mode!r}"
        )
    m1, m0 = _scaled_matrices(eye, normalization, n1)
    if opening_mode == "worst-case":
        opening = m1.min(axis=0) - m0.max(axis=0)
    else:
        opening = m1.mean(axis=0) - m0.mean(axis=0)
    return float(opening.max())


def _pair_integrals(eye: EyeDiagram, basis: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-trace slot integrals for both bit families.

    basis "curve-area" integrates each cumulative curve over the slot; the
    curves are constant within fine bins, so the left-Riemann sum (sum of
    samples times bin width) is exact. basis "slot-totals" treats each slot
    as sitting at its end-of-slot total for the whole slot, i.e. the
    integral is total × symbol duration.
    """
    if basis not in INTEGRAL_BASES:
        raise ValueError(f"basis must be one of {INTEGRAL_BASES}, got {basis!r}")
    m1, m0 = _scaled_matrices(eye, "none", None)
    if basis == "curve-area":
        s1 = m1.sum(axis=1) * eye.bin_width
        s0 = m0.sum(axis=1) * eye.bin_width
    else:
        s1 = m1[:, -1] * eye.symbol_duration
        s0 = m0[:, -1] * eye.symbol_duration
    return s1, s0


def integral_diffs(eye: EyeDiagram, basis: str = "curve-area") -> np.ndarray:
    """Matrix of pairwise integral differences between bit-1 and bit-0 slots."""
    s1, s0 = _pair_integrals(eye, basis)
    return s1[:, None] - s0[None, :]


def delta_moments(eye: EyeDiagram, basis: str = "curve-area") -> tuple[float, float]:
    """Mean and sample std of all pairwise integral differences.

    Computed from per-trace integrals without materializing the full
    pairwise matrix: with A_i, B_j the centered per-trace integrals,
    Σ_ij (Δ_ij − mean)² = N0·ΣA² + N1·ΣB².
    """
    s1, s0 = _pair_integrals(eye, basis)
    n1, n0 = len(s1), len(s0)
    if n1 * n0 < 2:
        raise DegenerateEye("need at least two bit-1/bit-0 curve pairs")
    if np.ptp(s1) == 0.0 and np.ptp(s0) == 0.0:
        # every pairwise difference is literally the same value; report an
        # exact zero spread (the centered sums below would only reproduce it
        # up to the rounding of the family means)
        return float(s1[0] - s0[0]), 0.0
    mean = s1.mean() - s0.mean()
    ss = n0 * np.sum((s1 - s1.mean()) ** 2) + n1 * np.sum((s0 - s0.mean()) ** 2)
    std = math.sqrt(ss / (n1 * n0 - 1))
    return float(mean), float(std)


def csnr(eye: EyeDiagram, basis: str = "curve-area") -> float:
    """Counting SNR: mean over std of the pairwise integral differences."""
    mean, std = delta_moments(eye, basis=basis)
    if std == 0.0:
        raise DegenerateEye("all pairwise integral differences are identical")
    return mean / std


@dataclass(frozen=True)
class EyeMetrics:
    """The three eye metrics plus the integral-difference moments."""

    std_bit0: float
    std_bit1: float
    max_eye_height: float
    csnr: float
    delta_mean: float
    delta_std: float


def eye_metrics(
    eye: EyeDiagram,
    n1: Optional[int] = None,
    std_mode: str = "totals",
    opening_mode: str = "worst-case",
    normalization: str = "none",
    csnr_basis: str = "curve-area",
) -> EyeMetrics:
    mean, std = delta_moments(eye, basis=csnr_basis)
    if std == 0.0:
        raise DegenerateEye("all pairwise integral differences are identical")
    return EyeMetrics(
        std_bit0=curve_std(eye, 0, mode=std_mode),
        std_bit1=curve_std(eye, 1, mode=std_mode),
        max_eye_height=max_eye_height(
            eye, opening_mode=opening_mode, normalization=normalization, n1=n1
        ),
        csnr=mean / std,
        delta_mean=mean,
        delta_std=std,
    )


def eye_to_csv(eye: EyeDiagram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot_index", "bit", "bin_index", "cumulative_count"])
        for t in eye.traces:
            for b, c in enumerate(t.samples):
                w.writerow([t.slot_index, t.bit, b, repr(float(c))])


def _thin(indices: int, keep: int) -> np.ndarray:
    if indices <= keep:
        return np.arange(indices)
    return np.unique(np.linspace(0, indices - 1, keep).round().astype(int))


def render_eye_svg(
    eye: EyeDiagram,
    path,
    max_traces_per_bit: int = 200,
    width: int = 800,
    height: int = 520,
) -> None:
    """Render the eye as a standalone SVG.

    Bit-1 curves are drawn in a dark stroke class, bit-0 curves in a light
    one. Trace families larger than ``max_traces_per_bit`` are thinned
    evenly and deterministically. Axes are seconds and molecule counts.
    """
    left, right, top, bottom = 64, 16, 16, 48
    plot_w = width - left - right
    plot_h = height - top - bottom
    m1 = eye.samples_matrix(1)
    m0 = eye.samples_matrix(0)
    families = []
    for cls, matrix in (("bit0", m0), ("bit1", m1)):
        if matrix.size:
            rows = matrix[_thin(matrix.shape[0], max_traces_per_bit)]
        else:
            rows = np.empty((0, 0))
        families.append((cls, rows))
    y_max = max(
        (float(rows.max()) for _, rows in families if rows.size),
        default=1.0,
    )
    y_max = max(y_max, 1.0)
    t_s = eye.symbol_duration

    def sx(t: float) -> float:
        return left + plot_w * t / t_s

    def sy(v: float) -> float:
        return top + plot_h * (1.0 - v / y_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<style>"
        "polyline{fill:none;stroke-width:1;opacity:0.45}"
        ".bit0{stroke:#85b8dc}.bit1{stroke:#123a63}"
        ".axis{stroke:#333;stroke-width:1}"
        "text{font-family:sans-serif;font-size:12px;fill:#333}"
        "</style>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line class="axis" x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
        f'y2="{top + plot_h}"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}"/>',
    ]
    for i in range(6):
        t = t_s * i / 5
        x = sx(t)
        parts.append(
            f'<line class="axis" x1="{x:.2f}" y1="{top + plot_h}" x2="{x:.2f}" '
            f'y2="{top + plot_h + 5}"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{top + plot_h + 20}" text-anchor="middle">'
            f"{t:.3g}</text>"
        )
        v = y_max * i / 5
        y = sy(v)
        parts.append(
            f'<line class="axis" x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.4g}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.2f}" y="{height - 8}" text-anchor="middle">'
        "time within slot (s)</text>"
    )
    parts.append(
        f'<text x="14" y="{top + plot_h / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + plot_h / 2:.2f})">received molecules</text>'
    )
    bw = eye.bin_width
    for cls, rows in families:
        for row in rows:
            pts = [f"{sx(0):.2f},{sy(0):.2f}"]
            pts += [
                f"{sx((b + 1) * bw):.2f},{sy(float(v)):.2f}" for b, v in enumerate(row)
            ]
            parts.append(f'<polyline class="{cls}" points="{" ".join(pts)}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
