"""Experiment orchestration: sweeps, replication, artifact files, the CLI core.

One experiment = a base environment and modulation setup, an optional sweep
axis, and a replication count. Each sweep point is characterized once (the
channel profile is cached by content), then replicated with independent
derived seeds; replications draw a fresh random bit sequence, release the
scheduled molecules, and fold arrivals into per-slot counts and eye traces.

When several schemes are requested they share each replication's particle
pool: the emission schedule actually simulated is the elementwise maximum
over the schemes' schedules, and a scheme that emits fewer molecules in a
slot keeps only the first ones of that emission. Molecules of one emission
are exchangeable, so each scheme sees exactly the statistics it would see
alone, while the shared randomness couples the schemes for low-variance
comparisons.

Seed derivation (recorded in every manifest): profile estimation uses
``SeedSequence(master, spawn_key=(0, h64(profile key)))``; replication ``r``
of a sweep point uses ``SeedSequence(master, spawn_key=(1, h64(point key),
r))`` where ``h64`` is an 8-byte BLAKE2b digest of a canonical parameter
string. Results therefore depend only on the master seed and the parameters,
never on execution order, batching, or worker count.
"""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import __version__
from .ber import semi_analytical_ber
from .channel import MIN_SAMPLES, ChannelProfile, estimate_channel_profile, steps_per_slot
from .config import ENVIRONMENT_PRESETS, SCHEMES, EnvironmentConfig, ModulationConfig
from .eye import (
    INTEGRAL_BASES,
    NORMALIZATION_MODES,
    OPENING_MODES,
    STD_MODES,
    DegenerateEye,
    EyeDiagram,
    SlotTrace,
    eye_metrics,
    eye_to_csv,
    render_eye_svg,
)
from .kernels import ACTIVE_BACKEND, simulate_hit_steps
from .modulation import encode, resolve_threshold

OUTPUT_KINDS = ("ber_csv", "metrics_csv", "eye_csv", "eye_svg")
AGGREGATION_MODES = ("pooled", "rep-mean")

#: Parameter ranges spanned by the published studies; sweeping outside them
#: requires an explicit opt-in so accidental unit mistakes fail loudly.
STUDIED_RANGES = {
    "distance": (4.0, 6.0),
    "diffusion_coeff": (50.0, 150.0),
    "flow_velocity": (0.0, 5.0),
    "n1": (50, 300),
    "symbol_duration": (0.4, 0.5),
}
SWEEPABLE_PARAMETERS = ("preset",) + tuple(STUDIED_RANGES)

BER_CSV_COLUMNS = (
    "scheme", "d", "D", "v_f", "n1", "t_s", "lambda", "m",
    "ber_sim", "ber_semi", "bits_tested",
)
METRICS_CSV_COLUMNS = (
    "label", "scheme", "d", "D", "v_f", "n1", "t_s", "m", "lambda",
    "aggregation", "std_mode", "opening_mode", "normalization", "csnr_basis",
    "std_bit0", "std_bit1", "max_eye_height", "csnr", "csnr_se",
    "delta_mean", "delta_std", "traces_bit0", "traces_bit1",
    "n_reps", "n_bits",
)

MANIFEST_FORMAT = "mcvdsim-experiment-v1"
SEED_SCHEME_NOTE = (
    "independent streams are derived from the master seed via SeedSequence "
    "spawn keys: channel profiles use (0, blake2b-64(profile parameters)); "
    "replication r of a sweep point uses (1, blake2b-64(point parameters), r); "
    "every replication redraws its random bit sequence"
)


class ConfigError(ValueError):
    """Invalid experiment configuration, reported with a field path."""


class SweepAxis(NamedTuple):
    """One swept parameter and the values it takes, in sweep order."""

    parameter: str
    values: tuple


def _h64(text: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big"
    )


def _env_key(env: EnvironmentConfig) -> str:
    return "|".join(
        repr(float(x))
        for x in (
            env.channel_radius,
            env.receiver_radius,
            env.distance,
            env.diffusion_coeff,
            env.flow_velocity,
            env.time_step,
        )
    )


def profile_seed(
    master_seed: int, env: EnvironmentConfig, t_s: float, m: int, n_samples: int
) -> np.random.SeedSequence:
    key = f"profile|{_env_key(env)}|{float(t_s)!r}|{int(m)}|{int(n_samples)}"
    return np.random.SeedSequence(master_seed, spawn_key=(0, _h64(key)))


def replication_seed(
    master_seed: int, point_key: str, rep_index: int
) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        master_seed, spawn_key=(1, _h64(point_key), rep_index)
    )


def _point_key(env: EnvironmentConfig, mod: ModulationConfig) -> str:
    return (
        f"point|{_env_key(env)}|{float(mod.symbol_duration)!r}"
        f"|{mod.n1}|{mod.memory}"
    )


class ProfileCache:
    """Content-keyed cache of estimated channel profiles.

    The estimation seed is derived from the profile's own parameters, so a
    cache hit returns exactly what a fresh estimation would produce.
    """

    def __init__(self) -> None:
        self._store: dict = {}

    def get(
        self,
        master_seed: int,
        env: EnvironmentConfig,
        t_s: float,
        m: int,
        n_samples: int,
    ) -> ChannelProfile:
        key = (master_seed, _env_key(env), repr(float(t_s)), int(m), int(n_samples))
        if key not in self._store:
            rng = np.random.default_rng(profile_seed(master_seed, env, t_s, m, n_samples))
            self._store[key] = estimate_channel_profile(env, t_s, m, n_samples, rng=rng)
        return self._store[key]


# ---------------------------------------------------------------------------
# Experiment specification


def _validate_sweep(sweep: SweepAxis, allow_out_of_range: bool) -> SweepAxis:
    if sweep.parameter not in SWEEPABLE_PARAMETERS:
        raise ConfigError(
            f"sweep.parameter: {sweep.parameter!r} is not sweepable; "
            f"expected one of {SWEEPABLE_PARAMETERS}"
        )
    values = tuple(sweep.values)
    if not values:
        raise ConfigError("sweep.values: must be non-empty")
    if len(set(values)) != len(values):
        raise ConfigError("sweep.values: values must be unique")
    if sweep.parameter == "preset":
        for i, v in enumerate(values):
            if v not in ENVIRONMENT_PRESETS:
                raise ConfigError(
                    f"sweep.values[{i}]: unknown preset {v!r}; "
                    f"expected one of {sorted(ENVIRONMENT_PRESETS)}"
                )
        return SweepAxis("preset", values)
    lo, hi = STUDIED_RANGES[sweep.parameter]
    checked = []
    for i, v in enumerate(values):
        try:
            x = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"sweep.values[{i}]: {v!r} is not a number") from None
        if not math.isfinite(x):
            raise ConfigError(f"sweep.values[{i}]: must be finite, got {v!r}")
        if sweep.parameter == "n1":
            if x != int(x) or int(x) < 1:
                raise ConfigError(
                    f"sweep.values[{i}]: n1 must be a positive integer, got {v!r}"
                )
            x = int(x)
        if not (lo <= x <= hi) and not allow_out_of_range:
            raise ConfigError(
                f"sweep.values[{i}]: {x!r} is outside the studied "
                f"{sweep.parameter} range [{lo}, {hi}]; set "
                "allow_out_of_range to sweep it anyway"
            )
        checked.append(x)
    return SweepAxis(sweep.parameter, tuple(checked))


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete, reproducible description of one experiment.

    ``schemes`` lists the modulation schemes evaluated on the shared
    replication particle pool. ``fixed_bits``, when given, replaces the
    per-replication random bit sequence (its length must equal ``n_bits``).
    ``preset`` records the environment preset name when one was used; the
    expanded values in ``environment`` are authoritative.
    """

    environment: EnvironmentConfig
    modulation: ModulationConfig
    schemes: tuple = SCHEMES
    sweep: Optional[SweepAxis] = None
    n_bits: int = 100
    n_reps: int = 1
    outputs: tuple = ("ber_csv",)
    seed: int = 0
    profile_samples: int = 100_000
    eye_bins: int = 100
    fixed_bits: Optional[tuple] = None
    label: str = "experiment"
    allow_out_of_range: bool = False
    preset: Optional[str] = None

    def __post_init__(self) -> None:
        schemes = tuple(self.schemes)
        if not schemes or len(set(schemes)) != len(schemes):
            raise ConfigError("schemes: must be a non-empty list without duplicates")
        for s in schemes:
            if s not in SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {s!r}; expected {SCHEMES}")
        object.__setattr__(self, "schemes", schemes)
        outputs = tuple(sorted(set(self.outputs)))
        if not outputs:
            raise ConfigError("outputs: must request at least one artifact")
        for o in outputs:
            if o not in OUTPUT_KINDS:
                raise ConfigError(f"outputs: unknown kind {o!r}; expected {OUTPUT_KINDS}")
        object.__setattr__(self, "outputs", outputs)
        if self.n_bits < 1:
            raise ConfigError("n_bits: must be >= 1")
        if self.n_reps < 1:
            raise ConfigError("n_reps: must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed: must be a non-negative integer")
        if self.profile_samples < MIN_SAMPLES:
            raise ConfigError(f"profile_samples: must be >= {MIN_SAMPLES}")
        if self.eye_bins < 2:
            raise ConfigError("eye_bins: must be >= 2")
        if self.fixed_bits is not None:
            bits = tuple(int(b) for b in self.fixed_bits)
            if len(bits) != self.n_bits:
                raise ConfigError("fixed_bits: length must equal n_bits")
            if any(b not in (0, 1) for b in bits):
                raise ConfigError("fixed_bits: entries must be 0 or 1")
            object.__setattr__(self, "fixed_bits", bits)
        if self.sweep is not None:
            object.__setattr__(
                self, "sweep", _validate_sweep(SweepAxis(*self.sweep), self.allow_out_of_range)
            )
        if self.preset is not None and self.preset not in ENVIRONMENT_PRESETS:
            raise ConfigError(
                f"preset: unknown preset {self.preset!r}; "
                f"expected one of {sorted(ENVIRONMENT_PRESETS)}"
            )

    def to_dict(self) -> dict:
        return {
            "environment": dataclasses.asdict(self.environment),
            "modulation": dataclasses.asdict(self.modulation),
            "schemes": list(self.schemes),
            "sweep": None
            if self.sweep is None
            else {"parameter": self.sweep.parameter, "values": list(self.sweep.values)},
            "n_bits": self.n_bits,
            "n_reps": self.n_reps,
            "outputs": list(self.outputs),
            "seed": self.seed,
            "profile_samples": self.profile_samples,
            "eye_bins": self.eye_bins,
            "fixed_bits": None
            if self.fixed_bits is None
            else "".join(str(b) for b in self.fixed_bits),
            "label": self.label,
            "allow_out_of_range": self.allow_out_of_range,
            "preset": self.preset,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("spec: expected a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"spec: unknown field(s) {sorted(unknown)}")
        kwargs = dict(data)
        env = kwargs.get("environment")
        if isinstance(env, str):
            kwargs.setdefault("preset", env)
            try:
                kwargs["environment"] = EnvironmentConfig.from_preset(env)
            except ValueError as exc:
                raise ConfigError(f"environment: {exc}") from None
        elif isinstance(env, dict):
            try:
                kwargs["environment"] = EnvironmentConfig(**env)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"environment: {exc}") from None
        elif not isinstance(env, EnvironmentConfig):
            raise ConfigError("environment: expected a preset name or a mapping")
        mod = kwargs.get("modulation", {})
        if isinstance(mod, dict):
            try:
                kwargs["modulation"] = ModulationConfig(**mod)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"modulation: {exc}") from None
        sweep = kwargs.get("sweep")
        if isinstance(sweep, dict):
            try:
                kwargs["sweep"] = SweepAxis(sweep["parameter"], tuple(sweep["values"]))
            except KeyError as exc:
                raise ConfigError(f"sweep: missing key {exc}") from None
        if isinstance(kwargs.get("fixed_bits"), str):
            kwargs["fixed_bits"] = tuple(int(c) for c in kwargs["fixed_bits"])
        for key in ("schemes", "outputs"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"spec: {exc}") from None


def write_manifest(spec: ExperimentSpec, path) -> None:
    payload = {
        "format": MANIFEST_FORMAT,
        "package_version": __version__,
        "active_backend": ACTIVE_BACKEND,
        "seed_scheme": SEED_SCHEME_NOTE,
        "bit_sequences": "fixed" if spec.fixed_bits is not None else
        "redrawn uniformly at random each replication",
        "spec": spec.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spec(path) -> ExperimentSpec:
    """Load an ExperimentSpec from a config file or a run manifest."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and "spec" in data:
        data = data["spec"]
    return ExperimentSpec.from_dict(data)


# ---------------------------------------------------------------------------
# Sweep expansion


def _apply_sweep_value(
    env: EnvironmentConfig, mod: ModulationConfig, parameter: str, value
) -> tuple:
    if parameter == "preset":
        d, diff, v = ENVIRONMENT_PRESETS[value]
        return (
            replace(env, distance=d, diffusion_coeff=diff, flow_velocity=v),
            mod,
        )
    if parameter in ("distance", "diffusion_coeff", "flow_velocity"):
        return replace(env, **{parameter: float(value)}), mod
    if parameter == "n1":
        return env, replace(mod, n1=int(value))
    if parameter == "symbol_duration":
        return env, replace(mod, symbol_duration=float(value))
    raise ConfigError(f"sweep.parameter: {parameter!r} is not sweepable")


def sweep_points(spec: ExperimentSpec) -> list:
    """Expand the sweep into (label, environment, modulation) points."""
    if spec.sweep is None:
        return [(spec.preset or "base", spec.environment, spec.modulation)]
    points = []
    for value in spec.sweep.values:
        env, mod = _apply_sweep_value(
            spec.environment, spec.modulation, spec.sweep.parameter, value
        )
        if spec.sweep.parameter == "preset":
            label = str(value)
        else:
            label = f"{spec.sweep.parameter}-{value:g}"
        points.append((label, env, mod))
    return points


# ---------------------------------------------------------------------------
# Replication


@dataclass(frozen=True)
class _RepTask:
    """Picklable description of one sweep point's per-replication work."""

    env: EnvironmentConfig
    profile: ChannelProfile
    schemes: tuple
    configs: tuple  # one ModulationConfig per scheme, threshold resolved
    thresholds: tuple
    n_bits: int
    eye_bins: int
    fixed_bits: Optional[tuple]
    collect_traces: bool


class RepOutcome(NamedTuple):
    """One replication's bit sequence and per-scheme results."""

    bits: np.ndarray
    errors: tuple  # per scheme
    trace_matrices: tuple  # per scheme: (n_bits, eye_bins) cumulative counts or None
    emissions: tuple  # per scheme: (n_bits,) molecules released per slot


def _run_replication(task: _RepTask, seed: np.random.SeedSequence) -> RepOutcome:
    rng = np.random.default_rng(seed)
    if task.fixed_bits is not None:
        bits = np.asarray(task.fixed_bits, dtype=np.int64)
    else:
        bits = rng.integers(0, 2, size=task.n_bits).astype(np.int64)
    bit_tuple = tuple(int(b) for b in bits)
    schedules = [
        np.asarray(encode(bit_tuple, cfg, task.profile).counts, dtype=np.int64)
        for cfg in task.configs
    ]
    driver = np.maximum.reduce(schedules)
    t_s = task.configs[0].symbol_duration
    sps = steps_per_slot(t_s, task.env.time_step)
    if sps % task.eye_bins != 0:
        raise ConfigError(
            f"eye_bins: {task.eye_bins} must divide the {sps} steps per slot"
        )
    horizon = (task.profile.isi_window + 1) * sps
    total = int(driver.sum())
    if total:
        emit = np.repeat(np.arange(task.n_bits, dtype=np.int64), driver)
        starts = np.concatenate(([0], np.cumsum(driver)[:-1]))
        within = np.arange(total, dtype=np.int64) - np.repeat(starts, driver)
        hit = simulate_hit_steps(task.env, total, horizon, rng)
        absorbed = hit > 0
    bins = task.eye_bins
    errors = []
    matrices = []
    for counts_s, lam in zip(schedules, task.thresholds):
        if total:
            sel = absorbed & (within < counts_s[emit])
            abs_step = emit[sel] * sps + hit[sel]
            g = (abs_step - 1) * bins // sps
            g = g[g < task.n_bits * bins]
            mat = (
                np.bincount(g, minlength=task.n_bits * bins)
                .reshape(task.n_bits, bins)
                .cumsum(axis=1)
            )
        else:
            mat = np.zeros((task.n_bits, bins), dtype=np.int64)
        decoded = (mat[:, -1] >= lam).astype(np.int64)
        errors.append(int(np.count_nonzero(decoded != bits)))
        matrices.append(mat if task.collect_traces else None)
    return RepOutcome(
        bits=bits,
        errors=tuple(errors),
        trace_matrices=tuple(matrices),
        emissions=tuple(schedules),
    )


def replicate_and_aggregate(
    spec: ExperimentSpec,
    unit_work: Callable,
    *,
    point_key: str = "",
    n_reps: Optional[int] = None,
    rep_start: int = 0,
    workers: int = 1,
    combine: Optional[Callable] = None,
) -> list:
    """Run ``unit_work`` once per replication with derived independent seeds.

    ``unit_work(seed_sequence)`` must be deterministic given its seed (and
    picklable when ``workers > 1``). Results are returned ordered by
    replication index, so any fold over them is independent of completion
    order and the aggregate is identical for serial and parallel execution.
    ``rep_start`` offsets the replication indices, letting a run be split
    into batches that reproduce the unsplit seed schedule exactly.
    """
    reps = spec.n_reps if n_reps is None else n_reps
    if reps < 1:
        raise ConfigError("n_reps: must be >= 1")
    seeds = [replication_seed(spec.seed, point_key, rep_start + i) for i in range(reps)]
    results = [None] * reps
    if workers <= 1:
        for i, seed in enumerate(seeds):
            try:
                results[i] = unit_work(seed)
            except Exception as exc:
                raise RuntimeError(f"replication {rep_start + i} failed: {exc}") from exc
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(i, pool.submit(unit_work, seed)) for i, seed in enumerate(seeds)]
            for i, future in futures:
                try:
                    results[i] = future.result()
                except Exception as exc:
                    raise RuntimeError(
                        f"replication {rep_start + i} failed: {exc}"
                    ) from exc
    return combine(results) if combine is not None else results


# ---------------------------------------------------------------------------
# Metrics aggregation


def _eye_from_outcomes(
    outcomes: Sequence[RepOutcome], scheme_index: int, t_s: float, bins: int
) -> EyeDiagram:
    traces = []
    base = 0
    for outcome in outcomes:
        mat = outcome.trace_matrices[scheme_index]
        emitted = outcome.emissions[scheme_index]
        for k, bit in enumerate(outcome.bits):
            traces.append(
                SlotTrace(
                    slot_index=base + k,
                    bit=int(bit),
                    samples=mat[k],
                    emitted=int(emitted[k]),
                )
            )
        base += len(outcome.bits)
    return EyeDiagram(traces=traces, symbol_duration=t_s, bin_width=t_s / bins)


_NAN_METRICS = {
    "std_bit0": float("nan"),
    "std_bit1": float("nan"),
    "max_eye_height": float("nan"),
    "csnr": float("nan"),
    "delta_mean": float("nan"),
    "delta_std": float("nan"),
}


def _metrics_or_nan(eye, n1, std_mode, opening_mode, normalization, csnr_basis) -> dict:
    try:
        m = eye_metrics(
            eye,
            n1=n1,
            std_mode=std_mode,
            opening_mode=opening_mode,
            normalization=normalization,
            csnr_basis=csnr_basis,
        )
    except (DegenerateEye, ValueError):
        return dict(_NAN_METRICS)
    return {
        "std_bit0": m.std_bit0,
        "std_bit1": m.std_bit1,
        "max_eye_height": m.max_eye_height,
        "csnr": m.csnr,
        "delta_mean": m.delta_mean,
        "delta_std": m.delta_std,
    }


def point_metric_rows(
    outcomes: Sequence[RepOutcome],
    scheme_index: int,
    t_s: float,
    bins: int,
    n1: int,
) -> list:
    """All aggregation/mode combinations of the eye metrics for one point.

    Rows cover aggregation {pooled, rep-mean} × std {totals, pooled} ×
    opening {worst-case, mean-curve} × normalization {none, signal-mean,
    emission} × integral basis {curve-area, slot-totals}, in that nesting
    order. "pooled" builds one eye from every replication's traces;
    "rep-mean" averages per-replication metrics and reports the standard
    error of the per-replication CSNR. Combinations a trace family is too
    small for are reported as nan.
    """
    pooled_eye = _eye_from_outcomes(outcomes, scheme_index, t_s, bins)
    rep_eyes = [
        _eye_from_outcomes([outcome], scheme_index, t_s, bins) for outcome in outcomes
    ]
    n0_traces = sum(int(np.count_nonzero(o.bits == 0)) for o in outcomes)
    n1_traces = sum(int(np.count_nonzero(o.bits == 1)) for o in outcomes)
    rows = []
    for aggregation in AGGREGATION_MODES:
        for std_mode in STD_MODES:
            for opening_mode in OPENING_MODES:
                for normalization in NORMALIZATION_MODES:
                    for basis in INTEGRAL_BASES:
                        if aggregation == "pooled":
                            values = _metrics_or_nan(
                                pooled_eye, n1, std_mode, opening_mode,
                                normalization, basis,
                            )
                            csnr_se = float("nan")
                        else:
                            per_rep = [
                                _metrics_or_nan(
                                    eye, n1, std_mode, opening_mode,
                                    normalization, basis,
                                )
                                for eye in rep_eyes
                            ]
                            values = {
                                key: float(np.mean([r[key] for r in per_rep]))
                                for key in _NAN_METRICS
                            }
                            csnrs = [r["csnr"] for r in per_rep]
                            if len(csnrs) >= 2 and not any(
                                math.isnan(c) for c in csnrs
                            ):
                                csnr_se = float(
                                    np.std(csnrs, ddof=1) / math.sqrt(len(csnrs))
                                )
                            else:
                                csnr_se = float("nan")
                        rows.append(
                            {
                                "aggregation": aggregation,
                                "std_mode": std_mode,
                                "opening_mode": opening_mode,
                                "normalization": normalization,
                                "csnr_basis": basis,
                                "csnr_se": csnr_se,
                                "traces_bit0": n0_traces,
                                "traces_bit1": n1_traces,
                                **values,
                            }
                        )
    return rows


# ---------------------------------------------------------------------------
# Experiment execution


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def run_experiment(spec: ExperimentSpec, out_dir=".", workers: int = 1) -> dict:
    """Execute the experiment and write its artifact files.

    Returns a mapping from artifact name to written path. ``manifest.json``
    always accompanies the requested outputs; re-running from it reproduces
    every artifact byte for byte (worker count never affects results).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = ProfileCache()
    collect_traces = bool(
        {"metrics_csv", "eye_csv", "eye_svg"} & set(spec.outputs)
    )
    ber_rows = []
    metric_rows = []
    artifacts = {}
    for label, env, mod in sweep_points(spec):
        profile = cache.get(
            spec.seed, env, mod.symbol_duration, mod.memory, spec.profile_samples
        )
        configs = []
        thresholds = []
        for scheme in spec.schemes:
            cfg = replace(mod, scheme=scheme)
            lam = resolve_threshold(cfg, profile)
            configs.append(replace(cfg, threshold=lam))
            thresholds.append(lam)
        task = _RepTask(
            env=env,
            profile=profile,
            schemes=spec.schemes,
            configs=tuple(configs),
            thresholds=tuple(thresholds),
            n_bits=spec.n_bits,
            eye_bins=spec.eye_bins,
            fixed_bits=spec.fixed_bits,
            collect_traces=collect_traces,
        )
        outcomes = replicate_and_aggregate(
            spec,
            functools.partial(_run_replication, task),
            point_key=_point_key(env, mod),
            workers=workers,
        )
        bits_tested = spec.n_bits * spec.n_reps
        for si, scheme in enumerate(spec.schemes):
            cfg = configs[si]
            total_errors = sum(o.errors[si] for o in outcomes)
            base_row = {
                "scheme": scheme,
                "d": env.distance,
                "D": env.diffusion_coeff,
                "v_f": env.flow_velocity,
                "n1": cfg.n1,
                "t_s": cfg.symbol_duration,
                "lambda": thresholds[si],
                "m": cfg.memory,
            }
            if "ber_csv" in spec.outputs:
                ber_rows.append(
                    {
                        **base_row,
                        "ber_sim": total_errors / bits_tested,
                        "ber_semi": semi_analytical_ber(cfg, profile),
                        "bits_tested": bits_tested,
                    }
                )
            if "metrics_csv" in spec.outputs:
                for mode_row in point_metric_rows(
                    outcomes, si, cfg.symbol_duration, spec.eye_bins, cfg.n1
                ):
                    metric_rows.append(
                        {
                            "label": label,
                            **base_row,
                            "n_reps": spec.n_reps,
                            "n_bits": spec.n_bits,
                            **mode_row,
                        }
                    )
            if {"eye_csv", "eye_svg"} & set(spec.outputs):
                eye = _eye_from_outcomes(
                    outcomes, si, cfg.symbol_duration, spec.eye_bins
                )
                stem = f"eye_{label}_{scheme}"
                if "eye_csv" in spec.outputs:
                    path = out / f"{stem}.csv"
                    eye_to_csv(eye, path)
                    artifacts[f"{stem}.csv"] = path
                if "eye_svg" in spec.outputs:
                    path = out / f"{stem}.svg"
                    render_eye_svg(eye, path)
                    artifacts[f"{stem}.svg"] = path
    if "ber_csv" in spec.outputs:
        path = out / "ber.csv"
        _write_csv(path, BER_CSV_COLUMNS, ber_rows)
        artifacts["ber.csv"] = path
    if "metrics_csv" in spec.outputs:
        path = out / "metrics.csv"
        _write_csv(path, METRICS_CSV_COLUMNS, metric_rows)
        artifacts["metrics.csv"] = path
    manifest_path = out / "manifest.json"
    write_manifest(spec, manifest_path)
    artifacts["manifest.json"] = manifest_path
    return artifacts


# ---------------------------------------------------------------------------
# Named study reproduction


REPRODUCE_TARGETS = ("fig3", "fig4", "fig5", "fig6", "table3")

_FLOW_GRID = tuple(v / 2 for v in range(11))  # 0.0, 0.5, ..., 5.0
_N1_GRID = tuple(range(50, 301, 50))


def _study_specs(target: str, dt: float, seed: int) -> list:
    """(subdir, spec) pairs for one named figure/table study."""
    mod = ModulationConfig(scheme="bcsk", n1=300, symbol_duration=0.4, memory=5)
    base = EnvironmentConfig(distance=6.0, flow_velocity=0.0, time_step=dt)
    if target == "table3":
        return [
            (
                ".",
                ExperimentSpec(
                    environment=EnvironmentConfig.from_preset("good", time_step=dt),
                    modulation=replace(mod, symbol_duration=0.5),
                    schemes=SCHEMES,
                    sweep=SweepAxis("preset", ("good", "moderate", "harsh")),
                    n_bits=100,
                    n_reps=250,
                    outputs=("metrics_csv", "eye_svg"),
                    seed=seed,
                    label="table3",
                ),
            )
        ]
    if target == "fig3":
        diffusions = (50.0, 150.0)
        sweep = SweepAxis("flow_velocity", _FLOW_GRID)
        outputs = ("ber_csv",)
    elif target == "fig4":
        diffusions = (50.0, 100.0, 150.0)
        sweep = SweepAxis("n1", _N1_GRID)
        outputs = ("ber_csv",)
    elif target in ("fig5", "fig6"):
        diffusions = (50.0, 100.0, 150.0)
        sweep = SweepAxis("flow_velocity", _FLOW_GRID)
        outputs = ("ber_csv", "metrics_csv")
    else:
        raise ConfigError(
            f"target: unknown study {target!r}; expected one of {REPRODUCE_TARGETS}"
        )
    specs = []
    for diff in diffusions:
        specs.append(
            (
                f"D{diff:g}",
                ExperimentSpec(
                    environment=replace(base, diffusion_coeff=diff),
                    modulation=mod,
                    schemes=SCHEMES,
                    sweep=sweep,
                    n_bits=100,
                    n_reps=25,
                    outputs=outputs,
                    seed=seed,
                    label=f"{target}-D{diff:g}",
                ),
            )
        )
    return specs


def reproduce(
    target: str,
    out_dir,
    *,
    seed: int = 42,
    fidelity: str = "desk",
    n_reps: Optional[int] = None,
    n_bits: Optional[int] = None,
    time_step: Optional[float] = None,
    profile_samples: Optional[int] = None,
    workers: int = 1,
) -> dict:
    """Re-run a named figure/table study and write its artifacts.

    ``fidelity`` "desk" uses a 1e-4 s time step; "table1" restores the
    0.1 µs step of the original study parameters (orders of magnitude
    slower). Explicit ``time_step``/``n_reps``/``n_bits`` override either.
    """
    if fidelity not in ("desk", "table1"):
        raise ConfigError(f"fidelity: expected 'desk' or 'table1', got {fidelity!r}")
    dt = time_step if time_step is not None else (1e-7 if fidelity == "table1" else 1e-4)
    out = Path(out_dir)
    artifacts = {}
    for subdir, spec in _study_specs(target, dt, seed):
        overrides = {}
        if n_reps is not None:
            overrides["n_reps"] = n_reps
        if n_bits is not None:
            overrides["n_bits"] = n_bits
        if profile_samples is not None:
            overrides["profile_samples"] = profile_samples
        if overrides:
            spec = replace(spec, **overrides)
        sub_out = out if subdir == "." else out / subdir
        for name, path in run_experiment(spec, sub_out, workers=workers).items():
            key = name if subdir == "." else f"{subdir}/{name}"
            artifacts[key] = path
    return artifacts


__all__ = [
    "AGGREGATION_MODES",
    "BER_CSV_COLUMNS",
    "ConfigError",
    "ExperimentSpec",
    "METRICS_CSV_COLUMNS",
    "OUTPUT_KINDS",
    "ProfileCache",
    "REPRODUCE_TARGETS",
    "STUDIED_RANGES",
    "SweepAxis",
    "load_spec",
    "point_metric_rows",
    "profile_seed",
    "replicate_and_aggregate",
    "replication_seed",
    "reproduce",
    "run_experiment",
    "sweep_points",
    "write_manifest",
]
