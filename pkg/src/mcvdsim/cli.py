"""Command-line interface.

Subcommands:

* ``channel``   — estimate a channel profile and write it as CSV
* ``ber``       — bit-error-rate run (single point, or a sweep via --config)
* ``eye``       — eye diagram: traces CSV, SVG rendering, metrics CSV
* ``reproduce`` — re-run a named study: fig3, fig4, fig5, fig6, table3

Exit codes: 0 success, 2 invalid configuration, 3 runtime or I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import estimate_channel_profile
from .config import ENVIRONMENT_PRESETS, SCHEMES, EnvironmentConfig, ModulationConfig
from .runner import (
    REPRODUCE_TARGETS,
    ConfigError,
    ExperimentSpec,
    load_spec,
    profile_seed,
    reproduce,
    run_experiment,
    write_manifest,
)

_SCHEME_CHOICES = SCHEMES + ("both",)


def _add_environment_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("environment")
    group.add_argument(
        "--preset",
        choices=sorted(ENVIRONMENT_PRESETS),
        help="named environment (distance, diffusion, flow); flags override it",
    )
    group.add_argument("--d", type=float, help="transmitter-receiver distance (um)")
    group.add_argument("--diffusion", type=float, help="diffusion coefficient (um^2/s)")
    group.add_argument("--flow", type=float, help="flow velocity (um/s)")
    group.add_argument("--channel-radius", type=float, help="vessel radius (um)")
    group.add_argument("--receiver-radius", type=float, help="receiver disk radius (um)")
    group.add_argument("--dt", type=float, help="simulation time step (s)")


def _add_modulation_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("modulation")
    group.add_argument(
        "--scheme", choices=_SCHEME_CHOICES, help="modulation scheme(s) to evaluate"
    )
    group.add_argument("--n1", type=int, help="molecules per isolated bit-1")
    group.add_argument("--t-s", type=float, help="symbol (slot) duration (s)")
    group.add_argument("--m", type=int, help="interference memory in slots")
    group.add_argument(
        "--threshold", type=int, help="decision threshold; omit to derive it"
    )


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run")
    group.add_argument("--config", type=Path, help="JSON experiment config or manifest")
    group.add_argument("--seed", type=int, help="master seed (default 0)")
    group.add_argument("--out", type=Path, help="output directory")
    group.add_argument("--bits", type=int, help="bits per replication")
    group.add_argument("--reps", type=int, help="number of replications")
    group.add_argument("--workers", type=int, default=1, help="parallel workers")
    group.add_argument(
        "--n-samples", type=int, help="particles for channel profile estimation"
    )


def _environment_from_args(args) -> tuple:
    """(EnvironmentConfig, preset name or None) from CLI flags."""
    fields = {}
    if args.d is not None:
        fields["distance"] = args.d
    if args.diffusion is not None:
        fields["diffusion_coeff"] = args.diffusion
    if args.flow is not None:
        fields["flow_velocity"] = args.flow
    if args.channel_radius is not None:
        fields["channel_radius"] = args.channel_radius
    if args.receiver_radius is not None:
        fields["receiver_radius"] = args.receiver_radius
    if args.dt is not None:
        fields["time_step"] = args.dt
    try:
        if args.preset is not None:
            return EnvironmentConfig.from_preset(args.preset, **fields), args.preset
        return EnvironmentConfig(**fields), None
    except ValueError as exc:
        raise ConfigError(f"environment: {exc}") from None


def _schemes_from_args(args) -> tuple:
    if args.scheme is None or args.scheme == "both":
        return SCHEMES
    return (args.scheme,)


def _spec_from_args(args, outputs: tuple, default_reps: int) -> ExperimentSpec:
    """Build the experiment, starting from --config when given."""
    if args.config is not None:
        spec = load_spec(args.config)
        overrides = {}
        if args.preset is not None or args.d is not None or args.diffusion is not None \
                or args.flow is not None or args.channel_radius is not None \
                or args.receiver_radius is not None or args.dt is not None:
            env, preset = _environment_from_args(args)
            overrides["environment"] = env
            overrides["preset"] = preset
        mod_fields = {}
        if args.n1 is not None:
            mod_fields["n1"] = args.n1
        if args.t_s is not None:
            mod_fields["symbol_duration"] = args.t_s
        if args.m is not None:
            mod_fields["memory"] = args.m
        if args.threshold is not None:
            mod_fields["threshold"] = args.threshold
        if mod_fields:
            try:
                overrides["modulation"] = ModulationConfig(
                    **{**vars(spec.modulation), **mod_fields}
                )
            except ValueError as exc:
                raise ConfigError(f"modulation: {exc}") from None
        if args.scheme is not None:
            overrides["schemes"] = _schemes_from_args(args)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.bits is not None:
            overrides["n_bits"] = args.bits
        if args.reps is not None:
            overrides["n_reps"] = args.reps
        if args.n_samples is not None:
            overrides["profile_samples"] = args.n_samples
        return dataclasses.replace(spec, outputs=outputs, **overrides)
    env, preset = _environment_from_args(args)
    mod_fields = {"scheme": SCHEMES[0]}
    if args.n1 is not None:
        mod_fields["n1"] = args.n1
    if args.t_s is not None:
        mod_fields["symbol_duration"] = args.t_s
    if args.m is not None:
        mod_fields["memory"] = args.m
    if args.threshold is not None:
        mod_fields["threshold"] = args.threshold
    try:
        mod = ModulationConfig(**mod_fields)
    except ValueError as exc:
        raise ConfigError(f"modulation: {exc}") from None
    kwargs = dict(
        environment=env,
        modulation=mod,
        schemes=_schemes_from_args(args),
        outputs=outputs,
        preset=preset,
        n_bits=args.bits if args.bits is not None else 100,
        n_reps=args.reps if args.reps is not None else default_reps,
        seed=args.seed if args.seed is not None else 0,
    )
    if args.n_samples is not None:
        kwargs["profile_samples"] = args.n_samples
    return ExperimentSpec(**kwargs)


def _cmd_channel(args) -> int:
    env, preset = _environment_from_args(args)
    t_s = args.t_s if args.t_s is not None else 0.5
    m = args.m if args.m is not None else 5
    n_samples = args.n_samples if args.n_samples is not None else 100_000
    seed = args.seed if args.seed is not None else 0
    out = args.out if args.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(profile_seed(seed, env, t_s, m, n_samples))
    profile = estimate_channel_profile(env, t_s, m, n_samples, rng=rng)
    path = out / "profile.csv"
    profile.to_csv(path)
    spec = ExperimentSpec(
        environment=env,
        modulation=ModulationConfig(symbol_duration=t_s, memory=m),
        schemes=SCHEMES,
        outputs=("ber_csv",),
        seed=seed,
        profile_samples=n_samples,
        preset=preset,
        label="channel",
    )
    write_manifest(spec, out / "manifest.json")
    print(f"wrote {path}")
    for i, p in enumerate(profile.slot_fractions):
        print(f"p_{i} = {p:.6f}")
    print(f"absorbed {profile.absorbed} of {profile.samples} within {m + 1} slots")
    return 0


def _cmd_ber(args) -> int:
    spec = _spec_from_args(args, outputs=("ber_csv",), default_reps=10)
    out = args.out if args.out is not None else Path(".")
    artifacts = run_experiment(spec, out, workers=args.workers)
    print(f"wrote {artifacts['ber.csv']}")
    with open(artifacts["ber.csv"]) as fh:
        for line in fh:
            print(line.rstrip())
    return 0


def _cmd_eye(args) -> int:
    spec = _spec_from_args(
        args, outputs=("metrics_csv", "eye_csv", "eye_svg"), default_reps=10
    )
    out = args.out if args.out is not None else Path(".")
    artifacts = run_experiment(spec, out, workers=args.workers)
    for name in sorted(artifacts):
        print(f"wrote {artifacts[name]}")
    return 0


def _cmd_reproduce(args) -> int:
    out = args.out if args.out is not None else Path("runs") / args.target
    artifacts = reproduce(
        args.target,
        out,
        seed=args.seed if args.seed is not None else 42,
        fidelity=args.fidelity,
        n_reps=args.reps,
        n_bits=args.bits,
        time_step=args.dt,
        profile_samples=args.n_samples,
        workers=args.workers,
    )
    for name in sorted(artifacts):
        print(f"wrote {artifacts[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcvdsim",
        description=(
            "Monte Carlo simulator and signal-quality toolkit for molecular "
            "communication through a flowing cylindrical vessel"
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_channel = sub.add_parser("channel", help="estimate a channel profile")
    _add_environment_flags(p_channel)
    p_channel.add_argument("--t-s", type=float, help="symbol (slot) duration (s)")
    p_channel.add_argument("--m", type=int, help="interference memory in slots")
    p_channel.add_argument("--n-samples", type=int, help="particles to release")
    p_channel.add_argument("--seed", type=int, help="master seed (default 0)")
    p_channel.add_argument("--out", type=Path, help="output directory")
    p_channel.set_defaults(func=_cmd_channel)

    p_ber = sub.add_parser("ber", help="bit-error-rate run")
    _add_environment_flags(p_ber)
    _add_modulation_flags(p_ber)
    _add_run_flags(p_ber)
    p_ber.set_defaults(func=_cmd_ber)

    p_eye = sub.add_parser("eye", help="eye diagram, metrics, and SVG")
    _add_environment_flags(p_eye)
    _add_modulation_flags(p_eye)
    _add_run_flags(p_eye)
    p_eye.set_defaults(func=_cmd_eye)

    p_rep = sub.add_parser("reproduce", help="re-run a named study")
    p_rep.add_argument("target", choices=REPRODUCE_TARGETS)
    p_rep.add_argument("--seed", type=int, help="master seed (default 42)")
    p_rep.add_argument("--out", type=Path, help="output directory (default runs/<target>)")
    p_rep.add_argument(
        "--fidelity",
        choices=("desk", "table1"),
        default="desk",
        help="desk: 1e-4 s time step; table1: the original 0.1 us step",
    )
    p_rep.add_argument("--reps", type=int, help="override replications per point")
    p_rep.add_argument("--bits", type=int, help="override bits per replication")
    p_rep.add_argument("--dt", type=float, help="override the time step (s)")
    p_rep.add_argument(
        "--n-samples", type=int, help="particles for channel profile estimation"
    )
    p_rep.add_argument("--workers", type=int, default=1, help="parallel workers")
    p_rep.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
