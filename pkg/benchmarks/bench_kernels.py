"""Benchmark the compiled particle-stepping kernel against the NumPy one.

Both backends are run on the same workloads with identical seeds; besides
timing, the script asserts that the hit-step arrays agree bit for bit.

Usage: python3 benchmarks/bench_kernels.py [--particles N] [--steps N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mcvdsim.config import EnvironmentConfig
from mcvdsim.kernels import available_backends, simulate_hit_steps

WORKLOADS = (
    (
        "axial (receiver spans the cross-section)",
        EnvironmentConfig(
            distance=6.0, diffusion_coeff=100.0, flow_velocity=1.0, time_step=1e-4
        ),
    ),
    (
        "full 3-D (narrow receiver, wall reflections)",
        EnvironmentConfig(
            channel_radius=5.0,
            receiver_radius=2.0,
            distance=6.0,
            diffusion_coeff=100.0,
            flow_velocity=1.0,
            time_step=1e-4,
        ),
    ),
)


def bench(particles: int, steps_max: int) -> None:
    backends = available_backends()
    print(f"backends: {', '.join(sorted(backends))}")
    print(f"workload: {particles} particles, up to {steps_max} steps each\n")
    for title, env in WORKLOADS:
        print(title)
        results = {}
        for name in sorted(backends):
            rng = np.random.default_rng(2024)
            start = time.perf_counter()
            hits = simulate_hit_steps(
                env, particles, steps_max, rng, backend=backends[name]
            )
            elapsed = time.perf_counter() - start
            consumed = np.where(hits > 0, hits, steps_max).sum()
            results[name] = (hits, elapsed, consumed)
            rate = consumed / elapsed / 1e6
            print(
                f"  {name:>8}: {elapsed:7.3f} s  "
                f"{rate:8.1f} M particle-steps/s  "
                f"({int((hits > 0).sum())}/{particles} absorbed)"
            )
        names = sorted(results)
        if len(names) == 2:
            a, b = names
            identical = np.array_equal(results[a][0], results[b][0])
            speedup = results[b][1] / results[a][1]
            print(f"  bit-identical results: {identical}")
            print(f"  {a} is {speedup:.2f}x the speed of {b}\n")
            if not identical:
                raise SystemExit("backend outputs diverged")
        else:
            print("  (compiled backend unavailable; nothing to compare)\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--particles", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=4_000)
    args = parser.parse_args()
    bench(args.particles, args.steps)


if __name__ == "__main__":
    main()
