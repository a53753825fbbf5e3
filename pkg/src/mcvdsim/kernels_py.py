"""Pure-NumPy batched particle-stepping kernel.

This is the reference implementation of the hot loop; ``mcvdsim._kernels``
is a compiled Cython version of the exact same algorithm. Both consume
standard normals from the caller's ``numpy.random.Generator`` in the same
order and apply identically associated float64 arithmetic, so for a given
generator state they return bit-identical results. Tests rely on that.

Stepping protocol (lockstep over all alive particles, stable order):

1. Draw one normal per alive particle (axial mode) or three (full-3D mode),
   particle-major.
2. x += drift + sigma·g; in 3D mode also y += sigma·g, z += sigma·g.
3. 3D mode: fold the radial coordinate back inside the wall,
   r -> 2·r_ch − r (angle preserved), repeating while r > r_ch.
4. A particle whose end-of-step x ≥ distance is absorbed if its end-of-step
   radial position is ≤ receiver_radius, else it reflects off the end cap
   (x -> 2·distance − x). Hit step recorded 1-based.
5. Absorbed particles are removed, preserving relative order.

Axial mode applies when the receiver spans the full cross-section
(receiver_radius ≥ channel_radius): transverse motion then cannot affect
absorption, so y/z are neither stepped nor stored and only one normal per
particle-step is drawn.
"""

from __future__ import annotations

import numpy as np

KERNEL_NAME = "python"


def simulate_hit_steps(
    rng: np.random.Generator,
    n: int,
    steps_max: int,
    drift: float,
    sigma: float,
    distance: float,
    channel_radius: float,
    receiver_radius: float,
) -> np.ndarray:
    """Step ``n`` particles from the origin; return 1-based hit steps.

    Returns an int64 array of length ``n``: entry i is the step index
    (1-based, so hit time = step·Δt) at which particle i was absorbed, or
    -1 if it survived all ``steps_max`` steps.
    """
    hits = np.full(n, -1, dtype=np.int64)
    if n == 0 or steps_max <= 0:
        return hits
    if receiver_radius >= channel_radius:
        _run_axial(rng, hits, n, steps_max, drift, sigma, distance)
    else:
        _run_3d(
            rng, hits, n, steps_max, drift, sigma, distance,
            channel_radius, receiver_radius,
        )
    return hits


def _run_axial(rng, hits, n, steps_max, drift, sigma, distance):
    x = np.zeros(n)
    ids = np.arange(n, dtype=np.int64)
    g = np.empty(n)
    t = np.empty(n)
    k = n
    for step in range(steps_max):
        rng.standard_normal(out=g[:k])
        np.multiply(g[:k], sigma, out=t[:k])
        np.add(t[:k], drift, out=t[:k])
        np.add(x[:k], t[:k], out=x[:k])
        absorbed = x[:k] >= distance
        if absorbed.any():
            hits[ids[:k][absorbed]] = step + 1
            keep = ~absorbed
            k2 = int(keep.sum())
            x[:k2] = x[:k][keep]
            ids[:k2] = ids[:k][keep]
            k = k2
            if k == 0:
                return


def _run_3d(rng, hits, n, steps_max, drift, sigma, distance, r_ch, r_rx):
    two_rch = 2.0 * r_ch
    two_d = 2.0 * distance
    rrx2 = r_rx * r_rx
    rch2 = r_ch * r_ch
    x = np.zeros(n)
    y = np.zeros(n)
    z = np.zeros(n)
    ids = np.arange(n, dtype=np.int64)
    g = np.empty((n, 3))
    t = np.empty(n)
    rr = np.empty(n)
    k = n
    for step in range(steps_max):
        rng.standard_normal(out=g[:k])
        np.multiply(g[:k, 0], sigma, out=t[:k])
        np.add(t[:k], drift, out=t[:k])
        np.add(x[:k], t[:k], out=x[:k])
        np.multiply(g[:k, 1], sigma, out=t[:k])
        np.add(y[:k], t[:k], out=y[:k])
        np.multiply(g[:k, 2], sigma, out=t[:k])
        np.add(z[:k], t[:k], out=z[:k])
        # squared radial position, then wall folds for anyone outside
        np.multiply(y[:k], y[:k], out=rr[:k])
        np.multiply(z[:k], z[:k], out=t[:k])
        np.add(rr[:k], t[:k], out=rr[:k])
        while True:
            out_idx = np.nonzero(rr[:k] > rch2)[0]
            if out_idx.size == 0:
                break
            r = np.sqrt(rr[:k][out_idx])
            f = (two_rch - r) / r
            y[out_idx] *= f
            z[out_idx] *= f
            rr[out_idx] = y[out_idx] * y[out_idx] + z[out_idx] * z[out_idx]
        crossed = x[:k] >= distance
        if crossed.any():
            absorbed = crossed & (rr[:k] <= rrx2)
            bounced = np.nonzero(crossed & ~absorbed)[0]
            if bounced.size:
                x[bounced] = two_d - x[bounced]
            if absorbed.any():
                hits[ids[:k][absorbed]] = step + 1
                keep = ~absorbed
                k2 = int(keep.sum())
                x[:k2] = x[:k][keep]
                y[:k2] = y[:k][keep]
                z[:k2] = z[:k][keep]
                ids[:k2] = ids[:k][keep]
                k = k2
                if k == 0:
                    return
