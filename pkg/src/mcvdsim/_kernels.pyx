# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched particle-stepping kernel.

Implements the exact stepping protocol documented in ``kernels_py`` (the
pure-NumPy reference). Normals are drawn from the caller's Generator via
NumPy's C API one value per particle per axis, in the same order in which
``Generator.standard_normal`` fills a block, so both kernels consume the
random stream identically and return bit-identical hit steps.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport sqrt
from libc.stdint cimport int64_t
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

KERNEL_NAME = "compiled"


def simulate_hit_steps(
    rng,
    Py_ssize_t n,
    Py_ssize_t steps_max,
    double drift,
    double sigma,
    double distance,
    double channel_radius,
    double receiver_radius,
):
    """Step ``n`` particles from the origin; return 1-based hit steps.

    Same contract as ``kernels_py.simulate_hit_steps``.
    """
    hits = np.full(n, -1, dtype=np.int64)
    if n == 0 or steps_max <= 0:
        return hits
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng does not expose a valid BitGenerator capsule")
    cdef bitgen_t *bitgen = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef int64_t[::1] hits_v = hits
    cdef double[::1] x = np.zeros(n)
    cdef double[::1] y
    cdef double[::1] z
    cdef int64_t[::1] ids = np.arange(n, dtype=np.int64)
    cdef bint axial = receiver_radius >= channel_radius

    with rng.bit_generator.lock:
        if axial:
            with nogil:
                _run_axial(bitgen, hits_v, x, ids, n, steps_max, drift, sigma, distance)
        else:
            y = np.zeros(n)
            z = np.zeros(n)
            with nogil:
                _run_3d(
                    bitgen, hits_v, x, y, z, ids, n, steps_max, drift, sigma,
                    distance, channel_radius, receiver_radius,
                )
    return hits


cdef void _run_axial(
    bitgen_t *bitgen,
    int64_t[::1] hits,
    double[::1] x,
    int64_t[::1] ids,
    Py_ssize_t n,
    Py_ssize_t steps_max,
    double drift,
    double sigma,
    double distance,
) noexcept nogil:
    cdef Py_ssize_t step, i, w, k = n
    cdef double xi
    for step in range(steps_max):
        w = 0
        for i in range(k):
            xi = x[i] + (drift + sigma * random_standard_normal(bitgen))
            if xi >= distance:
                hits[ids[i]] = step + 1
            else:
                x[w] = xi
                ids[w] = ids[i]
                w += 1
        k = w
        if k == 0:
            return


cdef void _run_3d(
    bitgen_t *bitgen,
    int64_t[::1] hits,
    double[::1] x,
    double[::1] y,
    double[::1] z,
    int64_t[::1] ids,
    Py_ssize_t n,
    Py_ssize_t steps_max,
    double drift,
    double sigma,
    double distance,
    double r_ch,
    double r_rx,
) noexcept nogil:
    cdef double two_rch = 2.0 * r_ch
    cdef double two_d = 2.0 * distance
    cdef double rch2 = r_ch * r_ch
    cdef double rrx2 = r_rx * r_rx
    cdef Py_ssize_t step, i, w, k = n
    cdef double xi, yi, zi, rr, r, f
    cdef bint gone
    for step in range(steps_max):
        w = 0
        for i in range(k):
            xi = x[i] + (drift + sigma * random_standard_normal(bitgen))
            yi = y[i] + sigma * random_standard_normal(bitgen)
            zi = z[i] + sigma * random_standard_normal(bitgen)
            rr = yi * yi + zi * zi
            while rr > rch2:
                r = sqrt(rr)
                f = (two_rch - r) / r
                yi = yi * f
                zi = zi * f
                rr = yi * yi + zi * zi
            gone = False
            if xi >= distance:
                if rr <= rrx2:
                    hits[ids[i]] = step + 1
                    gone = True
                else:
                    xi = two_d - xi
            if not gone:
                x[w] = xi
                y[w] = yi
                z[w] = zi
                ids[w] = ids[i]
                w += 1
        k = w
        if k == 0:
            return
