# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: tridiagonal Crank-Nicolson propagation, counter-based
normal draws and the Euler-Maruyama particle step.

Every function here has a numpy twin in ``_purepy`` with the same signature.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, floor, M_PI
from libc.stdint cimport uint64_t

cnp.import_array()

ctypedef double complex cplx

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t TRAJ_MULT = 0xD1B54A32D192ED03ULL


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _unit(uint64_t h) nogil:
    # open interval (0, 1)
    return ((h >> 11) + 0.5) * (1.0 / 9007199254740992.0)


cdef inline double _normal(uint64_t key, uint64_t traj, uint64_t step) nogil:
    cdef uint64_t base = _mix(key ^ (traj * TRAJ_MULT))
    cdef uint64_t h1 = _mix(base + (2 * step) * GOLDEN)
    cdef uint64_t h2 = _mix(base + (2 * step + 1) * GOLDEN)
    return sqrt(-2.0 * log(_unit(h1))) * cos(2.0 * M_PI * _unit(h2))


def stream_key(uint64_t seed):
    return _mix(seed + GOLDEN)


def counter_normals(uint64_t seed, cnp.uint64_t[::1] traj_ids, uint64_t step):
    cdef Py_ssize_t i, n = traj_ids.shape[0]
    cdef uint64_t key = _mix(seed + GOLDEN)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _normal(key, traj_ids[i], step)
    return out


def counter_uniforms(uint64_t seed, cnp.uint64_t[::1] traj_ids, uint64_t step):
    cdef Py_ssize_t i, n = traj_ids.shape[0]
    cdef uint64_t key = _mix(seed + GOLDEN)
    cdef uint64_t base
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            base = _mix(key ^ (traj_ids[i] * TRAJ_MULT))
            o[i] = _unit(_mix(base + (2 * step) * GOLDEN))
    return out


def tridiag_factor(cplx[::1] a, cplx[::1] b, cplx[::1] c):
    """Thomas forward sweep; returns (c', 1/pivot)."""
    cdef Py_ssize_t i, n = b.shape[0]
    cp = np.empty(n, dtype=np.complex128)
    minv = np.empty(n, dtype=np.complex128)
    cdef cplx[::1] cpv = cp
    cdef cplx[::1] mv = minv
    cdef cplx piv
    piv = b[0]
    if piv == 0:
        raise ZeroDivisionError("singular tridiagonal system")
    mv[0] = 1.0 / piv
    cpv[0] = c[0] * mv[0]
    for i in range(1, n):
        piv = b[i] - a[i] * cpv[i - 1]
        if piv == 0:
            raise ZeroDivisionError("singular tridiagonal system")
        mv[i] = 1.0 / piv
        cpv[i] = c[i] * mv[i] if i < n - 1 else 0.0
    return cp, minv


cdef void _solve(cplx[::1] a, cplx[::1] cp, cplx[::1] minv,
                 cplx[::1] d, cplx[::1] x) nogil:
    cdef Py_ssize_t i, n = d.shape[0]
    x[0] = d[0] * minv[0]
    for i in range(1, n):
        x[i] = (d[i] - a[i] * x[i - 1]) * minv[i]
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]


def tridiag_solve(cplx[::1] a, cplx[::1] cp, cplx[::1] minv, cplx[::1] d):
    out = np.empty(d.shape[0], dtype=np.complex128)
    cdef cplx[::1] x = out
    with nogil:
        _solve(a, cp, minv, d, x)
    return out


def cn_run(cplx[::1] psi, cplx[::1] a, cplx[::1] cp, cplx[::1] minv,
           cplx[::1] ra, cplx[::1] rb, cplx[::1] rc, Py_ssize_t nsteps,
           bint periodic=False, cplx[::1] z=None, cplx v0=0, cplx vn=0,
           cplx denom=1):
    """Advance ``psi`` in place by ``nsteps`` Crank-Nicolson steps.

    The left-hand matrix is pre-factored (a, cp, minv). For periodic grids the
    factor belongs to the Sherman-Morrison modified matrix and (z, v0, vn,
    denom) carry the rank-one correction; ``ra[0]`` and ``rc[n-1]`` then hold
    the wrap-around entries of the right-hand matrix.
    """
    cdef Py_ssize_t i, s, n = psi.shape[0]
    cdef cplx[::1] d = np.empty(n, dtype=np.complex128)
    cdef cplx corr
    with nogil:
        for s in range(nsteps):
            d[0] = rb[0] * psi[0] + rc[0] * psi[1]
            for i in range(1, n - 1):
                d[i] = ra[i] * psi[i - 1] + rb[i] * psi[i] + rc[i] * psi[i + 1]
            d[n - 1] = ra[n - 1] * psi[n - 2] + rb[n - 1] * psi[n - 1]
            if periodic:
                d[0] = d[0] + ra[0] * psi[n - 1]
                d[n - 1] = d[n - 1] + rc[n - 1] * psi[0]
            _solve(a, cp, minv, d, psi)
            if periodic:
                corr = (v0 * psi[0] + vn * psi[n - 1]) / denom
                for i in range(n):
                    psi[i] = psi[i] - corr * z[i]


def sample_step(double[::1] x, cnp.uint8_t[::1] escaped, double[::1] drift,
                cnp.uint8_t[::1] valid, double x_min, double dx, double dt,
                double noise, uint64_t seed, cnp.uint64_t[::1] traj_ids,
                uint64_t step):
    """One Euler-Maruyama step for every live particle, in place.

    Returns the number of pure-fluctuation steps taken because the particle
    sat in a cell with an invalid endpoint.
    """
    cdef Py_ssize_t i, j, n = x.shape[0], ng = drift.shape[0]
    cdef double s, w, b, xn, x_max = x_min + (ng - 1) * dx
    cdef uint64_t key = _mix(seed + GOLDEN)
    cdef long fallback = 0
    with nogil:
        for i in range(n):
            if escaped[i]:
                continue
            s = (x[i] - x_min) / dx
            j = <Py_ssize_t>floor(s)
            if j >= ng - 1:
                j = ng - 2
            if j < 0:
                j = 0
            w = s - j
            if valid[j] and valid[j + 1]:
                b = (1.0 - w) * drift[j] + w * drift[j + 1]
            else:
                b = 0.0
                fallback += 1
            xn = x[i] + b * dt + noise * _normal(key, traj_ids[i], step)
            if xn < x_min or xn > x_max:
                escaped[i] = 1
            else:
                x[i] = xn
    return fallback
