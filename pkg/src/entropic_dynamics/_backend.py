"""Kernel backend selection.

The compiled extension is preferred; set ``ENTROPIC_DYNAMICS_PURE_PYTHON=1``
(or call :func:`use_backend`) to force the numpy fallback.
"""
import os

import numpy as np

from . import _purepy

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None


class _CompiledCN:
    def __init__(self, a, b, c, ra, rb, rc, periodic=False):
        a = np.ascontiguousarray(a, dtype=complex)
        b = np.ascontiguousarray(b, dtype=complex).copy()
        c = np.ascontiguousarray(c, dtype=complex)
        n = len(b)
        self.periodic = periodic
        self.ra = np.ascontiguousarray(ra, dtype=complex)
        self.rb = np.ascontiguousarray(rb, dtype=complex)
        self.rc = np.ascontiguousarray(rc, dtype=complex)
        self.a = a.copy()
        cc = c.copy()
        self.z = None
        self.v0 = self.vn = 0j
        self.denom = 1 + 0j
        if periodic:
            # Sherman-Morrison: L = L' + u v^T with corners moved into u, v
            top, bottom = a[0], c[n - 1]
            gamma = -b[0]
            b[0] -= gamma
            b[n - 1] -= bottom * top / gamma
            self.a[0] = 0
            cc[n - 1] = 0
            self.cp, self.minv = _kernels.tridiag_factor(self.a, b, cc)
            u = np.zeros(n, dtype=complex)
            u[0], u[n - 1] = gamma, bottom
            self.z = _kernels.tridiag_solve(self.a, self.cp, self.minv, u)
            self.v0, self.vn = 1 + 0j, top / gamma
            self.denom = 1 + self.v0 * self.z[0] + self.vn * self.z[n - 1]
        else:
            self.a[0] = 0
            cc[n - 1] = 0
            self.cp, self.minv = _kernels.tridiag_factor(self.a, b, cc)

    def run(self, psi, nsteps):
        _kernels.cn_run(psi, self.a, self.cp, self.minv, self.ra, self.rb, self.rc,
                        nsteps, self.periodic, self.z, self.v0, self.vn, self.denom)
        return psi


class _Compiled:
    name = "cython"
    CNPropagator = _CompiledCN

    @staticmethod
    def counter_normals(seed, traj_ids, step):
        return _kernels.counter_normals(seed, np.ascontiguousarray(traj_ids, dtype=np.uint64), step)

    @staticmethod
    def counter_uniforms(seed, traj_ids, step):
        return _kernels.counter_uniforms(seed, np.ascontiguousarray(traj_ids, dtype=np.uint64), step)

    @staticmethod
    def sample_step(x, escaped, drift, valid, x_min, dx, dt, noise, seed, traj_ids, step):
        return _kernels.sample_step(x, escaped, drift, valid, x_min, dx, dt, noise,
                                    seed, traj_ids, step)


class _Python:
    name = "python"
    CNPropagator = _purepy.CNPropagator
    counter_normals = staticmethod(_purepy.counter_normals)
    counter_uniforms = staticmethod(_purepy.counter_uniforms)
    sample_step = staticmethod(_purepy.sample_step)


BACKENDS = {"python": _Python}
if _kernels is not None:
    BACKENDS["cython"] = _Compiled

if _kernels is not None and os.environ.get("ENTROPIC_DYNAMICS_PURE_PYTHON", "") not in ("1", "true"):
    current = _Compiled
else:
    current = _Python


def use_backend(name):
    """Switch the active kernel backend; returns the previous backend name."""
    global current
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    prev = current.name
    current = BACKENDS[name]
    return prev


def backend_name():
    return current.name
