"""Numpy/scipy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``ENTROPIC_DYNAMICS_PURE_PYTHON=1`` is set. Random streams are bit-compatible
with the compiled module up to libm rounding in ``log``/``cos``.
"""
import numpy as np
from scipy.linalg.lapack import zgttrf, zgttrs

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_TRAJ_MULT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _unit(h):
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def stream_key(seed):
    with np.errstate(over="ignore"):
        return int(_mix(np.array([seed], dtype=np.uint64) + _GOLDEN)[0])


def _bases(seed, traj_ids):
    key = np.uint64(stream_key(seed))
    with np.errstate(over="ignore"):
        return _mix(key ^ (np.asarray(traj_ids, dtype=np.uint64) * _TRAJ_MULT))


def counter_normals(seed, traj_ids, step):
    base = _bases(seed, traj_ids)
    s = np.uint64(step)
    with np.errstate(over="ignore"):
        h1 = _mix(base + (np.uint64(2) * s) * _GOLDEN)
        h2 = _mix(base + (np.uint64(2) * s + np.uint64(1)) * _GOLDEN)
    return np.sqrt(-2.0 * np.log(_unit(h1))) * np.cos(2.0 * np.pi * _unit(h2))


def counter_uniforms(seed, traj_ids, step):
    base = _bases(seed, traj_ids)
    with np.errstate(over="ignore"):
        h1 = _mix(base + (np.uint64(2) * np.uint64(step)) * _GOLDEN)
    return _unit(h1)


class CNPropagator:
    """Crank-Nicolson stepper ``L psi_new = R psi_old`` with tridiagonal L, R.

    L is factored once by LAPACK ``zgttrf``; periodic grids add the corner
    entries through a Sherman-Morrison correction, as in the compiled kernel.
    """

    def __init__(self, a, b, c, ra, rb, rc, periodic=False):
        a = np.asarray(a, dtype=complex)
        b = np.array(b, dtype=complex)
        c = np.asarray(c, dtype=complex)
        n = len(b)
        self.n = n
        self.periodic = periodic
        self.ra = np.asarray(ra, dtype=complex)
        self.rb = np.asarray(rb, dtype=complex)
        self.rc = np.asarray(rc, dtype=complex)
        self.z = None
        if periodic:
            top, bottom = a[0], c[n - 1]
            gamma = -b[0]
            b[0] -= gamma
            b[n - 1] -= bottom * top / gamma
        self._lu = zgttrf(a[1:].copy(), b, c[:-1].copy())
        if self._lu[-1] != 0:
            raise ZeroDivisionError("singular tridiagonal system")
        if periodic:
            u = np.zeros(n, dtype=complex)
            u[0], u[n - 1] = gamma, bottom
            self.z = self._solve(u)
            self.vn = top / gamma
            self.denom = 1 + self.z[0] + self.vn * self.z[n - 1]

    def _solve(self, d):
        dl, d0, du, du2, ipiv, _ = self._lu
        x, info = zgttrs(dl, d0, du, du2, ipiv, d)
        return x

    def run(self, psi, nsteps):
        ra, rb, rc = self.ra, self.rb, self.rc
        d = np.empty_like(psi)
        for _ in range(nsteps):
            d[:] = rb * psi
            d[1:] += ra[1:] * psi[:-1]
            d[:-1] += rc[:-1] * psi[1:]
            if self.periodic:
                d[0] += ra[0] * psi[-1]
                d[-1] += rc[-1] * psi[0]
            x = self._solve(d)
            if self.periodic:
                x = x - (x[0] + self.vn * x[-1]) / self.denom * self.z
            psi[:] = x
        return psi


def sample_step(x, escaped, drift, valid, x_min, dx, dt, noise, seed, traj_ids, step):
    ng = drift.shape[0]
    x_max = x_min + (ng - 1) * dx
    live = escaped == 0
    s = (x - x_min) / dx
    j = np.clip(np.floor(s).astype(np.int64), 0, ng - 2)
    w = s - j
    ok = (valid[j] != 0) & (valid[j + 1] != 0)
    b = np.where(ok, (1.0 - w) * drift[j] + w * drift[np.minimum(j + 1, ng - 1)], 0.0)
    xn = x + b * dt + noise * counter_normals(seed, traj_ids, step)
    out = live & ((xn < x_min) | (xn > x_max))
    move = live & ~out
    x[move] = xn[move]
    escaped[out] = 1
    return int(np.count_nonzero(live & ~ok))
