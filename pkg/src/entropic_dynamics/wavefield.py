"""Grid wave functions, Crank-Nicolson propagation and the hydrodynamic picture.

A state psi = rho^(1/2) exp(i phi) on a uniform 1-D grid is propagated by

    (1 + i dt H / 2 hbar) psi_new = (1 - i dt H / 2 hbar) psi_old

with the three-point Laplacian. A vector potential enters through Peierls
phases on the links, which keeps the discrete scheme exactly covariant under
lattice gauge transformations.

Hydrodynamic fields follow the entropic-dynamics decomposition:
current velocity v = (hbar/m)(d phi - beta A), osmotic velocity
u = -(hbar/2m) d log rho, drift b = v - u = (hbar/m)(d S - beta A) with the
entropy field S = phi + log rho^(1/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _backend

__all__ = [
    "Grid1D",
    "UnitSystem",
    "WaveFunction",
    "HydroFields",
    "GaugeField",
    "Trajectory",
    "Stepper",
    "WavefieldError",
    "gaussian_packet",
    "harmonic_ground_state",
    "ground_state",
    "phase_rate",
    "spectral_derivative",
    "plane_wave",
    "evolve",
    "evolve_gauged",
    "decompose",
    "recompose",
    "fokker_planck_residual",
    "energy",
    "energy_drift",
    "energy_balance",
    "phase_equation_residual",
    "gauge_transform",
    "momentum_stats",
    "MomentumStats",
]

NORM_TOL = 1e-10


class WavefieldError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    dx: float
    n: int

    def __post_init__(self):
        if self.dx <= 0:
            raise WavefieldError("grid spacing must be positive")
        if self.n < 8:
            raise WavefieldError("grid needs at least 8 points")

    @classmethod
    def centered(cls, dx: float, n: int, center: float = 0.0) -> "Grid1D":
        return cls(center - dx * (n // 2), dx, n)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)

    @property
    def length(self) -> float:
        return self.dx * self.n

    def shifted(self, offset: float) -> "Grid1D":
        return Grid1D(self.x_min + offset, self.dx, self.n)


@dataclass(frozen=True)
class UnitSystem:
    hbar: float = 1.0
    mass: float = 1.0
    osmotic_mass: float | None = None

    def __post_init__(self):
        if self.osmotic_mass is None:
            object.__setattr__(self, "osmotic_mass", self.mass)
        if min(self.hbar, self.mass, self.osmotic_mass) <= 0:
            raise WavefieldError("hbar and masses must be positive")

    @property
    def diffusion(self) -> float:
        """Step variance per unit time, hbar/m."""
        return self.hbar / self.mass


@dataclass(frozen=True)
class WaveFunction:
    grid: Grid1D
    psi: np.ndarray
    boundary: str = "dirichlet"
    t: float = 0.0
    units: UnitSystem = field(default_factory=UnitSystem)

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != (self.grid.n,):
            raise WavefieldError("amplitudes do not match the grid")
        if self.boundary not in ("dirichlet", "periodic"):
            raise WavefieldError(f"unknown boundary {self.boundary!r}")
        if not np.all(np.isfinite(psi)):
            raise WavefieldError("non-finite amplitudes")
        norm = float(np.sum(np.abs(psi) ** 2) * self.grid.dx)
        if abs(norm - 1.0) > NORM_TOL:
            raise WavefieldError(f"wave function not normalized (norm {norm!r})")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def normalized(cls, grid, amplitudes, **kw) -> "WaveFunction":
        a = np.asarray(amplitudes, dtype=complex)
        return cls(grid, a / math.sqrt(np.sum(np.abs(a) ** 2) * grid.dx), **kw)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dx)

    def with_psi(self, psi, t=None) -> "WaveFunction":
        return replace(self, psi=psi, t=self.t if t is None else t)

    def mean_x(self) -> float:
        return float(np.sum(self.density * self.grid.x) * self.grid.dx)

    def var_x(self) -> float:
        x = self.grid.x
        m = self.mean_x()
        return float(np.sum(self.density * (x - m) ** 2) * self.grid.dx)


def gaussian_packet(grid: Grid1D, x0: float, sigma0: float, k0: float = 0.0, *,
                    boundary: str = "dirichlet", units: UnitSystem | None = None,
                    clearance: float = 6.0) -> WaveFunction:
    """psi ~ exp(-(x-x0)^2 / 4 sigma0^2 + i k0 x), normalized on the grid."""
    if sigma0 <= 0:
        raise WavefieldError("sigma0 must be positive")
    if boundary == "dirichlet" and (x0 - clearance * sigma0 < grid.x_min
                                    or x0 + clearance * sigma0 > grid.x_max):
        raise WavefieldError(f"packet closer than {clearance} sigma0 to a boundary")
    x = grid.x
    amp = np.exp(-((x - x0) ** 2) / (4 * sigma0 ** 2) + 1j * k0 * x)
    return WaveFunction.normalized(grid, amp, boundary=boundary, units=units or UnitSystem())


def ground_state(grid: Grid1D, V, *, units: UnitSystem | None = None) -> WaveFunction:
    """Lowest eigenvector of the three-point lattice Hamiltonian (Dirichlet walls).

    This is exactly stationary under the Crank-Nicolson step, unlike the
    continuum eigenfunction sampled on the grid.
    """
    from scipy.linalg import eigh_tridiagonal

    units = units or UnitSystem()
    K = units.hbar ** 2 / (2 * units.mass * grid.dx ** 2)
    diag = 2 * K + _sample(V, grid.x, 0.0)
    _, vec = eigh_tridiagonal(diag, np.full(grid.n - 1, -K), select="i", select_range=(0, 0))
    amp = vec[:, 0] * np.sign(vec[np.argmax(np.abs(vec[:, 0])), 0])
    return WaveFunction.normalized(grid, amp, units=units)


def harmonic_ground_state(grid: Grid1D, omega: float = 1.0, x0: float = 0.0, *,
                          units: UnitSystem | None = None, discrete: bool = True) -> WaveFunction:
    """Ground state of V = m omega^2 (x - x0)^2 / 2; ``discrete=False`` samples the continuum Gaussian."""
    units = units or UnitSystem()
    if discrete:
        return ground_state(grid, 0.5 * units.mass * omega ** 2 * (grid.x - x0) ** 2, units=units)
    a = units.mass * omega / units.hbar
    amp = (a / math.pi) ** 0.25 * np.exp(-a * (grid.x - x0) ** 2 / 2)
    return WaveFunction.normalized(grid, amp, units=units)


def plane_wave(grid: Grid1D, k: float, *, units: UnitSystem | None = None) -> WaveFunction:
    """Periodic plane wave; ``k`` must fit the box (k L a multiple of 2 pi)."""
    turns = k * grid.length / (2 * math.pi)
    if abs(turns - round(turns)) > 1e-9:
        raise WavefieldError("plane wave is not periodic on this grid")
    amp = np.exp(1j * k * grid.x)
    return WaveFunction.normalized(grid, amp, boundary="periodic", units=units or UnitSystem())


# --- potentials and gauge fields -------------------------------------------------

def _is_time_dependent(obj) -> bool:
    if obj is None or np.isscalar(obj) or isinstance(obj, np.ndarray):
        return False
    return bool(getattr(obj, "time_dependent", True))


def _sample(obj, x: np.ndarray, t: float) -> np.ndarray:
    if obj is None:
        return np.zeros_like(x)
    if callable(obj):
        return np.broadcast_to(np.asarray(obj(x, t), dtype=float), x.shape).astype(float)
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 0:
        return np.full_like(x, float(arr))
    if arr.shape != x.shape:
        raise WavefieldError("potential samples do not match the grid")
    return arr


def _time_derivative(f, x, t, h=1e-3):
    deriv = getattr(f, "time_derivative", None)
    if deriv is not None:
        return _sample(deriv, x, t)
    # fourth-order central difference
    return (-_sample(f, x, t + 2 * h) + 8 * _sample(f, x, t + h)
            - 8 * _sample(f, x, t - h) + _sample(f, x, t - 2 * h)) / (12 * h)


@dataclass(frozen=True)
class GaugeField:
    """External fields: vector potential A(x,t), scalar V(x,t), coupling beta = e/(hbar c).

    ``gauge_functions`` accumulates the f(x,t) of applied local gauge
    transformations; they shift link phases by beta (f(x_{j+1}) - f(x_j)) and
    the scalar potential by -hbar beta d_t f.
    """

    A: Callable | np.ndarray | float | None = None
    V: Callable | np.ndarray | float | None = None
    beta: float = 1.0
    gauge_functions: tuple = ()

    @property
    def time_dependent(self) -> bool:
        return (_is_time_dependent(self.A) or _is_time_dependent(self.V)
                or any(_is_time_dependent(f) for f in self.gauge_functions))

    @property
    def has_vector_potential(self) -> bool:
        return self.A is not None or bool(self.gauge_functions)

    def potential(self, grid: Grid1D, t: float, units: UnitSystem) -> np.ndarray:
        V = _sample(self.V, grid.x, t)
        for f in self.gauge_functions:
            if _is_time_dependent(f):
                V = V - units.hbar * self.beta * _time_derivative(f, grid.x, t)
        return V

    def link_phases(self, grid: Grid1D, t: float) -> np.ndarray:
        """beta times the line integral of A over each link j -> j+1 (last entry wraps)."""
        theta = np.zeros(grid.n)
        if self.A is not None:
            theta += _sample(self.A, grid.x + 0.5 * grid.dx, t) * grid.dx
        if self.gauge_functions:
            xe = np.append(grid.x, grid.x_max + grid.dx)
            for f in self.gauge_functions:
                fe = _sample(f, xe, t)
                theta += np.diff(fe)
        return self.beta * theta

    def vector_potential(self, grid: Grid1D, t: float) -> np.ndarray:
        """A sampled on the grid points (including gauge shifts), for velocity fields."""
        A = _sample(self.A, grid.x, t)
        for f in self.gauge_functions:
            h = 1e-4 * grid.dx
            A = A + (_sample(f, grid.x + h, t) - _sample(f, grid.x - h, t)) / (2 * h)
        return A


def _as_gauge(V=None, gauge: GaugeField | None = None) -> GaugeField:
    if gauge is not None:
        if V is not None:
            raise WavefieldError("pass the scalar potential inside the gauge field")
        return gauge
    return GaugeField(A=None, V=V, beta=0.0)


# --- propagation -----------------------------------------------------------------

@dataclass
class Trajectory:
    states: list
    dt: float
    checkpoint_every: int
    norm_drift_per_step: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def grid(self) -> Grid1D:
        return self.states[0].grid

    def densities(self) -> np.ndarray:
        return np.vstack([s.density for s in self.states])

    def norms(self) -> np.ndarray:
        return np.array([s.norm for s in self.states])

    def __len__(self):
        return len(self.states)

    def __getitem__(self, k):
        return self.states[k]


def _bands(grid, units, V, theta, dt, periodic):
    K = units.hbar ** 2 / (2 * units.mass * grid.dx ** 2)
    tau = 0.5 * dt / units.hbar
    n = grid.n
    hd = 2 * K + V
    hc = -K * np.exp(-1j * theta)        # H[j, j+1]
    ha = np.empty(n, dtype=complex)      # H[j, j-1]
    ha[1:] = -K * np.exp(1j * theta[:-1])
    ha[0] = -K * np.exp(1j * theta[-1]) if periodic else 0
    if not periodic:
        hc = hc.copy()
        hc[-1] = 0
    a, b, c = 1j * tau * ha, 1 + 1j * tau * hd, 1j * tau * hc
    return a, b, c, -a, 2 - b, -c


def _propagator(grid, units, gauge, t_mid, dt, periodic):
    V = gauge.potential(grid, t_mid, units)
    theta = gauge.link_phases(grid, t_mid) if gauge.has_vector_potential else np.zeros(grid.n)
    return _backend.current.CNPropagator(*_bands(grid, units, V, theta, dt, periodic),
                                         periodic=periodic)


class Stepper:
    """Incremental Crank-Nicolson propagation of one state.

    Static Hamiltonians are factored once; time-dependent ones are rebuilt at
    every step with potentials and link phases taken at the midpoint time.
    """

    def __init__(self, psi: WaveFunction, gauge: GaugeField, dt: float):
        if dt <= 0:
            raise WavefieldError("dt must be positive")
        self.template = psi
        self.gauge = gauge
        self.dt = dt
        self.work = np.array(psi.psi, dtype=complex)
        self.t0 = psi.t
        self.steps_done = 0
        self.periodic = psi.boundary == "periodic"
        self._static = None
        if not gauge.time_dependent:
            self._static = _propagator(psi.grid, psi.units, gauge, psi.t, dt, self.periodic)

    @property
    def t(self) -> float:
        return self.t0 + self.steps_done * self.dt

    def advance(self, nsteps: int = 1) -> None:
        if self._static is not None:
            self._static.run(self.work, nsteps)
        else:
            for s in range(nsteps):
                t_mid = self.t0 + (self.steps_done + s + 0.5) * self.dt
                _propagator(self.template.grid, self.template.units, self.gauge, t_mid,
                            self.dt, self.periodic).run(self.work, 1)
        self.steps_done += nsteps
        if not np.all(np.isfinite(self.work)):
            raise WavefieldError(f"solver breakdown at step {self.steps_done}")

    def state(self) -> WaveFunction:
        return replace(self.template, psi=self.work.copy(), t=self.t)


def evolve_gauged(psi: WaveFunction, gauge: GaugeField, dt: float, steps: int,
                  checkpoint_every: int | None = None) -> Trajectory:
    """Minimal-coupling Crank-Nicolson evolution; returns checkpointed states."""
    if steps < 0:
        raise WavefieldError("steps must be nonnegative")
    every = checkpoint_every or max(steps, 1)
    stepper = Stepper(psi, gauge, dt)
    states = [psi]
    drift = 0.0
    prev_norm = psi.norm
    while stepper.steps_done < steps:
        chunk = min(every, steps - stepper.steps_done)
        stepper.advance(chunk)
        state = stepper.state()
        drift = max(drift, abs(state.norm - prev_norm) / chunk)
        prev_norm = state.norm
        states.append(state)
    return Trajectory(states, dt, every, drift)


def evolve(psi: WaveFunction, V=None, dt: float = None, steps: int = 0,
           checkpoint_every: int | None = None) -> Trajectory:
    """Schroedinger evolution under scalar potential V (array, scalar or callable V(x, t))."""
    if dt is None:
        dt = 0.25 * psi.grid.dx ** 2
    return evolve_gauged(psi, _as_gauge(V), dt, steps, checkpoint_every)


def gauge_transform(psi: WaveFunction, gauge: GaugeField, f) -> tuple[WaveFunction, GaugeField]:
    """Local gauge transformation by f(x, t) (callable or constant).

    psi -> exp(i beta f) psi, A -> A + d_x f, V -> V - (e/c) d_t f.
    """
    if not callable(f):
        const = float(f)
        new = psi.with_psi(np.exp(1j * gauge.beta * const) * psi.psi)
        return new, gauge
    fx = _sample(f, psi.grid.x, psi.t)
    new = psi.with_psi(np.exp(1j * gauge.beta * fx) * psi.psi)
    return new, replace(gauge, gauge_functions=gauge.gauge_functions + (f,))


# --- hydrodynamic decomposition ----------------------------------------------------

@dataclass(frozen=True)
class HydroFields:
    grid: Grid1D
    units: UnitSystem
    rho: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    u: np.ndarray
    b: np.ndarray
    S: np.ndarray
    mask: np.ndarray
    vmask: np.ndarray
    rho_min: float


def default_rho_min(grid: Grid1D) -> float:
    return 1e-12 / grid.dx


def _link_angles(psi: np.ndarray, periodic: bool) -> np.ndarray:
    """Principal phase differences over links j -> j+1 (last entry wraps when periodic)."""
    d = np.angle(np.roll(psi, -1) * np.conj(psi))
    if not periodic:
        d[-1] = 0.0
    return d


def decompose(psi: WaveFunction, gauge: GaugeField | None = None,
              rho_min: float | None = None) -> HydroFields:
    grid, units = psi.grid, psi.units
    periodic = psi.boundary == "periodic"
    rho = psi.density
    rho_min = default_rho_min(grid) if rho_min is None else rho_min
    mask = rho >= rho_min
    if not mask.any():
        raise WavefieldError("density is below rho_min everywhere")
    links = _link_angles(psi.psi, periodic)
    cum = np.concatenate([[0.0], np.cumsum(links[:-1])])
    j0 = int(np.argmax(rho))
    phi = np.angle(psi.psi[j0]) + cum - cum[j0]
    with np.errstate(divide="ignore"):
        half_log = 0.5 * np.log(rho)

    with np.errstate(invalid="ignore"):
        dhl = (np.roll(half_log, -1) - np.roll(half_log, 1)) / (2 * grid.dx)
    dphi = (links + np.roll(links, 1)) / (2 * grid.dx)
    vmask = mask & np.roll(mask, 1) & np.roll(mask, -1)
    if not periodic:
        vmask[0] = vmask[-1] = False
    A = gauge.vector_potential(grid, psi.t) if gauge is not None and gauge.has_vector_potential else 0.0
    beta = gauge.beta if gauge is not None else 0.0
    k = units.hbar / units.mass
    nan = np.full(grid.n, np.nan)
    v = np.where(vmask, k * (dphi - beta * A), nan)
    u = np.where(vmask, -k * dhl, nan)
    b = np.where(vmask, k * (dphi + dhl - beta * A), nan)
    scale = np.nanmax(np.abs(v) + np.abs(u)) if vmask.any() else 0.0
    gap = np.nanmax(np.abs(v - (b + u))) if vmask.any() else 0.0
    assert gap <= 1e-12 * max(1.0, scale), f"v != b + u by {gap}"
    phi = np.where(mask, phi, np.nan)
    S = np.where(mask, phi + half_log, np.nan)
    return HydroFields(grid, units, rho, phi, v, u, b, S, mask, vmask, rho_min)


def recompose(fields: HydroFields) -> np.ndarray:
    return np.where(fields.mask, np.sqrt(fields.rho) * np.exp(1j * np.nan_to_num(fields.phi)), 0)


# --- diagnostics -------------------------------------------------------------------

def fokker_planck_residual(traj: Trajectory | Sequence[WaveFunction],
                           gauge: GaugeField | None = None) -> np.ndarray:
    """L2 norm (over the validity mask) of d_t rho + d_x(v rho) at interior checkpoints.

    Both derivatives are centred; checkpoints must be equally spaced in time.
    """
    states = list(traj.states if isinstance(traj, Trajectory) else traj)
    if len(states) < 3:
        raise WavefieldError("need at least three checkpoints")
    times = np.array([s.t for s in states])
    gaps = np.diff(times)
    if np.ptp(gaps) > 1e-9 * gaps.max():
        raise WavefieldError("checkpoints are not equally spaced")
    h = gaps[0]
    grid = states[0].grid
    periodic = states[0].boundary == "periodic"
    out = []
    for k in range(1, len(states) - 1):
        f = decompose(states[k], gauge)
        J = np.where(f.vmask, f.rho * f.v, 0.0)
        div = (np.roll(J, -1) - np.roll(J, 1)) / (2 * grid.dx)
        r = (states[k + 1].density - states[k - 1].density) / (2 * h) + div
        ok = f.mask & np.roll(f.mask, 1) & np.roll(f.mask, -1)
        if not periodic:
            ok[:2] = ok[-2:] = False
        out.append(math.sqrt(np.sum(r[ok] ** 2) * grid.dx))
    return np.array(out)


def _kinetic_parts(psi: WaveFunction, gauge: GaugeField | None):
    """Link-based current and osmotic kinetic densities (summed with dx give energies)."""
    grid, units = psi.grid, psi.units
    periodic = psi.boundary == "periodic"
    R = np.abs(psi.psi)
    links = _link_angles(psi.psi, periodic)
    if gauge is not None and gauge.has_vector_potential:
        links = links - gauge.link_phases(grid, psi.t)
    Rn = np.roll(R, -1)
    if not periodic:
        Rn[-1] = 0.0
    pref = units.hbar ** 2 / (2 * units.mass * grid.dx ** 2)
    current = pref * 2 * R * Rn * (1 - np.cos(links))
    osmotic = pref * (units.osmotic_mass / units.mass) * (Rn - R) ** 2
    return current, osmotic


def energy(psi: WaveFunction, V=None, gauge: GaugeField | None = None) -> float:
    """E = int rho (m v^2/2 + mu u^2/2 + V) on link differences.

    For m = mu this is the quadratic form conserved by the Crank-Nicolson step.
    """
    gauge = _as_gauge(V, gauge)
    current, osmotic = _kinetic_parts(psi, gauge)
    pot = gauge.potential(psi.grid, psi.t, psi.units)
    return float((np.sum(current + osmotic) + np.sum(psi.density * pot)) * psi.grid.dx)


def energy_drift(traj: Trajectory, V=None, gauge: GaugeField | None = None) -> np.ndarray:
    """E(t_k) - E(t_0) for every checkpoint."""
    e = np.array([energy(s, V, gauge) for s in traj.states])
    return e - e[0]


def energy_balance(traj: Trajectory, V=None, gauge: GaugeField | None = None) -> np.ndarray:
    """E(t_k) - E(t_0) - int_0^t_k <d_t V> dt (trapezoid over checkpoints).

    Zero for static potentials; for driven ones it is second order in the
    checkpoint spacing.
    """
    gauge = _as_gauge(V, gauge)
    e = energy_drift(traj, gauge=gauge)
    power = []
    for s in traj.states:
        dV = _time_derivative(lambda x, t: gauge.potential(s.grid, t, s.units), s.grid.x, s.t)
        power.append(float(np.sum(s.density * dV) * s.grid.dx))
    power = np.array(power)
    work = np.concatenate([[0.0], np.cumsum(0.5 * (power[1:] + power[:-1]) * np.diff(traj.times))])
    return e - work


def _phase_terms(psi: WaveFunction, gauge: GaugeField | None):
    f = decompose(psi, gauge)
    grid, units = psi.grid, psi.units
    R = np.sqrt(f.rho)
    lap = (np.roll(R, -1) - 2 * R + np.roll(R, 1)) / grid.dx ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        quantum = units.osmotic_mass * units.hbar ** 2 / (2 * units.mass ** 2) * lap / R
    kinetic = 0.5 * units.mass * f.v ** 2
    return f, kinetic, quantum


def phase_equation_residual(first: WaveFunction, second: WaveFunction, V=None,
                            gauge: GaugeField | None = None) -> float:
    """rho-weighted L2 norm of hbar d_t phi + m v^2/2 + V - Q between two states.

    d_t phi is the forward difference of the pointwise phase; the spatial
    terms are averaged over both states so the residual is centred at the
    midpoint time.
    """
    gauge = _as_gauge(V, gauge)
    dt = second.t - first.t
    if dt <= 0:
        raise WavefieldError("states must be ordered in time")
    fa, ka, qa = _phase_terms(first, gauge)
    fb, kb, qb = _phase_terms(second, gauge)
    dphi = np.angle(second.psi * np.conj(first.psi)) / dt
    t_mid = 0.5 * (first.t + second.t)
    pot = gauge.potential(first.grid, t_mid, first.units)
    r = first.units.hbar * dphi + 0.5 * (ka + kb) + pot - 0.5 * (qa + qb)
    ok = fa.vmask & fb.vmask
    if not ok.any():
        raise WavefieldError("no valid region shared by both states")
    w = 0.5 * (fa.rho + fb.rho)
    return float(math.sqrt(np.sum(w[ok] * r[ok] ** 2) * first.grid.dx))


def phase_rate(first: WaveFunction, second: WaveFunction) -> np.ndarray:
    """Pointwise d_t phi between two states (forward difference)."""
    return np.angle(second.psi * np.conj(first.psi)) / (second.t - first.t)


# --- momentum statistics -------------------------------------------------------------

@dataclass(frozen=True)
class MomentumStats:
    mean_p: float
    var_p: float
    var_mv: float
    var_mu: float
    mean_x: float
    var_x: float
    mean_mv: float

    @property
    def uncertainty_product(self) -> float:
        return math.sqrt(self.var_x * self.var_p)


def spectral_derivative(psi: np.ndarray, dx: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(psi.shape[0], d=dx)
    return np.fft.ifft(1j * k * np.fft.fft(psi))


def momentum_stats(psi: WaveFunction, boundary_tol: float = 1e-10) -> MomentumStats:
    """Operator and entropic momentum moments, computed spectrally.

    Var p = Var(mv) + m^2 <u^2> holds on the validity mask; the state must
    vanish at the walls for the spectral moments to be meaningful.
    """
    grid, units = psi.grid, psi.units
    rho = psi.density
    if max(rho[0], rho[-1]) > boundary_tol * rho.max():
        raise WavefieldError("density at the boundary is too large for momentum moments")
    dx = grid.dx
    k = 2 * np.pi * np.fft.fftfreq(grid.n, d=dx)
    spec = np.abs(np.fft.fft(psi.psi)) ** 2
    total = spec.sum()
    mean_p = units.hbar * float(np.sum(k * spec) / total)
    mean_p2 = units.hbar ** 2 * float(np.sum(k ** 2 * spec) / total)
    dpsi = spectral_derivative(psi.psi, dx)
    cross = np.conj(psi.psi) * dpsi
    m, hbar = units.mass, units.hbar
    flux_v = hbar * cross.imag          # m rho v
    flux_u = -hbar * cross.real         # m rho u
    mask = rho >= default_rho_min(grid)
    mean_mv = float(np.sum(flux_v) * dx)
    mv2 = float(np.sum(flux_v[mask] ** 2 / rho[mask]) * dx)
    mu2 = float(np.sum(flux_u[mask] ** 2 / rho[mask]) * dx)
    return MomentumStats(
        mean_p=mean_p,
        var_p=mean_p2 - mean_p ** 2,
        var_mv=mv2 - mean_mv ** 2,
        var_mu=mu2,
        mean_x=psi.mean_x(),
        var_x=psi.var_x(),
        mean_mv=mean_mv,
    )
