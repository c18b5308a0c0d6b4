"""Stochastic particle trajectories drawn from the entropic transition probability.

Each particle moves by x' = x + b dt + sqrt(hbar dt / m) xi with the drift b
taken from the current wave function. Ensembles started from |psi|^2 should
track |psi(t)|^2 at every later time; `run_ensemble` measures that directly.

Random draws come from counter-based streams keyed by (seed, trajectory id,
step), so the output does not depend on how the trajectories are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .wavefield import (GaugeField, HydroFields, Stepper, WaveFunction, WavefieldError,
                        _as_gauge, decompose)

__all__ = [
    "SamplerConfig",
    "TrajectoryEnsemble",
    "COMEnsemble",
    "HJGap",
    "sample_step",
    "initial_positions",
    "histogram",
    "l1_distance",
    "run_ensemble",
    "com_ensemble",
    "hamilton_jacobi_gap",
    "ESCAPE_LIMIT",
]

ESCAPE_LIMIT = 0.01
# counter steps reserved for the initial-position draws (dynamics use 0, 1, 2, ...)
_INIT_CELL_STEP = 1 << 62
_INIT_OFFSET_STEP = (1 << 62) + 1


@dataclass(frozen=True)
class SamplerConfig:
    dt: float
    steps: int
    checkpoint_every: int | None = None
    refresh_every: int = 1
    interpolation: str = "linear"
    boundary_policy: str = "flag-and-freeze"

    def __post_init__(self):
        if self.dt <= 0 or self.steps < 0:
            raise ValueError("sampler needs dt > 0 and steps >= 0")
        if not 1 <= self.refresh_every <= 10:
            raise ValueError("fields must be refreshed at least every 10 steps")
        if self.interpolation != "linear":
            raise ValueError("only linear drift interpolation is supported")
        if self.boundary_policy != "flag-and-freeze":
            raise ValueError("only the flag-and-freeze boundary policy is supported")

    @property
    def every(self) -> int:
        return self.checkpoint_every or max(self.steps, 1)


@dataclass
class TrajectoryEnsemble:
    seed: int
    times: np.ndarray
    positions: np.ndarray          # (checkpoints, n_traj)
    escaped: np.ndarray            # (checkpoints, n_traj) bool
    l1: np.ndarray                 # L1 distance to |psi|^2 dx per checkpoint
    fallback_steps: int = 0
    states: list = field(default_factory=list, repr=False)

    @property
    def n_traj(self) -> int:
        return self.positions.shape[1]

    @property
    def escaped_fraction(self) -> float:
        return float(self.escaped[-1].mean()) if self.n_traj else 0.0

    @property
    def valid(self) -> bool:
        return self.escaped_fraction <= ESCAPE_LIMIT

    def moments(self) -> list[dict]:
        out = []
        for t, x, esc in zip(self.times, self.positions, self.escaped):
            live = x[~esc]
            out.append({"t": float(t), "mean": float(live.mean()), "var": float(live.var()),
                        "escaped": int(esc.sum())})
        return out

    def rows(self):
        """(traj_id, t, x, escaped) records in checkpoint-major order."""
        ids = np.arange(self.n_traj)
        for t, x, esc in zip(self.times, self.positions, self.escaped):
            for i in ids:
                yield int(i), float(t), float(x[i]), bool(esc[i])


def _field_arrays(fields: HydroFields):
    drift = np.ascontiguousarray(np.nan_to_num(fields.b, nan=0.0))
    valid = np.ascontiguousarray(fields.vmask.astype(np.uint8))
    return drift, valid


def sample_step(x: np.ndarray, fields: HydroFields, dt: float, seed: int,
                traj_ids: np.ndarray, step: int, escaped: np.ndarray | None = None) -> int:
    """Advance positions ``x`` in place by one Euler-Maruyama step.

    Particles in a cell touching an invalid (near-node) point take a
    pure-fluctuation step; their number is returned. Particles leaving the
    grid are frozen and flagged in ``escaped``.
    """
    if escaped is None:
        escaped = np.zeros(x.shape[0], dtype=np.uint8)
    drift, valid = _field_arrays(fields)
    noise = math.sqrt(fields.units.hbar * dt / fields.units.mass)
    return _backend.current.sample_step(x, escaped, drift, valid, fields.grid.x_min,
                                        fields.grid.dx, dt, noise, seed,
                                        np.ascontiguousarray(traj_ids, dtype=np.uint64), step)


def initial_positions(psi: WaveFunction, n_traj: int, seed: int,
                      traj_ids: np.ndarray | None = None) -> np.ndarray:
    """Inverse-CDF draws from |psi|^2, uniform within the cell around each grid point."""
    grid = psi.grid
    ids = np.arange(n_traj, dtype=np.uint64) if traj_ids is None else traj_ids
    mass = psi.density * grid.dx
    cdf = np.cumsum(mass)
    cdf /= cdf[-1]
    u = _backend.current.counter_uniforms(seed, ids, _INIT_CELL_STEP)
    cell = np.minimum(np.searchsorted(cdf, u, side="right"), grid.n - 1)
    w = _backend.current.counter_uniforms(seed, ids, _INIT_OFFSET_STEP)
    x = grid.x[cell] + (w - 0.5) * grid.dx
    return np.clip(x, grid.x_min, grid.x_max)


def histogram(x: np.ndarray, escaped: np.ndarray, grid) -> np.ndarray:
    """Fraction of all trajectories in each grid cell [x_i - dx/2, x_i + dx/2)."""
    live = x[~escaped.astype(bool)]
    idx = np.floor((live - grid.x_min) / grid.dx + 0.5).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < grid.n)]
    return np.bincount(idx, minlength=grid.n) / max(x.shape[0], 1)


def l1_distance(x: np.ndarray, escaped: np.ndarray, psi: WaveFunction) -> float:
    return float(np.abs(histogram(x, escaped, psi.grid) - psi.density * psi.grid.dx).sum())


def run_ensemble(psi: WaveFunction, V=None, config: SamplerConfig = None, seed: int = 0,
                 n_traj: int = 10_000, gauge: GaugeField | None = None) -> TrajectoryEnsemble:
    """Sample trajectories alongside the Crank-Nicolson evolution of ``psi``.

    The wave function is advanced with the sampler time step, and drift fields
    are refreshed every ``config.refresh_every`` steps.
    """
    if config is None:
        raise ValueError("a SamplerConfig is required")
    gauge = _as_gauge(V, gauge)
    stepper = Stepper(psi, gauge, config.dt)
    ids = np.arange(n_traj, dtype=np.uint64)
    x = np.ascontiguousarray(initial_positions(psi, n_traj, seed, ids))
    esc = np.zeros(n_traj, dtype=np.uint8)
    times, positions, flags, l1, states = [psi.t], [x.copy()], [esc.astype(bool)], [], [psi]
    l1.append(l1_distance(x, esc, psi))
    state = psi
    fallback = 0
    fields = None
    for step in range(config.steps):
        if step % config.refresh_every == 0:
            fields = decompose(state, gauge if gauge.has_vector_potential else None)
        fallback += sample_step(x, fields, config.dt, seed, ids, step, esc)
        stepper.advance(1)
        state = stepper.state()
        if (step + 1) % config.every == 0 or step + 1 == config.steps:
            times.append(state.t)
            positions.append(x.copy())
            flags.append(esc.astype(bool))
            l1.append(l1_distance(x, esc, state))
            states.append(state)
    return TrajectoryEnsemble(seed, np.array(times), np.vstack(positions), np.vstack(flags),
                              np.array(l1), fallback, states)


@dataclass
class COMEnsemble:
    n_particles: int
    dt: float
    paths: np.ndarray       # (n_ensemble, steps + 1) centre-of-mass positions
    escaped: int

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.paths, axis=1)

    @property
    def step_variance(self) -> float:
        """Variance of the per-step centre-of-mass displacement, pooled over steps."""
        inc = self.increments
        return float(np.mean(inc.var(axis=0, ddof=1)))

    @property
    def path_spread(self) -> np.ndarray:
        return self.paths.var(axis=0, ddof=1)


def com_ensemble(n_particles: int, psi: WaveFunction, V=None, config: SamplerConfig = None,
                 seed: int = 0, n_ensemble: int = 10_000) -> COMEnsemble:
    """Centre of mass of ``n_particles`` independent identical particles.

    Every particle follows the single-particle sampler in the same external
    field; R = mean position. The per-step variance of R should be
    (hbar dt / m) / N.
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    if config is None:
        raise ValueError("a SamplerConfig is required")
    gauge = _as_gauge(V)
    stepper = Stepper(psi, gauge, config.dt)
    total = n_particles * n_ensemble
    ids = np.arange(total, dtype=np.uint64)
    x = np.ascontiguousarray(initial_positions(psi, total, seed, ids))
    esc = np.zeros(total, dtype=np.uint8)
    paths = [x.reshape(n_ensemble, n_particles).mean(axis=1)]
    state = psi
    for step in range(config.steps):
        if step % config.refresh_every == 0:
            fields = decompose(state)
        sample_step(x, fields, config.dt, seed, ids, step, esc)
        stepper.advance(1)
        state = stepper.state()
        paths.append(x.reshape(n_ensemble, n_particles).mean(axis=1))
    n_esc = int(esc.sum())
    if n_esc > ESCAPE_LIMIT * total:
        raise WavefieldError(f"{n_esc} of {total} particles escaped the grid")
    return COMEnsemble(n_particles, config.dt, np.column_stack(paths), n_esc)


@dataclass(frozen=True)
class HJGap:
    quantum: float      # rho-weighted mean |Q|
    kinetic: float      # rho-weighted mean kinetic term
    ratio: float | None

    def as_dict(self):
        return {"quantum_term": self.quantum, "kinetic_term": self.kinetic, "ratio": self.ratio}


def hamilton_jacobi_gap(psi: WaveFunction, mass: float | None = None) -> HJGap:
    """Compare the quantum potential with the classical kinetic term.

    Q = (hbar^2 / 2M) R''/R and K = (hbar d phi)^2 / 2M, both averaged over rho.
    A small ratio means the phase equation has reduced to Hamilton-Jacobi form.
    """
    f = decompose(psi)
    units = psi.units
    M = units.mass if mass is None else mass
    dx = psi.grid.dx
    R = np.sqrt(f.rho)
    ok = f.vmask
    lap = (np.roll(R, -1) - 2 * R + np.roll(R, 1)) / dx ** 2
    Q = units.hbar ** 2 / (2 * M) * lap[ok] / R[ok]
    dphi = f.v[ok] * units.mass / units.hbar
    K = (units.hbar * dphi) ** 2 / (2 * M)
    w = f.rho[ok] * dx
    q = float(np.sum(w * np.abs(Q)))
    k = float(np.sum(w * K))
    return HJGap(q, k, q / k if k > 0 else None)
