"""Position-only measurement.

A device is an orthonormal family |a_i> on the grid together with pointer
positions x_i; measuring means evolving unitarily so that |a_i> -> |x_i>
and then observing position. The Born rule p_i = |<a_i|psi>|^2 follows from
the unitary and is checked against the direct overlaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .inference import Classification
from .wavefield import Grid1D, UnitSystem, WaveFunction, WavefieldError, decompose

__all__ = [
    "MeasurementError",
    "MeasurementDevice",
    "AmplifierModel",
    "BornResult",
    "OutcomeReport",
    "Feasibility",
    "born_probabilities",
    "apply_device",
    "pointer_distribution",
    "simulate_outcomes",
    "chi_square_pvalue",
    "expectation_value",
    "eigenvalue_density",
    "filter_update",
    "density_constrained_update",
    "amplify",
    "preparation_feasibility",
    "device_from_dict",
    "device_to_dict",
    "ORTHO_TOL",
]

ORTHO_TOL = 1e-10
NO_CLICK = "no-click"


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MeasurementDevice:
    """Orthonormal basis states (rows of ``basis``) with pointer grid indices."""

    grid: Grid1D
    basis: np.ndarray
    pointer: np.ndarray
    eigenvalues: np.ndarray
    label: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=complex))
        k = B.shape[0]
        if B.shape[1] != self.grid.n:
            raise MeasurementError("basis states do not match the grid")
        if k > self.grid.n:
            raise MeasurementError("more basis states than grid points")
        gram = (B.conj() @ B.T) * self.grid.dx
        dev = float(np.max(np.abs(gram - np.eye(k))))
        if dev > ORTHO_TOL:
            raise MeasurementError(f"basis is not orthonormal (deviation {dev:.3g})")
        ptr = np.asarray(self.pointer)
        if ptr.shape != (k,) or not np.issubdtype(ptr.dtype, np.integer):
            raise MeasurementError("need one integer pointer index per basis state")
        if len(set(ptr.tolist())) != k:
            raise MeasurementError("pointer map is not injective")
        if ptr.min() < 0 or ptr.max() >= self.grid.n:
            raise MeasurementError("pointer positions must lie on the grid")
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.shape != (k,):
            raise MeasurementError("need one eigenvalue per basis state")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "pointer", ptr.astype(np.int64))
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def n_states(self) -> int:
        return self.basis.shape[0]

    @property
    def pointer_x(self) -> np.ndarray:
        return self.grid.x[self.pointer]

    def state(self, k: int, boundary: str = "dirichlet", units: UnitSystem | None = None) -> WaveFunction:
        return WaveFunction(self.grid, self.basis[k], boundary=boundary, units=units or UnitSystem())

    def overlaps(self, psi: WaveFunction | np.ndarray) -> np.ndarray:
        """Expansion coefficients c_i = <a_i|psi>."""
        amp = psi.psi if isinstance(psi, WaveFunction) else np.asarray(psi, dtype=complex)
        return (self.basis.conj() @ amp) * self.grid.dx

    def unitary(self) -> np.ndarray:
        """Grid-sized U with U|a_i> = |x_i>, completed unitarily on the complement.

        Acts on amplitudes scaled to unit Euclidean norm (psi * sqrt(dx)).
        """
        cached = self.__dict__.get("_unitary")
        if cached is not None:
            return cached
        n, k = self.grid.n, self.n_states
        A = self.basis.T * math.sqrt(self.grid.dx)               # n x k, orthonormal columns
        comp_a = null_space(A.conj().T) if k < n else np.zeros((n, 0))
        X = np.zeros((n, n), dtype=complex)
        X[self.pointer, np.arange(k)] = 1
        rest = np.setdiff1d(np.arange(n), self.pointer)
        X[rest, np.arange(k, n)] = 1
        U = X @ np.hstack([A, comp_a]).conj().T
        dev = float(np.max(np.abs(U.conj().T @ U - np.eye(n))))
        if dev > ORTHO_TOL:
            raise MeasurementError(f"device unitary deviates from unitarity by {dev:.3g}")
        U.setflags(write=False)
        object.__setattr__(self, "_unitary", U)
        return U

    # --- presets -----------------------------------------------------------------

    @classmethod
    def harmonic(cls, grid: Grid1D, n_states: int, omega: float = 1.0,
                 units: UnitSystem | None = None, pointer=None) -> "MeasurementDevice":
        """Oscillator eigenfunctions k = 0..n-1 with energies hbar omega (k + 1/2)."""
        units = units or UnitSystem()
        a = units.mass * omega / units.hbar
        y = math.sqrt(a) * grid.x
        funcs = np.empty((n_states, grid.n))
        funcs[0] = (a / math.pi) ** 0.25 * np.exp(-y * y / 2)
        if n_states > 1:
            funcs[1] = math.sqrt(2) * y * funcs[0]
        for j in range(2, n_states):
            funcs[j] = math.sqrt(2 / j) * y * funcs[j - 1] - math.sqrt((j - 1) / j) * funcs[j - 2]
        ev = units.hbar * omega * (np.arange(n_states) + 0.5)
        return cls(grid, funcs, _default_pointer(grid, n_states) if pointer is None else pointer,
                   ev, "harmonic", {"n_states": n_states, "omega": omega})

    @classmethod
    def plane_waves(cls, grid: Grid1D, modes, units: UnitSystem | None = None,
                    pointer=None) -> "MeasurementDevice":
        """Periodic plane waves exp(2 pi i m x / L) with momenta hbar k."""
        units = units or UnitSystem()
        modes = np.asarray(modes, dtype=int)
        k = 2 * np.pi * modes / grid.length
        funcs = np.exp(1j * np.outer(k, grid.x - grid.x_min)) / math.sqrt(grid.length)
        return cls(grid, funcs, _default_pointer(grid, len(modes)) if pointer is None else pointer,
                   units.hbar * k, "plane_waves", {"modes": modes.tolist()})

    @classmethod
    def grid_deltas(cls, grid: Grid1D, indices) -> "MeasurementDevice":
        """Position eigenstates delta_i / sqrt(dx); pointer = the same points."""
        idx = np.asarray(indices, dtype=np.int64)
        funcs = np.zeros((len(idx), grid.n))
        funcs[np.arange(len(idx)), idx] = 1 / math.sqrt(grid.dx)
        return cls(grid, funcs, idx, grid.x[idx], "grid_deltas", {"indices": idx.tolist()})

    @classmethod
    def random(cls, grid: Grid1D, n_states: int, rng: np.random.Generator,
               pointer=None) -> "MeasurementDevice":
        z = rng.normal(size=(grid.n, n_states)) + 1j * rng.normal(size=(grid.n, n_states))
        q, _ = np.linalg.qr(z)
        funcs = q.T / math.sqrt(grid.dx)
        ev = np.arange(n_states, dtype=float)
        return cls(grid, funcs, _default_pointer(grid, n_states) if pointer is None else pointer,
                   ev, "random", {"n_states": n_states})


def _default_pointer(grid: Grid1D, k: int) -> np.ndarray:
    """k equally spaced, increasing pointer indices in the middle half of the grid."""
    stride = max(1, (grid.n // 2) // max(k, 1))
    return grid.n // 4 + stride * np.arange(k)


@dataclass(frozen=True)
class BornResult:
    probabilities: np.ndarray
    no_click: float

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())


def born_probabilities(psi: WaveFunction, device: MeasurementDevice) -> BornResult:
    """p_i = |<a_i|psi>|^2; mass outside the device subspace is the no-click outcome."""
    p = np.abs(device.overlaps(psi)) ** 2
    return BornResult(p, max(0.0, 1.0 - float(p.sum())))


def apply_device(psi: WaveFunction, device: MeasurementDevice) -> WaveFunction:
    """Unitary premeasurement: the state after U|a_i> -> |x_i>."""
    root = math.sqrt(device.grid.dx)
    out = device.unitary() @ (psi.psi * root) / root
    return psi.with_psi(out)


def pointer_distribution(psi_after: WaveFunction, device: MeasurementDevice) -> np.ndarray:
    """Probability of finding the particle at each pointer position x_i."""
    return np.abs(psi_after.psi[device.pointer]) ** 2 * device.grid.dx


@dataclass
class OutcomeReport:
    labels: list
    pointer_x: list
    probabilities: np.ndarray
    counts: np.ndarray
    seed: int

    def rows(self):
        for lab, px, p, c in zip(self.labels, self.pointer_x, self.probabilities, self.counts):
            yield lab, px, float(p), int(c)


def simulate_outcomes(psi: WaveFunction, device: MeasurementDevice, n_shots: int,
                      seed: int) -> OutcomeReport:
    """Multinomial outcome counts; a no-click category is added when mass leaks."""
    born = born_probabilities(psi, device)
    probs = list(born.probabilities)
    labels = list(range(device.n_states))
    px = [float(v) for v in device.pointer_x]
    if born.no_click > 1e-12:
        probs.append(born.no_click)
        labels.append(NO_CLICK)
        px.append(None)
    probs = np.array(probs)
    counts = np.random.default_rng(seed).multinomial(n_shots, probs / probs.sum())
    return OutcomeReport(labels, px, probs, counts, seed)


def chi_square_pvalue(report: OutcomeReport, min_expected: float = 5.0) -> float:
    """Pearson goodness-of-fit p-value of the counts against the Born probabilities.

    Cells with expected count below ``min_expected`` are pooled into one cell
    so the chi-square approximation holds.
    """
    from scipy.stats import chisquare

    p = report.probabilities / report.probabilities.sum()
    n = report.counts.sum()
    expected = p * n
    big = expected >= min_expected
    obs = list(report.counts[big])
    exp = list(expected[big])
    if (~big).any() and expected[~big].sum() > 0:
        obs.append(report.counts[~big].sum())
        exp.append(expected[~big].sum())
    if len(obs) < 2:
        return 1.0
    return float(chisquare(obs, exp).pvalue)


def expectation_value(psi: WaveFunction, device: MeasurementDevice, eigenvalues=None) -> float:
    lam = device.eigenvalues if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
    return float(np.dot(lam, born_probabilities(psi, device).probabilities))


def eigenvalue_density(psi: WaveFunction, device: MeasurementDevice):
    """Continuous-spectrum form: probability per unit eigenvalue, p_i / |da_i|.

    Requires eigenvalues monotone in the pointer order.
    """
    order = np.argsort(device.pointer)
    a = device.eigenvalues[order]
    da = np.diff(a)
    if not (np.all(da > 0) or np.all(da < 0)):
        raise MeasurementError("eigenvalues must be monotone along the pointer")
    p = born_probabilities(psi, device).probabilities[order]
    return a, p / np.abs(np.gradient(a))


def filter_update(psi: WaveFunction, device: MeasurementDevice, outcome: int,
                  tol: float = 1e-14) -> WaveFunction:
    """Post-select outcome k and undo the device: the result is |a_k>."""
    p = born_probabilities(psi, device).probabilities
    if not 0 <= outcome < device.n_states:
        raise MeasurementError(f"no outcome {outcome}")
    if p[outcome] <= tol:
        raise MeasurementError(f"outcome {outcome} has zero probability")
    return psi.with_psi(device.basis[outcome])


def density_constrained_update(psi: WaveFunction, rho_d, rho_min: float | None = None) -> WaveFunction:
    """Replace the density by rho_D keeping the entropy field S fixed.

    phi' = phi - 1/2 log(rho_D / rho), so S' = phi' + 1/2 log rho_D = S.
    """
    f = decompose(psi, rho_min=rho_min)
    rho_d = np.asarray(rho_d, dtype=float)
    if rho_d.shape != f.rho.shape or np.any(rho_d < 0):
        raise MeasurementError("target density must be a nonnegative grid array")
    if abs(float(rho_d.sum() * psi.grid.dx) - 1) > 1e-10:
        raise MeasurementError("target density is not normalized")
    if np.any((rho_d > 0) & ~f.mask):
        raise MeasurementError("target density is supported outside the valid region")
    with np.errstate(divide="ignore", invalid="ignore"):
        phi_new = np.where(f.mask, f.phi - 0.5 * np.log(rho_d / f.rho), 0.0)
    live = rho_d > 0
    amp = np.where(live, np.sqrt(rho_d) * np.exp(1j * np.where(live, phi_new, 0.0)), 0)
    return psi.with_psi(amp)


@dataclass(frozen=True)
class AmplifierModel:
    """reliability[alpha, x] = P(alpha | x); every column is a distribution."""

    reliability: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.reliability, dtype=float)
        if R.ndim != 2 or np.any(R < 0):
            raise MeasurementError("reliability must be a nonnegative matrix")
        if np.max(np.abs(R.sum(axis=0) - 1)) > 1e-12:
            raise MeasurementError("reliability columns must sum to one")
        object.__setattr__(self, "reliability", R)

    @classmethod
    def uniform(cls, n: int, diagonal: float) -> "AmplifierModel":
        off = (1 - diagonal) / (n - 1) if n > 1 else 0.0
        R = np.full((n, n), off)
        np.fill_diagonal(R, diagonal)
        return cls(R)

    @property
    def min_diagonal(self) -> float:
        return float(np.min(np.diag(self.reliability)))

    @property
    def is_good(self) -> bool:
        return self.min_diagonal >= 0.99


def amplify(position_probs, amplifier: AmplifierModel) -> np.ndarray:
    """P(alpha) = sum_x P(x) P(alpha|x)."""
    p = np.asarray(position_probs, dtype=float)
    if p.shape != (amplifier.reliability.shape[1],):
        raise MeasurementError("probabilities do not match the amplifier")
    return amplifier.reliability @ p


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    overlap: float
    classification: Classification


def preparation_feasibility(device_a: MeasurementDevice, outcome_a: int,
                            device_b: MeasurementDevice, outcome_b: int) -> Feasibility:
    """Can one state carry both eigenvalue constraints at once?

    Each constraint pins the state to one ray; the pair is satisfiable only if
    the two eigenstates coincide up to a global phase.
    """
    if device_a.grid != device_b.grid:
        raise MeasurementError("devices live on different grids")
    ov = abs(np.vdot(device_a.basis[outcome_a], device_b.basis[outcome_b]) * device_a.grid.dx)
    ok = ov >= 1 - 1e-10
    return Feasibility(bool(ok), float(ov), Classification.FULLY if ok else Classification.OVER)


# --- JSON description -------------------------------------------------------------------

def device_from_dict(spec: dict, grid: Grid1D, units: UnitSystem | None = None) -> MeasurementDevice:
    basis = dict(spec["basis"])
    preset = basis.pop("preset")
    pointer = spec.get("pointer_map")
    if pointer is not None:
        pointer = _pointer_indices(grid, pointer)
    if preset == "harmonic":
        dev = MeasurementDevice.harmonic(grid, int(basis["n_states"]), float(basis.get("omega", 1.0)),
                                         units, pointer)
    elif preset == "plane_waves":
        dev = MeasurementDevice.plane_waves(grid, basis["modes"], units, pointer)
    elif preset == "grid_deltas":
        dev = MeasurementDevice.grid_deltas(grid, _pointer_indices(grid, basis["positions"]))
    else:
        raise MeasurementError(f"unknown basis preset {preset!r}")
    if spec.get("eigenvalues") is not None:
        dev = MeasurementDevice(dev.grid, dev.basis, dev.pointer, spec["eigenvalues"], dev.label, dev.params)
    return dev


def _pointer_indices(grid: Grid1D, positions) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    idx = np.rint((pos - grid.x_min) / grid.dx).astype(np.int64)
    if np.any(np.abs(grid.x_min + idx * grid.dx - pos) > 1e-9 * grid.dx + 1e-12):
        raise MeasurementError("pointer positions must lie on grid points")
    return idx


def device_to_dict(device: MeasurementDevice) -> dict:
    basis = {"preset": device.label, **device.params}
    if device.label == "grid_deltas":
        basis = {"preset": "grid_deltas", "positions": device.pointer_x.tolist()}
    return {
        "basis": basis,
        "pointer_map": device.pointer_x.tolist(),
        "eigenvalues": device.eigenvalues.tolist(),
    }
