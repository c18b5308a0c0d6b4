"""Relative entropy and maximum-entropy updating with moment constraints.

Distributions live either on a discrete index set (weights are probabilities)
or on a uniform 1-D grid (weights are densities, masses are ``weight * dx``).
All sums over a grid use the midpoint rule with the grid spacing.

The solver works on the convex dual

    D(lam) = log Z(lam) + sum_r lam_r F_r,   Z = sum_i q_i exp(-sum_r lam_r f_r(x_i))

with damped Newton steps. Degenerate constraint systems are sorted into the
four classes below before the dual is touched.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

__all__ = [
    "Classification",
    "Distribution",
    "Moment",
    "Variance",
    "ConstraintSet",
    "MaxEntSolution",
    "InferenceError",
    "relative_entropy",
    "maximize_entropy",
    "classify_constraints",
    "bayes_update",
    "bayes_update_via_maxent",
    "compose_likelihood",
    "marginalize",
    "expectation",
    "variance",
    "gaussian_density",
]

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
DIVERGENCE_NORM = 1e8
RANK_TOL = 1e-10


class InferenceError(ValueError):
    pass


class Classification(str, enum.Enum):
    WELL = "well"
    FULLY = "fully"
    OVER = "over"
    UNDER = "under"


@dataclass(frozen=True)
class Distribution:
    """Probability weights on a discrete support or a uniform grid.

    ``points`` are the support coordinates used when evaluating constraint
    functions (defaults to ``0..n-1`` for discrete supports).
    """

    weights: np.ndarray
    dx: float | None = None
    x_min: float = 0.0
    points: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InferenceError("weights must be finite and nonnegative")
        if self.dx is not None and self.dx <= 0:
            raise InferenceError("grid spacing must be positive")
        total = w.sum() * (self.dx or 1.0)
        tol = 1e-12 if self.dx is None else 1e-10
        if abs(total - 1.0) > tol:
            raise InferenceError(f"distribution not normalized (total {total!r})")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.points is None:
            if self.dx is None:
                pts = np.arange(w.shape[0], dtype=float) if w.ndim == 1 else None
            else:
                pts = self.x_min + self.dx * np.arange(w.shape[0])
        else:
            pts = np.asarray(self.points, dtype=float)
            if pts.shape != w.shape[:1]:
                raise InferenceError("points must match the support size")
        object.__setattr__(self, "points", pts)

    @classmethod
    def discrete(cls, weights, points=None) -> "Distribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), points=points)

    @classmethod
    def uniform(cls, n: int, points=None) -> "Distribution":
        return cls(np.full(n, 1.0 / n), points=points)

    @classmethod
    def on_grid(cls, x_min: float, dx: float, density) -> "Distribution":
        rho = np.asarray(density, dtype=float)
        return cls(rho / (rho.sum() * dx), dx=dx, x_min=x_min)

    @classmethod
    def uniform_grid(cls, x_min: float, dx: float, n: int) -> "Distribution":
        return cls.on_grid(x_min, dx, np.ones(n))

    @property
    def is_grid(self) -> bool:
        return self.dx is not None

    @property
    def measure(self) -> float:
        return self.dx if self.dx is not None else 1.0

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.measure

    def with_masses(self, masses: np.ndarray) -> "Distribution":
        m = np.asarray(masses, dtype=float)
        m = m / m.sum()
        return Distribution(m / self.measure, dx=self.dx, x_min=self.x_min, points=self.points)

    def same_support(self, other: "Distribution") -> bool:
        if self.weights.shape != other.weights.shape or self.dx != other.dx:
            return False
        if self.points is None or other.points is None:
            return self.points is other.points
        return bool(np.array_equal(self.points, other.points))


def relative_entropy(p: Distribution, q: Distribution) -> float:
    """S[p, q] = -sum p log(p/q), with 0 log 0 = 0. Always <= 0."""
    if not p.same_support(q):
        raise InferenceError("p and q live on different supports")
    pw, qw = p.weights, q.weights
    nz = pw > 0
    if np.any(qw[nz] == 0):
        raise InferenceError("p is not absolutely continuous with respect to q")
    return float(-np.sum(pw[nz] * np.log(pw[nz] / qw[nz])) * p.measure)


@dataclass(frozen=True)
class Moment:
    """Expectation constraint <f> = value; ``f`` is sampled on the support."""

    f: Callable[[np.ndarray], np.ndarray] | np.ndarray
    value: float

    def sample(self, points: np.ndarray) -> np.ndarray:
        vals = self.f(points) if callable(self.f) else self.f
        vals = np.broadcast_to(np.asarray(vals, dtype=float), points.shape).copy()
        if not np.all(np.isfinite(vals)):
            raise InferenceError("constraint function is not finite on the support")
        return vals


@dataclass(frozen=True)
class Variance:
    """Central second moment <(x - mean)^2> = value.

    With ``mean=None`` the mean is left free, which makes the problem
    underconstrained: every mean attains the same entropy.
    """

    value: float
    mean: float | None = None


@dataclass
class ConstraintSet:
    constraints: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)

    @classmethod
    def of(cls, *constraints) -> "ConstraintSet":
        return cls(list(constraints))


@dataclass
class MaxEntSolution:
    posterior: Distribution | None
    multipliers: np.ndarray
    log_partition: float
    achieved_entropy: float
    classification: Classification
    converged: bool = True
    iterations: int = 0
    dual_trace: list = field(default_factory=list)
    diagnostic: str = ""


def _moment_matrix(prior: Distribution, constraints: ConstraintSet):
    if prior.points is None:
        raise InferenceError("prior needs 1-D support points to evaluate constraints")
    rows, targets = [], []
    for c in constraints:
        if isinstance(c, Moment):
            rows.append(c.sample(prior.points))
            targets.append(float(c.value))
        elif isinstance(c, Variance):
            if c.mean is None:
                raise InferenceError("free-mean variance is handled by maximize_entropy")
            rows.append((prior.points - c.mean) ** 2)
            targets.append(float(c.value))
        else:
            raise InferenceError(f"unknown constraint {c!r}")
    if not rows:
        return np.zeros((0, prior.weights.shape[0])), np.zeros(0)
    return np.vstack(rows), np.asarray(targets)


def _tol_for(vals: np.ndarray) -> float:
    return 1e-12 * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)


def _reduce_faces(F, targets, support):
    """Restrict the support whenever a target sits at an extreme of its f_r.

    Returns (support mask, reason) or (None, reason) when infeasible.
    """
    support = support.copy()
    changed = True
    while changed:
        changed = False
        for r in range(F.shape[0]):
            vals = F[r, support]
            if vals.size == 0:
                return None, "empty support"
            lo, hi, tol = vals.min(), vals.max(), _tol_for(vals)
            t = targets[r]
            if t < lo - tol or t > hi + tol:
                return None, f"target {t!r} of constraint {r} outside [{lo!r}, {hi!r}]"
            if hi - lo <= tol:
                continue
            if abs(t - lo) <= tol:
                keep = F[r] <= lo + tol
            elif abs(t - hi) <= tol:
                keep = F[r] >= hi - tol
            else:
                continue
            new = support & keep
            if new.sum() < support.sum():
                support, changed = new, True
    return support, ""


def _lp_feasible(F, targets, q):
    n = F.shape[1]
    A = np.vstack([np.ones(n), F])
    b = np.concatenate([[1.0], targets])
    res = linprog(np.zeros(n), A_eq=A, b_eq=b, bounds=[(0, None)] * n, method="highs")
    return res.status == 0


def _dual(lam, F, targets, logq):
    logits = logq - lam @ F
    logZ = logsumexp(logits)
    return logZ + lam @ targets, logits - logZ


def _newton(F, targets, logq):
    m = F.shape[0]
    lam = np.zeros(m)
    val, logp = _dual(lam, F, targets, logq)
    trace = [val]
    hess_ratio = 1.0
    for it in range(NEWTON_MAX_ITER + 1):
        p = np.exp(logp)
        mean = F @ p
        grad = targets - mean
        if m == 0 or np.max(np.abs(grad)) <= NEWTON_TOL:
            return lam, logp, val, trace, it, True, hess_ratio
        centered = F - mean[:, None]
        H = (centered * p) @ centered.T
        ev = np.linalg.eigvalsh(H)
        hess_ratio = ev[0] / ev[-1] if ev[-1] > 0 else 0.0
        step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            new_val, new_logp = _dual(lam + t * step, F, targets, logq)
            if new_val <= val + 1e-4 * t * (grad @ step) or t < 1e-12:
                break
            t *= 0.5
        if new_val > val:
            return lam, logp, val, trace, it, False, hess_ratio
        lam = lam + t * step
        val, logp = new_val, new_logp
        trace.append(val)
        if np.linalg.norm(lam) > DIVERGENCE_NORM:
            return lam, logp, val, trace, it, False, hess_ratio
    return lam, logp, val, trace, NEWTON_MAX_ITER, False, hess_ratio


def _solve_linear(prior: Distribution, constraints: ConstraintSet) -> MaxEntSolution:
    F, targets = _moment_matrix(prior, constraints)
    n = prior.weights.shape[0]
    q = prior.masses
    base = q > 0
    m = F.shape[0]
    nan_lam = np.full(m, np.nan)

    def over(msg):
        return MaxEntSolution(None, nan_lam, math.nan, math.nan, Classification.OVER,
                              converged=False, diagnostic=msg)

    support, msg = _reduce_faces(F, targets, base)
    if support is None:
        return over(msg)
    idx = np.flatnonzero(support)
    Fs, qs = F[:, idx], q[idx]
    if not _lp_feasible(Fs, targets, qs):
        return over("constraints are jointly infeasible (linear program has no solution)")

    A = np.vstack([np.ones(idx.size), Fs])
    rank = np.linalg.matrix_rank(A, tol=1e-10 * max(1.0, np.abs(A).max()))
    if rank >= idx.size:
        b = np.concatenate([[1.0], targets])
        ps = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.any(ps < -1e-12) or np.max(np.abs(A @ ps - b)) > 1e-9:
            return over("unique solution of the constraint equations is not a distribution")
        ps = np.clip(ps, 0.0, None)
        masses = np.zeros(n)
        masses[idx] = ps / ps.sum()
        post = prior.with_masses(masses)
        lam = nan_lam
        if idx.size == n and np.all(ps > 0):
            lam, _, val, _, _, _, _ = _newton(Fs, targets, np.log(qs / qs.sum()))
            log_z = val - lam @ targets
        else:
            log_z = math.nan
        return MaxEntSolution(post, lam, log_z, relative_entropy(post, prior),
                              Classification.FULLY,
                              diagnostic="feasible set is a single point")

    logq = np.log(qs)
    lam, logp, val, trace, iters, ok, hess_ratio = _newton(Fs, targets, logq)
    masses = np.zeros(n)
    masses[idx] = np.exp(logp)
    if not ok:
        resid = np.max(np.abs(Fs @ np.exp(logp) - targets)) if m else 0.0
        if np.linalg.norm(lam) > DIVERGENCE_NORM:
            return over(f"dual diverged (|lambda| > {DIVERGENCE_NORM:g}, residual {resid:.3g})")
    post = prior.with_masses(masses)
    cls = Classification.WELL
    diag = ""
    if m and hess_ratio < RANK_TOL:
        cls = Classification.UNDER
        diag = "dual Hessian is rank deficient; multipliers are not unique"
    if idx.size < n:
        diag = (diag + "; " if diag else "") + f"support reduced to {idx.size} of {n} points"
    return MaxEntSolution(post, lam, val - lam @ targets, relative_entropy(post, prior), cls,
                          converged=ok, iterations=iters, dual_trace=trace, diagnostic=diag)


def _free_mean_variance(prior, constraints):
    free = [c for c in constraints if isinstance(c, Variance) and c.mean is None]
    if len(free) > 1:
        raise InferenceError("at most one free-mean variance constraint is supported")
    var = free[0]
    rest = [c for c in constraints if c is not var]
    pts = prior.points
    center = float(np.sum(prior.masses * pts))

    def solve_at(mean):
        return _solve_linear(prior, ConstraintSet(rest + [Variance(var.value, mean)]))

    sol = solve_at(center)
    if sol.classification is Classification.OVER:
        return sol
    # probe the entropy along the free mean; a flat profile means many maximizers
    h = 0.5 * math.sqrt(max(var.value, 0.0)) or (pts[1] - pts[0] if pts.size > 1 else 1.0)
    probes = [solve_at(center + s * h) for s in (-1.0, 1.0)]
    ents = [sol.achieved_entropy] + [p.achieved_entropy for p in probes if p.posterior is not None]
    spread = max(ents) - min(ents)
    if len(ents) == 3 and spread <= 1e-9 * max(1.0, abs(sol.achieved_entropy)):
        sol.classification = Classification.UNDER
        sol.diagnostic = (f"entropy independent of the free mean (spread {spread:.2e}); "
                          f"reporting the maximizer centred at {center:.6g}")
    return sol


def maximize_entropy(prior: Distribution, constraints: ConstraintSet) -> MaxEntSolution:
    """Posterior closest to ``prior`` (in relative entropy) satisfying ``constraints``.

    Overconstrained inputs return ``posterior=None``; fully-constrained inputs
    are solved directly from the constraint equations.
    """
    constraints = constraints if isinstance(constraints, ConstraintSet) else ConstraintSet(list(constraints))
    if any(isinstance(c, Variance) and c.mean is None for c in constraints):
        return _free_mean_variance(prior, constraints)
    return _solve_linear(prior, constraints)


def classify_constraints(prior: Distribution, constraints: ConstraintSet) -> Classification:
    return maximize_entropy(prior, constraints).classification


def _as_joint(prior_joint) -> np.ndarray:
    q = np.asarray(prior_joint.weights if isinstance(prior_joint, Distribution) else prior_joint,
                   dtype=float)
    if q.ndim != 2:
        raise InferenceError("joint prior must be a 2-D array indexed [theta, d]")
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
        raise InferenceError("joint prior must be a normalized nonnegative array")
    return q


def bayes_update(prior_joint, observed: int) -> Distribution:
    """q(theta | D) = q(theta) q(D|theta) / q(D) from a joint q(theta, d)."""
    q = _as_joint(prior_joint)
    col = q[:, observed]
    evidence = col.sum()
    if evidence <= 0:
        raise InferenceError(f"observed value {observed} has zero prior evidence")
    return Distribution(col / evidence)


def bayes_update_via_maxent(prior_joint, observed: int) -> Distribution:
    """Same update obtained by maximizing the joint entropy under p(d) = delta(d - D)."""
    q = _as_joint(prior_joint)
    n_theta, n_d = q.shape
    flat = Distribution(q.ravel())
    d_index = np.tile(np.arange(n_d), n_theta)
    cons = ConstraintSet([Moment((d_index == j).astype(float), 1.0 if j == observed else 0.0)
                          for j in range(n_d)])
    sol = maximize_entropy(flat, cons)
    if sol.posterior is None:
        raise InferenceError(f"observed value {observed} has zero prior evidence")
    joint = sol.posterior.weights.reshape(n_theta, n_d)
    return marginalize(Distribution(joint), keep=0)


def compose_likelihood(outcome_model, data_model, dx: float | None = None) -> np.ndarray:
    """q(D|theta) = sum_x q(x|theta) q(D|x), times ``dx`` for a grid in x.

    ``outcome_model`` is indexed [theta, x]; ``data_model`` is indexed [x, D].
    """
    qx = np.asarray(outcome_model, dtype=float)
    qd = np.asarray(data_model, dtype=float)
    if qx.ndim != 2 or qd.ndim != 2 or qx.shape[1] != qd.shape[0]:
        raise InferenceError("outcome and data models do not share the x support")
    return (qx @ qd) * (dx if dx is not None else 1.0)


def marginalize(dist: Distribution, keep: int = 0) -> Distribution:
    w = dist.weights
    if w.ndim == 1:
        return dist
    axes = tuple(a for a in range(w.ndim) if a != keep)
    return Distribution(w.sum(axis=axes))


def expectation(dist: Distribution, f) -> float:
    vals = f(dist.points) if callable(f) else np.broadcast_to(np.asarray(f, float), dist.weights.shape)
    return float(np.sum(dist.masses * vals))


def variance(dist: Distribution, f=None) -> float:
    f = (lambda x: x) if f is None else f
    vals = f(dist.points) if callable(f) else np.broadcast_to(np.asarray(f, float), dist.weights.shape)
    mean = float(np.sum(dist.masses * vals))
    return float(np.sum(dist.masses * (vals - mean) ** 2))


def gaussian_density(x: Sequence[float] | np.ndarray, mean: float, var: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
