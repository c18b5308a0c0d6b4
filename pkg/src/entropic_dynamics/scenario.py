"""Scenario files and the pipelines behind each CLI subcommand.

A scenario is strict JSON (unknown keys are rejected) with a ``version``
field. Every runner writes CSV tables plus ``summary.json`` into the output
directory and returns the summary, whose ``checks`` map names to
``{value, tolerance, passed}``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from . import io as sio
from .expr import Expression, ExpressionError, parse_expression
from .frames import FrameMotion, verify_symmetry, verify_symmetry_refined
from .inference import (Classification, ConstraintSet, Distribution, InferenceError, Moment,
                        Variance, maximize_entropy)
from .measurement import (AmplifierModel, MeasurementError, amplify, apply_device,
                          born_probabilities, chi_square_pvalue, device_from_dict, device_to_dict, expectation_value,
                          filter_update, pointer_distribution, simulate_outcomes)
from .sampler import SamplerConfig, com_ensemble, hamilton_jacobi_gap, run_ensemble
from .wavefield import (GaugeField, Grid1D, UnitSystem, WaveFunction, WavefieldError, energy,
                        evolve, evolve_gauged, fokker_planck_residual,
                        gauge_transform, gaussian_packet, harmonic_ground_state, momentum_stats,
                        plane_wave)

__all__ = [
    "ScenarioError",
    "InfeasibleError",
    "Scenario",
    "MaxEntProblem",
    "load_scenario",
    "load_problem",
    "build_grid",
    "build_units",
    "build_state",
    "build_potential",
    "run_scenario",
    "run_maxent",
    "COMMANDS",
]

VERSION = 1


class ScenarioError(ValueError):
    """Invalid configuration or failed validation."""


class InfeasibleError(RuntimeError):
    """The requested problem has no solution (overconstrained)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


# --- schema -------------------------------------------------------------------------

class UnitsCfg(_Strict):
    hbar: PositiveFloat = 1.0
    mass: PositiveFloat = 1.0
    osmotic_mass: Optional[PositiveFloat] = None


class GridCfg(_Strict):
    dx: PositiveFloat
    n: Annotated[int, Field(ge=8)]
    x_min: Optional[float] = None
    center: float = 0.0


class GaussianCfg(_Strict):
    kind: Literal["gaussian"]
    x0: float = 0.0
    sigma0: PositiveFloat
    k0: float = 0.0


class GroundCfg(_Strict):
    kind: Literal["harmonic_ground"]
    omega: PositiveFloat = 1.0
    x0: float = 0.0


class PlaneWaveCfg(_Strict):
    kind: Literal["plane_wave"]
    mode: int


class SnapshotCfg(_Strict):
    kind: Literal["snapshot"]
    path: str


StateCfg = Annotated[Union[GaussianCfg, GroundCfg, PlaneWaveCfg, SnapshotCfg],
                     Field(discriminator="kind")]


class FreeCfg(_Strict):
    kind: Literal["free"]


class HarmonicCfg(_Strict):
    kind: Literal["harmonic"]
    omega: PositiveFloat = 1.0
    x0: float = 0.0


class LinearCfg(_Strict):
    kind: Literal["linear"]
    slope: float


class BarrierCfg(_Strict):
    kind: Literal["barrier"]
    height: float
    width: PositiveFloat
    center: float = 0.0


class ExprPotentialCfg(_Strict):
    kind: Literal["expression"]
    expression: str


PotentialCfg = Annotated[Union[FreeCfg, HarmonicCfg, LinearCfg, BarrierCfg, ExprPotentialCfg],
                         Field(discriminator="kind")]


class EvolutionChecks(_Strict):
    norm_drift_per_step: float = 1e-12
    energy_relative: Optional[float] = 1e-6
    variance_law_relative: Optional[float] = None
    stationary_density: Optional[float] = None


class EvolutionCfg(_Strict):
    dt: Optional[PositiveFloat] = None
    steps: Annotated[int, Field(ge=0)]
    checkpoint_every: Optional[PositiveInt] = None
    checks: EvolutionChecks = EvolutionChecks()


class GaugeCfg(_Strict):
    beta: float = 1.0
    vector_potential: Optional[str] = None
    transforms: list[str] = ["1.0", "x", "x*t"]
    density_tolerance: float = 1e-8
    phase_tolerance: float = 1e-6


class SamplerCfg(_Strict):
    n_traj: PositiveInt
    dt: PositiveFloat
    steps: Annotated[int, Field(ge=1)]
    checkpoint_every: Optional[PositiveInt] = None
    refresh_every: Annotated[int, Field(ge=1, le=10)] = 1
    l1_tolerance: Optional[float] = None
    scaling_n_traj: Optional[PositiveInt] = None


class FrameCfg(_Strict):
    kind: Literal["constant_velocity", "constant_acceleration", "expression"]
    v0: float = 0.0
    g: float = 0.0
    expression: Optional[str] = None
    t_end: PositiveFloat = 1.0
    dt: PositiveFloat
    n_checkpoints: PositiveInt = 8
    refine: bool = True
    density_tolerance: float = 1e-6
    phase_tolerance: float = 1e-6
    phase_floor: float = 1e-6


class BasisCfg(_Strict):
    preset: Literal["harmonic", "plane_waves", "grid_deltas"]
    n_states: Optional[PositiveInt] = None
    omega: Optional[PositiveFloat] = None
    modes: Optional[list[int]] = None
    positions: Optional[list[float]] = None


class DeviceCfg(_Strict):
    basis: BasisCfg
    pointer_map: Optional[list[float]] = None
    eigenvalues: Optional[list[float]] = None


class MeasurementCfg(_Strict):
    device: DeviceCfg
    n_shots: PositiveInt = 10_000
    chi2_seeds: PositiveInt = 100
    chi2_alpha: float = 1e-3
    filter_outcome: Optional[int] = None
    post_filter: Optional[EvolutionCfg] = None
    amplifier_diagonal: Optional[float] = None
    tolerance: float = 1e-10


class HJCfg(_Strict):
    grid: GridCfg
    state: GaussianCfg
    tolerance: float = 1e-3


class ClassicalCfg(_Strict):
    n_particles: list[PositiveInt] = [10, 100, 1000]
    n_ensemble: PositiveInt = 10_000
    dt: PositiveFloat
    steps: PositiveInt = 1
    slope_tolerance: float = 0.1
    hamilton_jacobi: Optional[HJCfg] = None


class UncertaintyCfg(_Strict):
    n_packets: PositiveInt = 20
    sigma_range: tuple[float, float] = (0.5, 2.0)
    k0_range: tuple[float, float] = (-3.0, 3.0)
    x0_range: tuple[float, float] = (-2.0, 2.0)
    identity_tolerance: float = 1e-6
    product_slack: float = 1e-9
    minimum_tolerance: float = 1e-6


class Scenario(_Strict):
    version: Literal[1]
    name: str
    description: str = ""
    seed: Annotated[int, Field(ge=0, lt=2 ** 64)] = 0
    units: UnitsCfg = UnitsCfg()
    grid: GridCfg
    boundary: Literal["dirichlet", "periodic"] = "dirichlet"
    initial_state: StateCfg
    potential: PotentialCfg = FreeCfg(kind="free")
    evolution: Optional[EvolutionCfg] = None
    gauge: Optional[GaugeCfg] = None
    sampler: Optional[SamplerCfg] = None
    frame: Optional[FrameCfg] = None
    measurement: Optional[MeasurementCfg] = None
    classical: Optional[ClassicalCfg] = None
    uncertainty: Optional[UncertaintyCfg] = None


class MomentCfg(_Strict):
    kind: Literal["moment"]
    f: Optional[str] = None
    values: Optional[list[float]] = None
    value: float


class VarianceCfg(_Strict):
    kind: Literal["variance"]
    value: float
    mean: Optional[float] = None


class MaxEntProblem(_Strict):
    version: Literal[1]
    name: str = "maxent"
    support: Optional[list[float]] = None
    grid: Optional[GridCfg] = None
    prior: Optional[list[float]] = None
    constraints: list[Annotated[Union[MomentCfg, VarianceCfg], Field(discriminator="kind")]]


# --- loading and building -----------------------------------------------------------

def _load(path, model):
    path = Path(path)
    try:
        text = path.read_text()
        raw = json.loads(text)
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict) or "version" not in raw:
        raise ScenarioError(f"{path}: missing 'version' field")
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def load_scenario(path) -> Scenario:
    return _load(path, Scenario)


def load_problem(path) -> MaxEntProblem:
    return _load(path, MaxEntProblem)


def build_grid(cfg: GridCfg) -> Grid1D:
    if cfg.x_min is not None:
        return Grid1D(cfg.x_min, cfg.dx, cfg.n)
    return Grid1D.centered(cfg.dx, cfg.n, cfg.center)


def build_units(cfg: UnitsCfg) -> UnitSystem:
    return UnitSystem(cfg.hbar, cfg.mass, cfg.osmotic_mass)


def build_state(cfg, grid: Grid1D, units: UnitSystem, boundary: str = "dirichlet",
                base_dir: Path | None = None) -> WaveFunction:
    if cfg.kind == "gaussian":
        return gaussian_packet(grid, cfg.x0, cfg.sigma0, cfg.k0, boundary=boundary, units=units)
    if cfg.kind == "harmonic_ground":
        psi = harmonic_ground_state(grid, cfg.omega, cfg.x0, units=units)
        return WaveFunction(grid, psi.psi, boundary=boundary, units=units)
    if cfg.kind == "plane_wave":
        if boundary != "periodic":
            raise ScenarioError("plane-wave states need a periodic boundary")
        return plane_wave(grid, 2 * math.pi * cfg.mode / grid.length, units=units)
    path = Path(cfg.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    psi = sio.load_snapshot(path)
    if psi.grid != grid:
        raise ScenarioError("snapshot grid differs from the scenario grid")
    return psi


def build_potential(cfg, grid: Grid1D, units: UnitSystem):
    """Scalar potential as an Expression, a grid array, or None for free motion."""
    if cfg.kind == "free":
        return None
    if cfg.kind == "harmonic":
        k = units.mass * cfg.omega ** 2
        return parse_expression(f"{0.5 * k!r}*(x - {cfg.x0!r})^2" if cfg.x0 >= 0
                                else f"{0.5 * k!r}*(x + {-cfg.x0!r})^2")
    if cfg.kind == "linear":
        return parse_expression(f"{cfg.slope!r}*x" if cfg.slope >= 0 else f"-{-cfg.slope!r}*x")
    if cfg.kind == "barrier":
        return np.where(np.abs(grid.x - cfg.center) <= 0.5 * cfg.width, cfg.height, 0.0)
    return parse_expression(cfg.expression)


def _describe(V) -> str:
    if V is None:
        return "0"
    if isinstance(V, Expression):
        return V.source
    return "barrier (grid array)"


def _check(value, tolerance, passed=None, **extra):
    value = None if value is None else float(value)
    ok = bool(value is not None and value <= tolerance) if passed is None else bool(passed)
    return {"value": value, "tolerance": tolerance, "passed": ok, **extra}


class _Context:
    def __init__(self, scenario: Scenario, base_dir: Path | None):
        self.sc = scenario
        self.base_dir = base_dir
        try:
            self.grid = build_grid(scenario.grid)
            self.units = build_units(scenario.units)
            self.V = build_potential(scenario.potential, self.grid, self.units)
            self.psi0 = build_state(scenario.initial_state, self.grid, self.units,
                                    scenario.boundary, base_dir)
        except (WavefieldError, ExpressionError, sio.SnapshotError) as exc:
            raise ScenarioError(str(exc)) from None

    def need(self, section):
        value = getattr(self.sc, section)
        if value is None:
            raise ScenarioError(f"scenario {self.sc.name!r} has no '{section}' section")
        return value


def _finish(out: Path, command: str, ctx_name: str, seed, checks: dict, extra: dict) -> dict:
    summary = {
        "scenario": ctx_name,
        "command": command,
        "seed": seed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
        **extra,
    }
    sio.write_json(out / "summary.json", summary)
    return summary


# --- runners ---------------------------------------------------------------------------

def _run_evolve(ctx: _Context, out: Path) -> dict:
    ev = ctx.need("evolution")
    psi0 = ctx.psi0
    dt = ev.dt or 0.25 * ctx.grid.dx ** 2
    traj = evolve(psi0, ctx.V, dt, ev.steps, ev.checkpoint_every)
    static = not getattr(ctx.V, "time_dependent", False)
    e = np.array([energy(s, ctx.V) for s in traj.states])
    rows = []
    for s, en in zip(traj.states, e):
        rows.append((s.t, s.norm, en, s.mean_x(), s.var_x()))
    sio.write_table(out / "checkpoints.csv", ["t", "norm", "energy", "mean_x", "var_x"], rows)
    dens = traj.densities()
    sio.write_table(out / "density.csv", ["x"] + [f"rho_t={s.t!r}" for s in traj.states],
                    [(x, *col) for x, col in zip(ctx.grid.x, dens.T)])
    sio.save_snapshot(traj[-1], out / "final.csv")
    checks = {"norm_drift_per_step": _check(traj.norm_drift_per_step, ev.checks.norm_drift_per_step)}
    if static and ev.checks.energy_relative is not None:
        rel = float(np.max(np.abs(e - e[0])) / abs(e[0])) if e[0] != 0 else float(np.max(np.abs(e - e[0])))
        checks["energy_relative_drift"] = _check(rel, ev.checks.energy_relative)
    ic = ctx.sc.initial_state
    if ev.checks.variance_law_relative is not None:
        if ic.kind != "gaussian" or ctx.V is not None:
            raise ScenarioError("the variance law applies to free Gaussian packets only")
        u = ctx.units
        t = traj[-1].t - psi0.t
        expected = ic.sigma0 ** 2 * (1 + (u.hbar * t / (2 * u.mass * ic.sigma0 ** 2)) ** 2)
        got = traj[-1].var_x()
        checks["variance_law"] = _check(abs(got - expected) / expected, ev.checks.variance_law_relative,
                                        expected=expected, measured=got)
    if ev.checks.stationary_density is not None:
        drift = float(np.max(np.abs(dens - dens[0])))
        checks["stationary_density"] = _check(drift, ev.checks.stationary_density)
    extra = {"dt": dt, "steps": ev.steps, "times": traj.times, "energy": e,
             "potential": _describe(ctx.V)}
    times = traj.times
    if len(times) >= 3 and np.ptp(np.diff(times)) <= 1e-9 * np.diff(times).max():
        extra["fokker_planck_residual"] = fokker_planck_residual(traj)
    return _finish(out, "evolve", ctx.sc.name, None, checks, extra)


def _run_sample(ctx: _Context, out: Path, seed: int) -> dict:
    cfg = ctx.need("sampler")
    sc = SamplerConfig(cfg.dt, cfg.steps, cfg.checkpoint_every, cfg.refresh_every)
    ens = run_ensemble(ctx.psi0, ctx.V, sc, seed=seed, n_traj=cfg.n_traj)
    sio.write_ensemble_csv(out / "ensemble.csv", ens)
    tol = cfg.l1_tolerance
    if tol is None:
        tol = max(0.02, 3 * math.sqrt(ctx.grid.n / cfg.n_traj))
    checks = {
        "l1_max": _check(float(np.max(ens.l1)), tol),
        "escaped_fraction": _check(ens.escaped_fraction, 0.01),
    }
    extra = {"n_traj": cfg.n_traj, "times": ens.times, "l1": ens.l1, "moments": ens.moments(),
             "fallback_steps": ens.fallback_steps, "valid": ens.valid,
             "potential": _describe(ctx.V)}
    if cfg.scaling_n_traj is not None:
        small = run_ensemble(ctx.psi0, ctx.V, sc, seed=seed, n_traj=cfg.scaling_n_traj)
        ratio = float(np.mean(small.l1) / np.mean(ens.l1))
        expected = math.sqrt(cfg.n_traj / cfg.scaling_n_traj)
        ok = expected / 2 <= ratio <= 2 * expected
        checks["l1_scaling"] = _check(ratio, None, passed=ok, expected=expected,
                                      band=[expected / 2, 2 * expected])
        extra["l1_small"] = small.l1
    return _finish(out, "sample", ctx.sc.name, seed, checks, extra)


def _motion(cfg: FrameCfg) -> FrameMotion:
    if cfg.kind == "constant_velocity":
        return FrameMotion.constant_velocity(cfg.v0)
    if cfg.kind == "constant_acceleration":
        return FrameMotion.constant_acceleration(cfg.g, cfg.v0)
    if not cfg.expression:
        raise ScenarioError("expression frame motion needs 'expression'")
    try:
        e = parse_expression(cfg.expression)
    except ExpressionError as exc:
        raise ScenarioError(f"frame expression: {exc}") from None
    if e.uses_x:
        raise ScenarioError("frame motion may depend on t only")
    return FrameMotion.from_function(lambda t: float(e(0.0, t)), h=cfg.dt / 10, label=e.source)


def _run_symmetry(ctx: _Context, out: Path) -> dict:
    cfg = ctx.need("frame")
    motion = _motion(cfg)
    steps = int(round(cfg.t_end / cfg.dt))
    if cfg.refine:
        def build(grid):
            return build_state(ctx.sc.initial_state, grid, ctx.units, ctx.sc.boundary, ctx.base_dir)
        V = ctx.V
        if isinstance(V, np.ndarray):
            raise ScenarioError("frame checks need an analytic potential")
        rep = verify_symmetry_refined(build, ctx.grid, motion, V, dt=cfg.dt, t_end=cfg.t_end,
                                      n_checkpoints=cfg.n_checkpoints, phase_floor=cfg.phase_floor)
    else:
        if steps % cfg.n_checkpoints:
            raise ScenarioError("t_end / dt must be a multiple of n_checkpoints")
        rep = verify_symmetry(ctx.psi0, motion, ctx.V, dt=cfg.dt, steps=steps,
                              checkpoint_every=steps // cfg.n_checkpoints, phase_floor=cfg.phase_floor)
    report = rep.as_dict()
    sio.write_json(out / "symmetry.json", report)
    sio.write_table(out / "density_residual.csv", ["t", "density_residual"],
                    zip(rep.times, rep.density_residual))
    phase = rep.extrapolated_phase_residual if cfg.refine else rep.phase_residual
    checks = {
        "density_residual": _check(rep.max_density_residual, cfg.density_tolerance),
        "phase_residual": _check(phase, cfg.phase_tolerance,
                                 method="richardson" if cfg.refine else "direct"),
    }
    return _finish(out, "symmetry", ctx.sc.name, None, checks, {"report": report})


def _run_gauge(ctx: _Context, out: Path) -> dict:
    cfg = ctx.need("gauge")
    ev = ctx.need("evolution")
    dt = ev.dt or 0.25 * ctx.grid.dx ** 2
    A = parse_expression(cfg.vector_potential) if cfg.vector_potential else None
    base = GaugeField(A=A, V=ctx.V, beta=cfg.beta)
    ref = evolve_gauged(ctx.psi0, base, dt, ev.steps, ev.checkpoint_every)
    rows, checks, per = [], {}, {}
    for text in cfg.transforms:
        try:
            f = parse_expression(text)
        except ExpressionError as exc:
            raise ScenarioError(f"gauge function {text!r}: {exc}") from None
        psi_g, field = gauge_transform(ctx.psi0, base, f if (f.uses_x or f.time_dependent) else float(f()))
        pair = evolve_gauged(psi_g, field, dt, ev.steps, ev.checkpoint_every)
        dens, phase = [], []
        for a, b in zip(ref.states, pair.states):
            d = float(np.max(np.abs(a.density - b.density)))
            mask = a.density >= 1e-6 * a.density.max()
            target = cfg.beta * f(ctx.grid.x, a.t)
            err = np.angle(b.psi * np.conj(a.psi) * np.exp(-1j * target))
            p = float(np.max(np.abs(err[mask])))
            dens.append(d)
            phase.append(p)
            rows.append((f.source, a.t, d, p))
        per[f.source] = {"density_residual": dens, "phase_residual": phase}
        checks[f"density[{f.source}]"] = _check(max(dens), cfg.density_tolerance)
        checks[f"phase[{f.source}]"] = _check(max(phase), cfg.phase_tolerance)
    sio.write_table(out / "gauge.csv", ["f", "t", "density_residual", "phase_residual"], rows)
    extra = {"dt": dt, "steps": ev.steps, "beta": cfg.beta, "pairs": per,
             "potential": _describe(ctx.V)}
    return _finish(out, "gauge-check", ctx.sc.name, None, checks, extra)


def _run_measure(ctx: _Context, out: Path, seed: int) -> dict:
    cfg = ctx.need("measurement")
    try:
        device = device_from_dict(cfg.device.model_dump(exclude_none=True), ctx.grid, ctx.units)
    except (MeasurementError, KeyError) as exc:
        raise ScenarioError(f"device: {exc}") from None
    psi = ctx.psi0
    born = born_probabilities(psi, device)
    after = apply_device(psi, device)
    route_gap = float(np.max(np.abs(pointer_distribution(after, device) - born.probabilities)))
    report = simulate_outcomes(psi, device, cfg.n_shots, seed)
    sio.write_outcomes_csv(out / "outcomes.csv", report)
    sio.write_json(out / "device.json", device_to_dict(device))
    pvals = []
    for s in range(cfg.chi2_seeds):
        r = simulate_outcomes(psi, device, cfg.n_shots, seed + s)
        pvals.append(chi_square_pvalue(r))
    checks = {
        "unitary_vs_overlap": _check(route_gap, cfg.tolerance),
        "chi_square": _check(min(pvals), None, passed=min(pvals) > cfg.chi2_alpha,
                             alpha=cfg.chi2_alpha),
    }
    extra = {"probabilities": born.probabilities, "no_click": born.no_click,
             "expectation": expectation_value(psi, device), "min_p_value": min(pvals)}
    if cfg.filter_outcome is not None:
        try:
            filtered = filter_update(psi, device, cfg.filter_outcome)
        except MeasurementError as exc:
            raise InfeasibleError(str(exc)) from None
        again = born_probabilities(filtered, device).probabilities[cfg.filter_outcome]
        checks["refilter_probability"] = _check(abs(1 - again), 1e-12)
        if cfg.post_filter is not None:
            pf = cfg.post_filter
            dt = pf.dt or 0.25 * ctx.grid.dx ** 2
            later = evolve(filtered, ctx.V, dt, pf.steps)[-1]
            overlap_route = np.abs((device.basis.conj() @ later.psi) * ctx.grid.dx) ** 2
            unitary_route = pointer_distribution(apply_device(later, device), device)
            checks["sequential_two_route"] = _check(
                float(np.max(np.abs(overlap_route - unitary_route))), 1e-8)
            extra["post_filter_probabilities"] = overlap_route
    if cfg.amplifier_diagonal is not None:
        amp = AmplifierModel.uniform(device.n_states, cfg.amplifier_diagonal)
        p_alpha = amplify(born.probabilities / born.probabilities.sum(), amp)
        extra["amplified"] = p_alpha
        bound = 1 - amp.min_diagonal
        gap = float(np.max(np.abs(p_alpha - born.probabilities / born.probabilities.sum())))
        checks["amplifier_bound"] = _check(gap, bound + 1e-15)
    return _finish(out, "measure", ctx.sc.name, seed, checks, extra)


def _run_classical(ctx: _Context, out: Path, seed: int) -> dict:
    cfg = ctx.need("classical")
    sc = SamplerConfig(cfg.dt, cfg.steps)
    rows, var = [], []
    for N in cfg.n_particles:
        com = com_ensemble(N, ctx.psi0, ctx.V, sc, seed=seed, n_ensemble=cfg.n_ensemble)
        predicted = ctx.units.hbar * cfg.dt / ctx.units.mass / N
        var.append(com.step_variance)
        rows.append((N, com.step_variance, predicted))
    sio.write_table(out / "com.csv", ["n_particles", "step_variance", "predicted"], rows)
    checks = {}
    extra = {"step_variance": var, "n_particles": cfg.n_particles}
    if len(cfg.n_particles) >= 2:
        slope = float(np.polyfit(np.log(cfg.n_particles), np.log(var), 1)[0])
        checks["com_slope"] = _check(abs(slope + 1), cfg.slope_tolerance, slope=slope)
        extra["slope"] = slope
    if cfg.hamilton_jacobi is not None:
        hj = cfg.hamilton_jacobi
        try:
            g = build_grid(hj.grid)
            packet = build_state(hj.state, g, ctx.units)
        except WavefieldError as exc:
            raise ScenarioError(str(exc)) from None
        gap = hamilton_jacobi_gap(packet)
        checks["hamilton_jacobi_gap"] = _check(gap.ratio, hj.tolerance)
        extra["hamilton_jacobi"] = gap.as_dict()
    return _finish(out, "classical-limit", ctx.sc.name, seed, checks, extra)


def _run_uncertainty(ctx: _Context, out: Path, seed: int) -> dict:
    cfg = ctx.need("uncertainty")
    ev = ctx.sc.evolution
    rng = np.random.default_rng(seed)
    rows, worst_identity, worst_product = [], 0.0, math.inf
    hbar = ctx.units.hbar
    for i in range(cfg.n_packets):
        sigma = rng.uniform(*cfg.sigma_range)
        k0 = rng.uniform(*cfg.k0_range)
        x0 = rng.uniform(*cfg.x0_range)
        try:
            psi = gaussian_packet(ctx.grid, x0, sigma, k0, units=ctx.units)
        except WavefieldError as exc:
            raise ScenarioError(f"packet {i}: {exc}") from None
        states = [psi]
        if ev is not None and ev.steps:
            states = evolve(psi, ctx.V, ev.dt or 0.25 * ctx.grid.dx ** 2, ev.steps,
                            ev.checkpoint_every).states
        for s in states:
            m = momentum_stats(s)
            ident = abs(m.var_p - (m.var_mv + m.var_mu))
            prod = m.uncertainty_product
            worst_identity = max(worst_identity, ident)
            worst_product = min(worst_product, prod - hbar / 2)
            rows.append((i, s.t, sigma, k0, x0, m.var_x, m.var_p, m.var_mv, m.var_mu, ident, prod))
    sio.write_table(out / "packets.csv", ["packet", "t", "sigma0", "k0", "x0", "var_x", "var_p",
                                          "var_mv", "var_mu", "identity_gap", "product"], rows)
    ref = momentum_stats(gaussian_packet(ctx.grid, 0.0, 1.0, 0.0, units=ctx.units))
    checks = {
        "variance_identity": _check(worst_identity, cfg.identity_tolerance),
        "uncertainty_bound": _check(-worst_product, cfg.product_slack),
        "minimum_uncertainty": _check(abs(ref.uncertainty_product - hbar / 2), cfg.minimum_tolerance),
    }
    return _finish(out, "uncertainty", ctx.sc.name, seed, checks,
                   {"min_product_excess": worst_product})


COMMANDS = {
    "evolve": lambda ctx, out, seed: _run_evolve(ctx, out),
    "sample": _run_sample,
    "symmetry": lambda ctx, out, seed: _run_symmetry(ctx, out),
    "gauge-check": lambda ctx, out, seed: _run_gauge(ctx, out),
    "measure": _run_measure,
    "classical-limit": _run_classical,
    "uncertainty": _run_uncertainty,
}


def run_scenario(command: str, scenario: Scenario | str | Path, out_dir, seed: int | None = None) -> dict:
    """Run one pipeline; raises ScenarioError / InfeasibleError / module errors."""
    base_dir = None
    if not isinstance(scenario, Scenario):
        base_dir = Path(scenario).resolve().parent
        scenario = load_scenario(scenario)
    if command not in COMMANDS:
        raise ScenarioError(f"unknown command {command!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(scenario, base_dir)
    return COMMANDS[command](ctx, out, scenario.seed if seed is None else seed)


def _expr_function(text):
    try:
        e = parse_expression(text)
    except ExpressionError as exc:
        raise ScenarioError(f"constraint function {text!r}: {exc}") from None
    return lambda pts: e(pts, 0.0)


def run_maxent(problem: MaxEntProblem | str | Path, out_dir) -> dict:
    if not isinstance(problem, MaxEntProblem):
        problem = load_problem(problem)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if problem.grid is not None:
            g = build_grid(problem.grid)
            w = np.ones(g.n) if problem.prior is None else np.asarray(problem.prior, dtype=float)
            prior = Distribution.on_grid(g.x_min, g.dx, w)
        else:
            if problem.support is None:
                raise ScenarioError("problem needs 'support' or 'grid'")
            pts = np.asarray(problem.support, dtype=float)
            prior = (Distribution.uniform(len(pts), pts) if problem.prior is None
                     else Distribution.discrete(problem.prior, pts))
        cons = []
        for c in problem.constraints:
            if c.kind == "variance":
                cons.append(Variance(c.value, c.mean))
            elif c.values is not None:
                cons.append(Moment(np.asarray(c.values, dtype=float), c.value))
            elif c.f is not None:
                cons.append(Moment(_expr_function(c.f), c.value))
            else:
                raise ScenarioError("moment constraint needs 'f' or 'values'")
        sol = maximize_entropy(prior, ConstraintSet(cons))
    except (InferenceError, WavefieldError) as exc:
        raise ScenarioError(str(exc)) from None
    summary = {
        "problem": problem.name,
        "command": "maxent",
        "classification": sol.classification.value,
        "converged": sol.converged,
        "iterations": sol.iterations,
        "multipliers": sol.multipliers,
        "log_partition": sol.log_partition,
        "entropy": sol.achieved_entropy,
        "diagnostic": sol.diagnostic,
    }
    if sol.posterior is not None:
        sio.write_table(out / "posterior.csv", ["x", "prior", "posterior"],
                        zip(prior.points, prior.weights, sol.posterior.weights))
    sio.write_json(out / "summary.json", summary)
    if sol.classification == Classification.OVER:
        raise InfeasibleError(sol.diagnostic or "constraints are infeasible")
    return summary
