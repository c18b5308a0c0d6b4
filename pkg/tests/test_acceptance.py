"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``. Scenario-backed criteria use the JSON
files under ``scenarios/`` through the same runners as the CLI.
"""
import time
from pathlib import Path

import numpy as np
import pytest

from entropic_dynamics.frames import FrameMotion, proper_time_residue
from entropic_dynamics.inference import (
    ConstraintSet,
    Distribution,
    Moment,
    Variance,
    bayes_update,
    bayes_update_via_maxent,
    maximize_entropy,
)
from entropic_dynamics.measurement import (
    MeasurementDevice,
    apply_device,
    born_probabilities,
    density_constrained_update,
    pointer_distribution,
)
from entropic_dynamics.scenario import run_scenario
from entropic_dynamics.wavefield import Grid1D, WaveFunction, decompose, gaussian_packet

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def report(capsys):
    """Print one summary line per criterion even when output is captured."""

    def _report(number, title, ok, detail, elapsed, budget):
        within = elapsed <= budget
        mark = "PASS" if ok and within else "FAIL"
        with capsys.disabled():
            print(f"\n[{mark}] criterion {number:2d} {title}: {detail} "
                  f"({elapsed:.2f} s, budget {budget:g} s)")
        assert ok, f"criterion {number} failed: {detail}"
        assert within, f"criterion {number} over its time budget"

    return _report


def _scenario(command, name, tmp_path):
    return run_scenario(command, SCENARIOS / name, tmp_path / f"{Path(name).stem}-{command}")


def _check(summary, key):
    c = summary["checks"][key]
    return c["value"], c["passed"]


def test_c01_maxent_closed_forms(report):
    t0 = time.perf_counter()
    # normalization only: posterior equals the prior
    prior = Distribution.uniform(7)
    e_uniform = np.max(np.abs(maximize_entropy(prior, ConstraintSet()).posterior.weights - 1 / 7))
    # two-state canonical distribution
    two = Distribution.uniform(2, points=[0.0, 1.0])
    sol = maximize_entropy(two, ConstraintSet.of(Moment(lambda x: x, 0.3)))
    e_two = np.max(np.abs(sol.posterior.weights - [0.7, 0.3]))
    # grid Gaussian from mean and variance
    grid = Distribution.uniform_grid(-10.0, 0.05, 400)
    sol = maximize_entropy(grid, ConstraintSet.of(Moment(lambda x: x, 0.0), Variance(1.0, mean=0.0)))
    x = grid.points
    closed = np.exp(-x ** 2 / 2)
    closed /= closed.sum() * grid.dx
    e_gauss = np.max(np.abs(sol.posterior.weights - closed))
    ok = e_uniform <= 1e-10 and e_two <= 1e-10 and e_gauss <= 1e-6
    report(1, "MaxEnt closed forms", ok,
           f"uniform {e_uniform:.1e}, two-state {e_two:.1e}, grid Gaussian {e_gauss:.1e}",
           time.perf_counter() - t0, 1.0)


def test_c02_bayes_as_maxent(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        n_theta = int(rng.integers(2, 9))
        n_d = int(rng.integers(2, 64 // n_theta + 1))
        q = rng.random((n_theta, n_d)) ** 2 + 1e-6
        q /= q.sum()
        d = int(rng.integers(n_d))
        a = bayes_update(q, d).weights
        b = bayes_update_via_maxent(q, d).weights
        worst = max(worst, float(np.max(np.abs(a - b))))
    report(2, "Bayes as maximum entropy", worst <= 1e-12,
           f"max |ME - Bayes| {worst:.1e} over 50 joints (n <= 64)", time.perf_counter() - t0, 5.0)


def test_c03_schroedinger(report, tmp_path):
    t0 = time.perf_counter()
    free = _scenario("evolve", "free_gaussian.json", tmp_path)
    ground = _scenario("evolve", "harmonic_ground.json", tmp_path)
    var_err, ok1 = _check(free, "variance_law")
    drift, ok2 = _check(ground, "stationary_density")
    norm = max(free["checks"]["norm_drift_per_step"]["value"],
               ground["checks"]["norm_drift_per_step"]["value"])
    ok = ok1 and ok2 and var_err <= 1e-3 and drift <= 1e-6 and norm <= 1e-12
    report(3, "Schroedinger correctness", ok,
           f"variance law {var_err:.1e}, ground drift {drift:.1e}, norm drift/step {norm:.1e}",
           time.perf_counter() - t0, 30.0)


def _l1_at(summary, times):
    t = np.asarray(summary["times"])
    l1 = np.asarray(summary["l1"])
    return [float(l1[np.argmin(np.abs(t - s))]) for s in times]


@pytest.mark.slow
def test_c04_trajectory_equivalence(report, tmp_path):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("sample_free.json", "sample_harmonic.json"):
        s = _scenario("sample", name, tmp_path)
        l1 = _l1_at(s, (0.5, 1.0))
        ratio, scaled = _check(s, "l1_scaling")
        band = s["checks"]["l1_scaling"]["band"]
        ok = ok and max(l1) <= 0.02 and scaled and s["valid"]
        parts.append(f"{Path(name).stem}: L1 {l1[0]:.4f}/{l1[1]:.4f}, x10 ratio {ratio:.2f} "
                     f"in [{band[0]:.2f}, {band[1]:.2f}]")
    report(4, "trajectory ensembles reproduce |psi|^2", ok, "; ".join(parts),
           time.perf_counter() - t0, 300.0)


@pytest.mark.slow
def test_c05_galilean_symmetry(report, tmp_path):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("boost.json", "accelerated.json"):
        s = _scenario("symmetry", name, tmp_path)
        dens, ok_d = _check(s, "density_residual")
        phase, ok_p = _check(s, "phase_residual")
        ok = ok and ok_d and ok_p and dens <= 1e-6 and phase <= 1e-6
        parts.append(f"{Path(name).stem}: density {dens:.1e}, phase {phase:.1e}")
    report(5, "Galilean symmetry", ok, "; ".join(parts), time.perf_counter() - t0, 60.0)


def test_c06_proper_time_residue(report):
    t0 = time.perf_counter()
    ratios = []
    for motion in (FrameMotion.constant_velocity(1.0), FrameMotion.constant_acceleration(0.5, 0.5)):
        gaps = [proper_time_residue(motion, c, 1.0)[2] for c in (10.0, 20.0, 40.0)]
        ratios += [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    ok = all(12.0 <= r <= 20.0 for r in ratios)
    report(6, "proper-time residue ~ (v/c)^4", ok,
           "halving ratios " + ", ".join(f"{r:.2f}" for r in ratios),
           time.perf_counter() - t0, 1.0)


@pytest.mark.slow
def test_c07_gauge_symmetry(report, tmp_path):
    t0 = time.perf_counter()
    s = _scenario("gauge-check", "gauge.json", tmp_path)
    dens = {k: v["value"] for k, v in s["checks"].items() if k.startswith("density")}
    ok = len(dens) == 3 and all(v <= 1e-8 for v in dens.values())
    report(7, "gauge symmetry", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in dens.items()), time.perf_counter() - t0, 60.0)


def test_c08_born_rule(report, tmp_path):
    t0 = time.perf_counter()
    grid = Grid1D.centered(0.1, 160)
    rng = np.random.default_rng(8)
    devices = [MeasurementDevice.harmonic(grid, 8), MeasurementDevice.random(grid, 8, rng)]
    worst = 0.0
    for i in range(100):
        dev = devices[i % 2]
        amp = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
        psi = WaveFunction.normalized(grid, amp)
        p = born_probabilities(psi, dev).probabilities
        route = pointer_distribution(apply_device(psi, dev), dev)
        worst = max(worst, float(np.max(np.abs(route - p))))
    s = _scenario("measure", "measure.json", tmp_path)
    chi_ok = s["checks"]["chi_square"]["passed"]
    ok = worst <= 1e-10 and chi_ok and s["checks"]["unitary_vs_overlap"]["passed"]
    report(8, "Born rule from unitarity", ok,
           f"unitary vs overlap {worst:.1e} on 100 states; chi-square min p "
           f"{s['min_p_value']:.4f} over seeds 0..99 (alpha 1e-3)", time.perf_counter() - t0, 30.0)


def test_c09_filtering_sequential(report, tmp_path):
    t0 = time.perf_counter()
    s = _scenario("measure", "measure.json", tmp_path)
    refilter, ok1 = _check(s, "refilter_probability")
    seq, ok2 = _check(s, "sequential_two_route")
    ok = ok1 and ok2 and refilter <= 1e-12 and seq <= 1e-8
    report(9, "filtering and sequential measurement", ok,
           f"|1 - P(refilter)| {refilter:.1e}, filter-evolve-measure routes {seq:.1e}",
           time.perf_counter() - t0, 30.0)


def test_c10_density_update(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    grid = Grid1D.centered(0.05, 400)
    x = grid.x
    worst_rho, worst_s = 0.0, 0.0
    for _ in range(50):
        psi = gaussian_packet(grid, rng.uniform(-1, 1), rng.uniform(0.7, 1.5), rng.uniform(-3, 3))
        f = decompose(psi)
        c = rng.normal(scale=0.4, size=4)
        smooth = c[0] * x + c[1] * np.sin(x) + c[2] * np.cos(1.5 * x) + c[3] * np.tanh(x)
        target = np.where(f.mask, f.rho * np.exp(smooth), 0.0)
        target /= target.sum() * grid.dx
        out = density_constrained_update(psi, target)
        g = decompose(out, rho_min=f.rho_min)
        both = f.mask & g.mask
        worst_rho = max(worst_rho, float(np.max(np.abs(out.density - target))))
        # phi, hence S, is fixed by psi only modulo 2 pi
        dS = np.angle(np.exp(1j * (g.S[both] - f.S[both])))
        worst_s = max(worst_s, float(np.max(np.abs(dS))))
    ok = worst_rho <= 1e-12 and worst_s <= 1e-12
    report(10, "ME wave-function update", ok,
           f"|rho - rho_D| {worst_rho:.1e}, |S' - S| (mod 2 pi) {worst_s:.1e} on 50 targets",
           time.perf_counter() - t0, 30.0)


def test_c11_uncertainty(report, tmp_path):
    t0 = time.perf_counter()
    s = _scenario("uncertainty", "uncertainty.json", tmp_path)
    ident, ok1 = _check(s, "variance_identity")
    slack, ok2 = _check(s, "uncertainty_bound")
    minimum, ok3 = _check(s, "minimum_uncertainty")
    ok = ok1 and ok2 and ok3 and ident <= 1e-6 and slack <= 1e-9 and minimum <= 1e-6
    report(11, "uncertainty structure", ok,
           f"identity gap {ident:.1e}, min (dx dp - hbar/2) {s['min_product_excess']:.3e}, "
           f"Gaussian |dx dp - hbar/2| {minimum:.1e}", time.perf_counter() - t0, 60.0)


@pytest.mark.slow
def test_c12_classical_limit(report, tmp_path):
    t0 = time.perf_counter()
    s = _scenario("classical-limit", "classical.json", tmp_path)
    slope = s["slope"]
    hj, ok_hj = _check(s, "hamilton_jacobi_gap")
    ok = abs(slope + 1) <= 0.1 and ok_hj and hj <= 1e-3
    report(12, "classical limit", ok,
           f"COM step-variance slope {slope:.3f} over N = 10, 100, 1000; HJ gap ratio {hj:.1e}",
           time.perf_counter() - t0, 60.0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
