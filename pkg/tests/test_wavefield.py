import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropic_dynamics.expr import parse_expression
from entropic_dynamics.wavefield import (
    GaugeField,
    Grid1D,
    UnitSystem,
    WaveFunction,
    WavefieldError,
    decompose,
    energy,
    energy_balance,
    energy_drift,
    evolve,
    evolve_gauged,
    fokker_planck_residual,
    gauge_transform,
    gaussian_packet,
    harmonic_ground_state,
    momentum_stats,
    phase_equation_residual,
    plane_wave,
    recompose,
)


@pytest.fixture
def grid():
    return Grid1D.centered(0.05, 400)


def test_grid_geometry():
    g = Grid1D.centered(0.1, 11, center=1.0)
    assert g.x[5] == pytest.approx(1.0)
    assert g.x_max == pytest.approx(1.5)
    assert g.length == pytest.approx(1.1)
    assert g.shifted(0.3).x_min == pytest.approx(g.x_min + 0.3)


def test_wavefunction_rejects_unnormalized(grid):
    with pytest.raises(WavefieldError):
        WaveFunction(grid, np.ones(grid.n, dtype=complex))


def test_packet_clearance(grid):
    with pytest.raises(WavefieldError):
        gaussian_packet(grid, 9.0, 1.0)


def test_plane_wave_must_fit():
    g = Grid1D(0.0, 0.1, 100)
    plane_wave(g, 2 * math.pi / g.length * 3)
    with pytest.raises(WavefieldError):
        plane_wave(g, 1.0)


def test_norm_conserved(backend, grid):
    psi = gaussian_packet(grid, 0.0, 1.0, 2.0)
    traj = evolve(psi, lambda x, t: 0.5 * x ** 2, 0.01, 200, 50)
    assert traj.norm_drift_per_step <= 1e-12
    assert np.all(np.abs(traj.norms() - 1) < 1e-11)


def test_free_variance_law(backend):
    g = Grid1D.centered(0.02, 2048)
    psi = gaussian_packet(g, 0.0, 1.0)
    final = evolve(psi, None, 0.002, 500)[-1]
    expected = 1.0 + (1.0 / 2) ** 2
    assert abs(final.var_x() - expected) / expected < 1e-3


def test_ground_state_is_stationary(grid):
    psi = harmonic_ground_state(grid)
    traj = evolve(psi, 0.5 * grid.x ** 2, 0.01, 300, 100)
    assert np.max(np.abs(traj.densities() - psi.density)) < 1e-10
    assert np.max(np.abs(energy_drift(traj, 0.5 * grid.x ** 2))) < 1e-10


def test_energy_conserved_static(grid):
    V = 0.5 * grid.x ** 2
    psi = gaussian_packet(grid, 1.0, 0.7, 1.5)
    traj = evolve(psi, V, 0.005, 400, 100)
    e = np.array([energy(s, V) for s in traj.states])
    assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-10


def test_energy_balance_driven(grid):
    V = parse_expression("0.5*x^2 + 0.3*x*sin(2*t)")
    psi = gaussian_packet(grid, 0.0, 1.0)
    coarse = np.max(np.abs(energy_balance(evolve(psi, V, 0.002, 500, 50), V)))
    fine = np.max(np.abs(energy_balance(evolve(psi, V, 0.002, 500, 25), V)))
    assert fine < coarse / 3


def test_periodic_plane_wave_keeps_density():
    g = Grid1D(0.0, 0.05, 200)
    psi = plane_wave(g, 2 * math.pi / g.length * 2)
    final = evolve(psi, None, 0.01, 100)[-1]
    assert np.max(np.abs(final.density - psi.density)) < 1e-12


def test_periodic_matches_between_backends():
    from entropic_dynamics import _backend
    g = Grid1D(-10.0, 0.05, 400)
    psi = gaussian_packet(g, 0.0, 1.0, 3.0, boundary="periodic")
    out = {}
    for name in _backend.BACKENDS:
        prev = _backend.use_backend(name)
        try:
            out[name] = evolve(psi, None, 0.01, 300)[-1].psi
        finally:
            _backend.use_backend(prev)
    vals = list(out.values())
    for v in vals[1:]:
        assert np.max(np.abs(v - vals[0])) < 1e-12


def test_decompose_recompose(grid):
    psi = gaussian_packet(grid, 0.3, 1.0, 1.2)
    f = decompose(psi)
    back = recompose(f)
    assert np.max(np.abs(back[f.mask] - psi.psi[f.mask])) < 1e-12
    assert np.all(np.abs(psi.psi[~f.mask]) ** 2 < f.rho_min)
    ok = f.vmask
    assert np.max(np.abs(f.v[ok] - (f.b[ok] + f.u[ok]))) < 1e-12
    # plane-wave part gives v = hbar k / m
    centre = np.abs(grid.x - 0.3) < 1.0
    assert np.allclose(f.v[centre & ok], 1.2, atol=1e-3)
    # osmotic velocity of a Gaussian: u = (x - x0) / (2 sigma^2)
    assert np.allclose(f.u[centre & ok], (grid.x[centre & ok] - 0.3) / 2, atol=1e-3)


def test_entropy_field_is_phi_plus_half_log_rho(grid):
    psi = gaussian_packet(grid, 0.0, 1.0, 0.5)
    f = decompose(psi)
    m = f.mask
    assert np.allclose(f.S[m], f.phi[m] + 0.5 * np.log(f.rho[m]), atol=1e-12)
    assert np.all(np.isnan(f.S[~m]))


def test_fokker_planck_second_order():
    res = []
    for k in (1, 2):
        g = Grid1D.centered(0.04 / k, 400 * k)
        psi = gaussian_packet(g, 0.0, 1.0, 1.0)
        traj = evolve(psi, lambda x, t: 0.5 * x ** 2, 0.004 / k, 100 * k, 2 * k)
        res.append(np.max(fokker_planck_residual(traj)))
    assert 3.0 < res[0] / res[1] < 5.0


def test_phase_equation_small(grid):
    V = 0.5 * grid.x ** 2
    psi = gaussian_packet(grid, 0.5, 0.8, 1.0)
    traj = evolve(psi, V, 0.001, 2, 1)
    r = phase_equation_residual(traj[0], traj[1], V)
    assert r < 1e-2


def test_gauge_constant_is_phase_only(grid):
    psi = gaussian_packet(grid, 0.0, 1.0, 1.0)
    base = GaugeField(V=0.5 * grid.x ** 2, beta=1.0)
    new, field = gauge_transform(psi, base, 0.7)
    assert field is base
    assert np.allclose(new.psi, np.exp(0.7j) * psi.psi)


def test_gauge_x_density_invariant(grid):
    psi = gaussian_packet(grid, 0.0, 1.0, 1.0)
    base = GaugeField(V=0.5 * grid.x ** 2, beta=1.0)
    f = parse_expression("x")
    new, field = gauge_transform(psi, base, f)
    a = evolve_gauged(psi, base, 0.005, 200, 50)
    b = evolve_gauged(new, field, 0.005, 200, 50)
    for sa, sb in zip(a.states, b.states):
        assert np.max(np.abs(sa.density - sb.density)) < 1e-10


def test_gauge_current_velocity_invariant(grid):
    psi = gaussian_packet(grid, 0.0, 1.0, 1.0)
    base = GaugeField(V=None, beta=1.0)
    f = parse_expression("0.3*x^2")
    new, field = gauge_transform(psi, base, f)
    v0 = decompose(psi, base).v
    v1 = decompose(new, field).v
    ok = ~np.isnan(v0) & ~np.isnan(v1)
    assert np.max(np.abs(v0[ok] - v1[ok])) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.floats(0.4, 1.5), st.floats(-3.0, 3.0), st.floats(-2.0, 2.0))
def test_momentum_identity(sigma, k0, x0):
    g = Grid1D.centered(0.02, 2048)
    psi = gaussian_packet(g, x0, sigma, k0)
    m = momentum_stats(psi)
    assert abs(m.var_p - (m.var_mv + m.var_mu)) < 1e-6
    assert abs(m.mean_p - m.mean_mv) < 1e-8
    assert m.uncertainty_product >= 0.5 - 1e-9


def test_minimum_uncertainty_gaussian():
    g = Grid1D.centered(0.02, 2048)
    m = momentum_stats(gaussian_packet(g, 0.0, 1.0))
    assert abs(m.uncertainty_product - 0.5) < 1e-6
    assert abs(m.var_mv) < 1e-10


def test_momentum_needs_clear_walls():
    g = Grid1D(0.0, 0.05, 100)
    with pytest.raises(WavefieldError):
        momentum_stats(plane_wave(g, 2 * math.pi / g.length))


def test_units_scale_spreading():
    g = Grid1D.centered(0.02, 2048)
    u = UnitSystem(hbar=1.0, mass=2.0)
    psi = gaussian_packet(g, 0.0, 1.0, units=u)
    final = evolve(psi, None, 0.002, 500)[-1]
    expected = 1.0 + (1.0 / (2 * 2.0)) ** 2
    assert abs(final.var_x() - expected) / expected < 1e-3


def test_free_packet_energy_constant():
    g = Grid1D.centered(0.02, 2048)
    psi = gaussian_packet(g, 0.0, 1.0, 1.0)
    traj = evolve(psi, None, 0.002, 1000, 250)
    e = np.array([energy(s) for s in traj.states])
    assert np.max(np.abs(e - e[0])) / abs(e[0]) <= 1e-6
