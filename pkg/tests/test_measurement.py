import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entropic_dynamics.inference import Classification
from entropic_dynamics.measurement import (
    AmplifierModel,
    MeasurementDevice,
    MeasurementError,
    NO_CLICK,
    amplify,
    apply_device,
    born_probabilities,
    chi_square_pvalue,
    density_constrained_update,
    device_from_dict,
    device_to_dict,
    eigenvalue_density,
    expectation_value,
    filter_update,
    pointer_distribution,
    preparation_feasibility,
    simulate_outcomes,
)
from entropic_dynamics.wavefield import (
    Grid1D,
    WaveFunction,
    decompose,
    evolve,
    gaussian_packet,
    harmonic_ground_state,
)


@pytest.fixture
def grid():
    return Grid1D.centered(0.1, 160)


def _random_state(grid, rng):
    amp = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    return WaveFunction.normalized(grid, amp)


def _in_span(device, rng):
    c = rng.normal(size=device.n_states) + 1j * rng.normal(size=device.n_states)
    c /= np.linalg.norm(c)
    return WaveFunction(device.grid, c @ device.basis), c


def test_validation(grid):
    with pytest.raises(MeasurementError):
        MeasurementDevice(grid, np.ones((2, grid.n)), [0, 1], [0.0, 1.0])
    dev = MeasurementDevice.harmonic(grid, 3)
    with pytest.raises(MeasurementError):
        MeasurementDevice(grid, dev.basis, [5, 5, 6], dev.eigenvalues)
    with pytest.raises(MeasurementError):
        MeasurementDevice(grid, dev.basis, [5, 6, grid.n], dev.eigenvalues)


def test_unitary_is_unitary_and_maps_basis(grid, rng):
    dev = MeasurementDevice.random(grid, 8, rng)
    U = dev.unitary()
    assert np.max(np.abs(U.conj().T @ U - np.eye(grid.n))) < 1e-10
    for k in range(8):
        after = apply_device(dev.state(k), dev)
        assert abs(after.density[dev.pointer[k]] * grid.dx - 1) < 1e-10


def test_two_routes_agree(grid, rng):
    dev = MeasurementDevice.harmonic(grid, 8)
    for _ in range(20):
        psi = _random_state(grid, rng)
        born = born_probabilities(psi, dev)
        route = pointer_distribution(apply_device(psi, dev), dev)
        assert np.max(np.abs(route - born.probabilities)) < 1e-10
        assert born.total + born.no_click == pytest.approx(1.0, abs=1e-12)


def test_coefficients_recovered(grid, rng):
    dev = MeasurementDevice.random(grid, 8, rng)
    psi, c = _in_span(dev, rng)
    assert np.allclose(born_probabilities(psi, dev).probabilities, np.abs(c) ** 2, atol=1e-12)
    assert born_probabilities(psi, dev).no_click < 1e-12


def test_outcomes_and_chi_square(grid, rng):
    dev = MeasurementDevice.harmonic(grid, 8)
    psi, c = _in_span(dev, rng)
    rep = simulate_outcomes(psi, dev, 20_000, seed=11)
    assert rep.counts.sum() == 20_000
    assert NO_CLICK not in rep.labels
    assert chi_square_pvalue(rep) > 1e-3


def test_chi_square_detects_wrong_probabilities(grid):
    dev = MeasurementDevice.harmonic(grid, 4)
    c = np.sqrt([0.4, 0.3, 0.2, 0.1])
    psi = WaveFunction(grid, c @ dev.basis)
    rep = simulate_outcomes(psi, dev, 50_000, seed=0)
    assert chi_square_pvalue(rep) > 1e-3
    rep.probabilities = np.full(4, 0.25)
    assert chi_square_pvalue(rep) < 1e-6


def test_leak_adds_no_click(grid):
    dev = MeasurementDevice.harmonic(grid, 2)
    psi = gaussian_packet(grid, 1.0, 0.5, 1.0)
    rep = simulate_outcomes(psi, dev, 1000, seed=0)
    assert rep.labels[-1] == NO_CLICK
    assert rep.pointer_x[-1] is None


def test_filter_then_remeasure(grid, rng):
    dev = MeasurementDevice.harmonic(grid, 6)
    psi, _ = _in_span(dev, rng)
    for k in range(6):
        f = filter_update(psi, dev, k)
        p = born_probabilities(f, dev).probabilities
        assert abs(p[k] - 1) <= 1e-12


def test_filter_zero_probability(grid):
    dev = MeasurementDevice.harmonic(grid, 3)
    with pytest.raises(MeasurementError):
        filter_update(dev.state(0), dev, 1)
    with pytest.raises(MeasurementError):
        filter_update(dev.state(0), dev, 7)


def test_sequential_routes_agree(grid, rng):
    dev = MeasurementDevice.harmonic(grid, 8)
    psi, _ = _in_span(dev, rng)
    f = filter_update(psi, dev, 2)
    later = evolve(f, lambda x, t: 0.5 * x ** 2 + 0.2 * x, 0.002, 200)[-1]
    direct = np.abs(dev.overlaps(later)) ** 2
    route = pointer_distribution(apply_device(later, dev), dev)
    assert np.max(np.abs(direct - route)) < 1e-8


def test_expectation_and_density(grid):
    dev = MeasurementDevice.harmonic(grid, 5)
    assert expectation_value(dev.state(3), dev) == pytest.approx(3.5)
    a, dens = eigenvalue_density(dev.state(2), dev)
    assert np.allclose(a, dev.eigenvalues)
    assert dens[2] == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_density_update_exact(seed):
    rng = np.random.default_rng(seed)
    grid = Grid1D.centered(0.05, 400)
    psi = gaussian_packet(grid, rng.uniform(-1, 1), rng.uniform(0.7, 1.5), rng.uniform(-2, 2))
    f = decompose(psi)
    x = grid.x
    bump = rng.normal(scale=0.3, size=3)
    target = np.where(f.mask, f.rho * np.exp(bump[0] * x + bump[1] * np.sin(x) + bump[2] * np.cos(2 * x)), 0)
    target /= target.sum() * grid.dx
    out = density_constrained_update(psi, target)
    assert np.max(np.abs(out.density - target)) <= 1e-12 * max(1.0, target.max())
    g = decompose(out, rho_min=f.rho_min)
    both = f.mask & g.mask & (target > f.rho_min)
    dS = np.angle(np.exp(1j * (g.S[both] - f.S[both])))
    assert np.max(np.abs(dS)) <= 1e-12


def test_density_update_validation(grid):
    psi = gaussian_packet(grid, 0.0, 1.0)
    with pytest.raises(MeasurementError):
        density_constrained_update(psi, np.full(grid.n, 2.0))
    wide = np.ones(grid.n) / (grid.n * grid.dx)
    with pytest.raises(MeasurementError):
        density_constrained_update(gaussian_packet(grid, 0.0, 0.5), wide)


def test_amplifier():
    amp = AmplifierModel.uniform(4, 0.99)
    assert amp.is_good
    p = np.array([0.1, 0.2, 0.3, 0.4])
    q = amplify(p, amp)
    assert q.sum() == pytest.approx(1.0)
    assert np.max(np.abs(q - p)) <= 1 - amp.min_diagonal
    with pytest.raises(MeasurementError):
        AmplifierModel(np.array([[0.5, 0.5], [0.4, 0.5]]))
    assert not AmplifierModel.uniform(3, 0.9).is_good


def test_preparation_feasibility(grid):
    h = MeasurementDevice.harmonic(grid, 4)
    shifted = MeasurementDevice.harmonic(Grid1D(grid.x_min, grid.dx, grid.n), 4)
    assert preparation_feasibility(h, 1, shifted, 1).classification is Classification.FULLY
    d = MeasurementDevice.grid_deltas(grid, [80, 81])
    res = preparation_feasibility(h, 0, d, 0)
    assert not res.feasible
    assert res.classification is Classification.OVER


def test_device_dict_round_trip(grid):
    for dev in (MeasurementDevice.harmonic(grid, 4),
                MeasurementDevice.grid_deltas(grid, [10, 20, 30])):
        again = device_from_dict(device_to_dict(dev), grid)
        assert np.allclose(again.basis, dev.basis)
        assert np.array_equal(again.pointer, dev.pointer)
        assert np.allclose(again.eigenvalues, dev.eigenvalues)


def test_pointer_must_be_on_grid(grid):
    with pytest.raises(MeasurementError):
        device_from_dict({"basis": {"preset": "harmonic", "n_states": 2},
                          "pointer_map": [0.01, 0.5]}, grid)
