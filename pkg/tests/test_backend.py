import numpy as np
import pytest

from entropic_dynamics import _backend, _purepy
from entropic_dynamics.wavefield import Grid1D, UnitSystem, _bands

compiled = pytest.mark.skipif("cython" not in _backend.BACKENDS,
                              reason="compiled extension not built")


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError):
        _backend.use_backend("fortran")


def test_switching_round_trips():
    prev = _backend.use_backend("python")
    assert _backend.backend_name() == "python"
    _backend.use_backend(prev)
    assert _backend.backend_name() == prev


def test_normals_are_standard():
    z = _purepy.counter_normals(7, np.arange(200_000, dtype=np.uint64), 3)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1) < 0.01
    u = _purepy.counter_uniforms(7, np.arange(200_000, dtype=np.uint64), 3)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005


@compiled
@pytest.mark.parametrize("step", [0, 1, 12345, 1 << 62])
def test_counter_streams_match(step):
    ids = np.arange(0, 10_000, 7, dtype=np.uint64)
    c, p = _backend.BACKENDS["cython"], _backend.BACKENDS["python"]
    # normals agree up to libm rounding in log/cos; uniforms are bit-identical
    zc, zp = c.counter_normals(99, ids, step), p.counter_normals(99, ids, step)
    assert np.max(np.abs(zc - zp)) <= 1e-14 * max(1.0, np.abs(zp).max())
    assert np.array_equal(c.counter_uniforms(99, ids, step), p.counter_uniforms(99, ids, step))


@compiled
@pytest.mark.parametrize("periodic", [False, True])
def test_crank_nicolson_matches(periodic):
    g = Grid1D(-10.0, 0.05, 400)
    rng = np.random.default_rng(0)
    V = 0.5 * g.x ** 2
    theta = 0.01 * rng.normal(size=g.n)
    bands = _bands(g, UnitSystem(), V, theta, 0.01, periodic)
    psi = np.exp(-g.x ** 2 + 1j * g.x).astype(complex)
    out = []
    for name in ("cython", "python"):
        prop = _backend.BACKENDS[name].CNPropagator(*bands, periodic=periodic)
        out.append(prop.run(psi.copy(), 50))
    assert np.max(np.abs(out[0] - out[1])) < 1e-12


@compiled
def test_sample_step_matches():
    rng = np.random.default_rng(1)
    n, ng = 5000, 120
    drift = rng.normal(size=ng)
    valid = (rng.random(ng) > 0.1).astype(np.uint8)
    x0 = rng.uniform(-12, 11.8, size=n)
    ids = np.arange(n, dtype=np.uint64)
    res = []
    for name in ("cython", "python"):
        x = x0.copy()
        esc = np.zeros(n, dtype=np.uint8)
        fb = _backend.BACKENDS[name].sample_step(x, esc, drift, valid, -12.0, 0.2, 0.01, 0.3,
                                                 5, ids, 4)
        res.append((x, esc, fb))
    assert np.max(np.abs(res[0][0] - res[1][0])) < 1e-13
    assert np.array_equal(res[0][1], res[1][1])
    assert res[0][2] == res[1][2]
