"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times the three hot paths (Crank-Nicolson steps, counter-based normals and
one Euler-Maruyama ensemble step) on both backends, checks that they agree,
and prints a table of best-of-N wall times.
"""
import argparse
import json
import timeit

import numpy as np

from entropic_dynamics import _backend
from entropic_dynamics.wavefield import Grid1D, UnitSystem, _bands


def _cases():
    g = Grid1D(-20.0, 0.02, 2048)
    bands = _bands(g, UnitSystem(), 0.5 * g.x ** 2, np.zeros(g.n), 1e-3, False)
    psi0 = np.exp(-g.x ** 2 + 1j * g.x).astype(complex)
    psi0 /= np.sqrt(np.sum(np.abs(psi0) ** 2) * g.dx)

    n_traj = 100_000
    ids = np.arange(n_traj, dtype=np.uint64)
    rng = np.random.default_rng(0)
    drift = rng.normal(size=120)
    valid = np.ones(120, dtype=np.uint8)
    x0 = rng.uniform(-11.0, 11.0, size=n_traj)

    def cn(be):
        prop = be.CNPropagator(*bands)
        return lambda: prop.run(psi0.copy(), 200)

    def cn_periodic(be):
        pb = _bands(g, UnitSystem(), 0.5 * g.x ** 2, np.zeros(g.n), 1e-3, True)
        prop = be.CNPropagator(*pb, periodic=True)
        return lambda: prop.run(psi0.copy(), 200)

    def rebuild(be):
        # time-dependent Hamiltonians refactor L at every step
        def run():
            psi = psi0.copy()
            for _ in range(200):
                be.CNPropagator(*bands).run(psi, 1)
            return psi
        return run

    def normals(be):
        return lambda: be.counter_normals(7, ids, 3)

    def step(be):
        def run():
            x = x0.copy()
            esc = np.zeros(n_traj, dtype=np.uint8)
            be.sample_step(x, esc, drift, valid, -12.0, 0.2, 1e-3, 0.0316, 7, ids, 3)
            return x
        return run

    return {
        "crank_nicolson 2048 pts x 200 steps": cn,
        "crank_nicolson periodic 2048 x 200": cn_periodic,
        "crank_nicolson refactor every step": rebuild,
        "counter_normals 1e5": normals,
        "sample_step 1e5 trajectories": step,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write results here")
    args = ap.parse_args(argv)

    if "cython" not in _backend.BACKENDS:
        print("compiled extension not built; timing the pure-Python backend only")
    names = [n for n in ("cython", "python") if n in _backend.BACKENDS]
    rows = []
    for label, make in _cases().items():
        times, outputs = {}, {}
        for name in names:
            fn = make(_backend.BACKENDS[name])
            outputs[name] = fn()
            times[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        agree = None
        if len(names) == 2:
            a, b = outputs["cython"], outputs["python"]
            agree = float(np.max(np.abs(a - b)))
        rows.append({"kernel": label, **{f"{n}_s": times[n] for n in names},
                     "speedup": times["python"] / times["cython"] if len(names) == 2 else None,
                     "max_abs_diff": agree})

    head = f"{'kernel':38s}" + "".join(f"{n + ' [ms]':>14s}" for n in names)
    head += f"{'speedup':>10s}{'max diff':>12s}" if len(names) == 2 else ""
    print(head)
    for r in rows:
        line = f"{r['kernel']:38s}" + "".join(f"{1e3 * r[n + '_s']:14.2f}" for n in names)
        if r["speedup"] is not None:
            line += f"{r['speedup']:10.1f}{r['max_abs_diff']:12.1e}"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
