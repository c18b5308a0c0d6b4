"""File formats: wave-function snapshots, ensemble and outcome tables.

Snapshots are a CSV ``x,re,im`` plus a JSON sidecar with the grid, units,
time and boundary. Numbers are written with 17 significant digits so a
save/load/save cycle is byte-identical.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .wavefield import Grid1D, UnitSystem, WaveFunction, WavefieldError

__all__ = [
    "SnapshotError",
    "save_snapshot",
    "load_snapshot",
    "sidecar_path",
    "write_ensemble_csv",
    "write_outcomes_csv",
    "write_table",
    "write_json",
    "fmt",
]


class SnapshotError(ValueError):
    pass


def fmt(value) -> str:
    return "%.17g" % value


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_snapshot(psi: WaveFunction, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = psi.grid.x
    lines = ["x,re,im"]
    lines += [f"{fmt(xi)},{fmt(z.real)},{fmt(z.imag)}" for xi, z in zip(x, psi.psi)]
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "grid": {"x_min": psi.grid.x_min, "dx": psi.grid.dx, "n": psi.grid.n},
        "units": {"hbar": psi.units.hbar, "mass": psi.units.mass,
                  "osmotic_mass": psi.units.osmotic_mass},
        "t": psi.t,
        "boundary": psi.boundary,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_snapshot(path) -> WaveFunction:
    path = Path(path)
    try:
        meta = json.loads(sidecar_path(path).read_text())
        g = meta["grid"]
        grid = Grid1D(float(g["x_min"]), float(g["dx"]), int(g["n"]))
        units = UnitSystem(**{k: float(v) for k, v in meta["units"].items()})
        t = float(meta["t"])
        boundary = meta["boundary"]
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"bad snapshot sidecar for {path}: {exc}") from None
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "re", "im"]:
        raise SnapshotError(f"{path}: expected header x,re,im")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise SnapshotError(f"{path}: {exc}") from None
    if data.shape != (grid.n, 3):
        raise SnapshotError(f"{path}: {data.shape[0]} rows for a grid of {grid.n} points")
    if not np.array_equal(data[:, 0], grid.x):
        raise SnapshotError(f"{path}: x column does not match the sidecar grid")
    try:
        return WaveFunction(grid, data[:, 1] + 1j * data[:, 2], boundary=boundary, t=t, units=units)
    except WavefieldError as exc:
        raise SnapshotError(f"{path}: {exc}") from None


def write_ensemble_csv(path, ensemble) -> Path:
    """Rows ``traj_id,t,x,escaped`` for every trajectory at every checkpoint."""
    path = Path(path)
    n = ensemble.n_traj
    ids = np.tile(np.arange(n), len(ensemble.times))
    ts = np.repeat(ensemble.times, n)
    table = np.column_stack([ids, ts, ensemble.positions.ravel(), ensemble.escaped.ravel().astype(int)])
    np.savetxt(path, table, fmt=["%d", "%.17g", "%.17g", "%d"], delimiter=",",
               header="traj_id,t,x,escaped", comments="")
    return path


def write_outcomes_csv(path, report) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["outcome", "pointer_x", "prob", "count"])
        for label, px, p, c in report.rows():
            w.writerow([label, "" if px is None else fmt(px), fmt(p), c])
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n")
    return path
