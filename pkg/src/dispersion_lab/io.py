"""CSV and JSON readers/writers for profiles, fields, tables and runs.

CSV files always carry a header row, use ``\\n`` line endings and a ``.``
decimal separator. ``precision="table"`` prints five decimals,
``precision="full"`` prints 17 significant digits (lossless round trip).
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dispersion_lab.errors import DataError
from dispersion_lab.fields import FieldGrid
from dispersion_lab.profiles import SampledNlsWell, SampledWell
from dispersion_lab.reports import dumps

PRECISIONS = ("table", "full")


def fmt(value, precision: str = "full") -> str:
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be one of {PRECISIONS}")
    value = float(value)
    if precision == "table":
        out = f"{value:.5f}"
        return "0.00000" if out == "-0.00000" else out
    return format(value, ".17g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence], precision: str = "full") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v, precision) for v in row])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    """Write ``text`` (or print it when ``path`` is ``None`` or ``-``)."""
    if path is None or str(path) == "-":
        print(text, end="")
        return
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_csv(path, expected: Sequence[str]) -> dict:
    """Columns of a numeric CSV whose header must equal ``expected``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if header != list(expected):
        raise DataError(f"{path}: header {header} != expected {list(expected)}")
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    if data.size == 0:
        raise DataError(f"{path} has no data rows")
    if data.shape[1] != len(expected):
        raise DataError(f"{path}: ragged rows")
    return {name: data[:, i] for i, name in enumerate(expected)}


# ---------------------------------------------------------------------------
# profiles


def read_kdv_profile(path) -> SampledWell:
    cols = read_csv(path, ["x", "value"])
    return SampledWell(cols["x"], cols["value"])


def read_nls_profile(path) -> SampledNlsWell:
    cols = read_csv(path, ["x", "r_plus", "r_minus"])
    return SampledNlsWell(cols["x"], cols["r_plus"], cols["r_minus"])


def write_kdv_profile(path, x, values, precision: str = "full") -> None:
    write_text(path, csv_text(["x", "value"], zip(x, values), precision))


def write_nls_profile(path, x, r_plus, r_minus, precision: str = "full") -> None:
    write_text(path, csv_text(["x", "r_plus", "r_minus"], zip(x, r_plus, r_minus), precision))


# ---------------------------------------------------------------------------
# 1-D fields


def field_csv(x, values, precision: str = "full") -> str:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return csv_text(["x", "re", "im"], zip(x, values.real, values.imag), precision)
    return csv_text(["x", "value"], zip(x, values), precision)


def read_field(path) -> FieldGrid:
    """1-D field from ``x,value`` or ``x,re,im``; ``x`` must be uniform."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == "x,re,im":
        cols = read_csv(path, ["x", "re", "im"])
        values = cols["re"] + 1j * cols["im"]
    else:
        cols = read_csv(path, ["x", "value"])
        values = cols["value"]
    x = cols["x"]
    if x.size < 2:
        raise DataError(f"{path}: need at least two samples")
    dx = np.diff(x)
    # abscissae printed with five decimals are uniform only to half a unit in the last place
    if np.any(dx <= 0) or not np.allclose(dx, np.mean(dx), rtol=1e-9, atol=1.01e-5):
        raise DataError(f"{path}: x must be uniformly increasing")
    return FieldGrid(values, (float((x[-1] - x[0]) / (x.size - 1)),), (float(x[0]),))


# ---------------------------------------------------------------------------
# 2-D fields: one row per grid point, row-major


def field2d_csv(field: FieldGrid, names: Sequence[str], precision: str = "full") -> str:
    xs, ys = field.mesh()
    comps = np.asarray(field.values).reshape(field.shape + (-1,))
    rows = (
        [xs[i, j], ys[i, j], *comps[i, j]]
        for i in range(field.shape[0]) for j in range(field.shape[1])
    )
    return csv_text(["x", "y", *names], rows, precision)


def read_field2d(path, names: Sequence[str], component_shape: tuple) -> FieldGrid:
    cols = read_csv(path, ["x", "y", *names])
    x, y = cols["x"], cols["y"]
    ux, uy = np.unique(x), np.unique(y)
    if ux.size * uy.size != x.size:
        raise DataError(f"{path}: points do not form a full grid")
    order = np.lexsort((y, x))
    comps = np.stack([cols[n][order] for n in names], axis=-1)
    values = comps.reshape((ux.size, uy.size) + tuple(component_shape))
    spacing = []
    for axis_vals in (ux, uy):
        d = np.diff(axis_vals)
        if axis_vals.size < 2 or not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
            raise DataError(f"{path}: grid must be uniform with at least two points per axis")
        spacing.append(float(d[0]))
    return FieldGrid(values, tuple(spacing), (float(ux[0]), float(uy[0])))


TENSOR_NAMES = ("s11", "s12", "s21", "s22")
VECTOR_NAMES = ("u1", "u2")


# ---------------------------------------------------------------------------
# tables and reports


def table_csv(tables, grid_name: str, quantity: str, precision: str = "full", layout: str = "long") -> str:
    """``beta,<grid>,<quantity>,err`` rows, or one column per beta (``layout="wide"``)."""
    if layout == "long":
        rows = ((t.beta, g, v, e) for t in tables for g, v, e in zip(t.grid, t.values, t.error_estimates))
        return csv_text(["beta", grid_name, quantity, "err"], rows, precision)
    if layout == "wide":
        header = [grid_name] + [f"beta={fmt(t.beta, 'full')}" for t in tables]
        grid = tables[0].grid
        rows = ([g] + [t.values[i] for t in tables] for i, g in enumerate(grid))
        return csv_text(header, rows, precision)
    raise ValueError("layout must be 'long' or 'wide'")


def read_table(path, grid_name: str, quantity: str) -> dict:
    return read_csv(path, ["beta", grid_name, quantity, "err"])


def write_json(path, payload: dict) -> None:
    write_text(path, dumps(payload))


# ---------------------------------------------------------------------------
# trajectories


def write_trajectory(directory, traj, precision: str = "full") -> Path:
    """One CSV per frame plus ``manifest.json``; returns the manifest path.

    Frames are machine data; use the default full precision unless the
    files are only meant for reading by eye.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    x = traj.grid.x
    for i, frame in enumerate(traj.frames):
        name = f"frame_{i:05d}.csv"
        write_text(directory / name, field_csv(x, frame, precision))
        names.append(name)
    manifest = {
        "schema_version": 1,
        "kind": traj.kind,
        "epsilon": traj.epsilon,
        "dt": traj.dt,
        "grid": {"length": traj.grid.length, "n": traj.grid.n, "origin": traj.grid.origin},
        "times": traj.times,
        "frames": names,
        "conserved_log": traj.conserved_log,
    }
    path = directory / "manifest.json"
    write_json(path, manifest)
    return path


def read_trajectory(manifest_path):
    from dispersion_lab.semiclassical import Grid1D, Trajectory

    manifest_path = Path(manifest_path)
    try:
        meta = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {manifest_path}: {exc}") from exc
    base = manifest_path.parent
    try:
        grid = Grid1D(meta["grid"]["length"], meta["grid"]["n"], meta["grid"]["origin"])
        frames = [read_field(os.path.join(base, name)).values for name in meta["frames"]]
        return Trajectory(grid, np.asarray(meta["times"]), np.array(frames), float(meta["epsilon"]),
                          meta.get("conserved_log", {}), float(meta.get("dt", float("nan"))), meta["kind"])
    except KeyError as exc:
        raise DataError(f"manifest {manifest_path} lacks {exc}") from exc
