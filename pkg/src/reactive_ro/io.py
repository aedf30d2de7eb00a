"""
Output files: time series and profile CSVs, legacy VTK snapshots, manifest.

Floats are written with ``repr`` so every CSV parses back bit-exactly.
"""

import csv
import json
import platform
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

SERIES_HEADER = ("t_s", "eps_mean", "k_mean", "v_mean", "recovery", "dpi_mean")
PROFILE_HEADER = ("x_m", "v_m", "eps", "k_m2", "dpi_Pa")
COMPARISON_HEADER = ("K", "eps_final", "k_final", "recovery_final", "status")


@dataclass(frozen=True)
class SeriesRecord:
    t: float
    eps_mean: float
    k_mean: float
    v_mean: float
    recovery: float
    dpi_mean: float


@dataclass
class Profile:
    """Per-face membrane state at one time."""

    t: float
    x: np.ndarray
    v_m: np.ndarray
    eps: np.ndarray
    k: np.ndarray
    dpi: np.ndarray

    def columns(self):
        return (self.x, self.v_m, self.eps, self.k, self.dpi)


def _f(x):
    return repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_timeseries(path, series):
    """Write ``series`` (iterable of :class:`SeriesRecord`) as CSV."""
    series = list(series)
    if not series:
        raise ValueError("time series is empty")
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(SERIES_HEADER)
        for r in series:
            w.writerow([_f(r.t), _f(r.eps_mean), _f(r.k_mean), _f(r.v_mean), _f(r.recovery),
                        _f(r.dpi_mean)])


def _read_rows(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != header:
        raise ValueError(f"{path}: unexpected header")
    return [[float(x) for x in row] for row in rows[1:]]


def read_timeseries(path):
    return [SeriesRecord(*row) for row in _read_rows(path, SERIES_HEADER)]


def write_profiles(path, profile):
    """Write one membrane profile; faces must be in ascending x."""
    cols = [np.asarray(c, dtype=float) for c in profile.columns()]
    n = cols[0].size
    if any(c.shape != (n,) for c in cols):
        raise ValueError("profile columns differ in length")
    if np.any(np.diff(cols[0]) <= 0):
        raise ValueError("profile faces must be in ascending x")
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(PROFILE_HEADER)
        for row in zip(*cols):
            w.writerow([_f(v) for v in row])


def read_profiles(path, t=float("nan")):
    rows = np.array(_read_rows(path, PROFILE_HEADER), dtype=float).reshape(-1, 5)
    return Profile(t, *(rows[:, i].copy() for i in range(5)))


def write_comparison(path, rows):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(COMPARISON_HEADER)
        for K, eps, k, r, status in rows:
            w.writerow([_f(K), _f(eps), _f(k), _f(r), status])


def read_comparison(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COMPARISON_HEADER:
        raise ValueError(f"{path}: unexpected header")
    return [(float(a), float(b), float(c), float(d), e) for a, b, c, d, e in rows[1:]]


def write_snapshot(path, grid, fields, t=0.0):
    """Legacy VTK ASCII STRUCTURED_POINTS file with one CELL_DATA scalar per field.

    ``fields`` maps array names to cell arrays of shape ``(nx, ny)``; they
    are written in the mapping's order, x varying fastest.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        f"channel snapshot t={float(t)!r}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 2",
        "ORIGIN 0 0 0",
        f"SPACING {grid.dx!r} {grid.dy!r} {grid.Z!r}",
        f"CELL_DATA {grid.n_cells}",
    ]
    for name, values in fields.items():
        arr = np.asarray(values, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"field {name} has shape {arr.shape}, expected {grid.shape}")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend("%.17g" % v for v in arr.T.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path):
    """Parse a file written by :func:`write_snapshot`.

    Returns ``(dims, fields)`` with ``dims = (nx, ny)`` and arrays of shape
    ``(nx, ny)`` in file order.
    """
    tokens = Path(path).read_text().split("\n")
    dims = None
    fields = {}
    i = 0
    n = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("DIMENSIONS"):
            nx1, ny1, _ = (int(v) for v in line.split()[1:])
            dims = (nx1 - 1, ny1 - 1)
        elif line.startswith("CELL_DATA"):
            n = int(line.split()[1])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            vals = np.array([float(v) for v in tokens[i + 2:i + 2 + n]])
            fields[name] = vals.reshape(dims[1], dims[0]).T
            i += 1 + n
        i += 1
    if dims is None or n != dims[0] * dims[1]:
        raise ValueError(f"{path}: not a structured-points cell-data file")
    return dims, fields


def versions():
    import scipy

    from . import __version__
    return {"reactive_ro": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(out_dir, config, summary):
    """Write ``config.cfg`` (normalised echo) and ``manifest.json``."""
    from .config import to_ini

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(to_ini(config))
    manifest = {
        "config_file": "config.cfg",
        "config_source": config.source,
        "versions": versions(),
        "summary": summary,
        "controls": asdict(config.controls),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))
