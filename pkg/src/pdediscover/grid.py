"""Spatiotemporal snapshot grids: the basic data model, noise injection,
data-level error metrics, and the on-disk grid file format.

A snapshot grid stores one scalar field sampled on a uniform 1-D space x
time lattice, rows = space and columns = time. Grids are immutable; every
operation returns a new grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "GridError",
    "SnapshotGrid",
    "FieldSet",
    "add_noise",
    "rmse",
    "crop",
    "write_grid",
    "read_grid",
]


class GridError(ValueError):
    """Grid data violates a structural requirement (shape, spacing, finiteness)."""


@dataclass(frozen=True)
class SnapshotGrid:
    """A field u(x, t) on a uniform grid.

    ``values[j, i]`` is the sample at ``x = x0 + j*dx``, ``t = t0 + i*dt``.
    Values may be real or complex but must be finite everywhere. The array
    is copied on construction and marked read-only.
    """

    values: np.ndarray
    dx: float
    dt: float
    x0: float = 0.0
    t0: float = 0.0
    field_name: str = "u"

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise GridError(f"values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 3 or arr.shape[1] < 3:
            raise GridError(
                f"grid needs at least 3 points per axis, got {arr.shape}"
            )
        if not (self.dx > 0 and self.dt > 0):
            raise GridError(f"grid spacings must be positive: dx={self.dx}, dt={self.dt}")
        if not np.iscomplexobj(arr):
            arr = arr.astype(float, copy=True)
        else:
            arr = arr.astype(complex, copy=True)
        if not np.all(np.isfinite(arr)):
            raise GridError("grid values must all be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_t(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def x(self) -> np.ndarray:
        """Spatial coordinates of the rows."""
        return self.x0 + self.dx * np.arange(self.n_x)

    @property
    def t(self) -> np.ndarray:
        """Time coordinates of the columns."""
        return self.t0 + self.dt * np.arange(self.n_t)

    def with_values(self, values: np.ndarray, field_name: str | None = None) -> "SnapshotGrid":
        """New grid with the same geometry but different samples."""
        return SnapshotGrid(
            values=values,
            dx=self.dx,
            dt=self.dt,
            x0=self.x0,
            t0=self.t0,
            field_name=self.field_name if field_name is None else field_name,
        )


@dataclass(frozen=True)
class FieldSet:
    """An ordered collection of grids sharing one lattice.

    All member grids must have identical shape, spacing and origin, and
    distinct field names.
    """

    fields: tuple[SnapshotGrid, ...]

    def __post_init__(self) -> None:
        grids = tuple(self.fields)
        if not grids:
            raise GridError("a field set needs at least one field")
        ref = grids[0]
        for g in grids[1:]:
            same = (
                g.shape == ref.shape
                and g.dx == ref.dx
                and g.dt == ref.dt
                and g.x0 == ref.x0
                and g.t0 == ref.t0
            )
            if not same:
                raise GridError(
                    f"field '{g.field_name}' has mismatched geometry with '{ref.field_name}'"
                )
        names = [g.field_name for g in grids]
        if len(set(names)) != len(names):
            raise GridError(f"field names must be unique, got {names}")
        object.__setattr__(self, "fields", grids)

    def __iter__(self) -> Iterator[SnapshotGrid]:
        return iter(self.fields)

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, name: str) -> SnapshotGrid:
        for g in self.fields:
            if g.field_name == name:
                return g
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(g.field_name for g in self.fields)


def add_noise(grid: SnapshotGrid, level: float, seed: int) -> SnapshotGrid:
    """Add i.i.d. zero-mean Gaussian noise with standard deviation
    ``level * std(values)``.

    The noise scale is relative to the population standard deviation of the
    clean samples. Deterministic for a fixed ``(grid, level, seed)``.
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    if np.iscomplexobj(grid.values):
        raise TypeError("add_noise supports real-valued grids only")
    sigma = level * float(grid.values.std())
    if sigma == 0.0:
        return grid.with_values(grid.values)
    rng = np.random.default_rng(seed)
    eta = rng.normal(0.0, sigma, size=grid.shape)
    return grid.with_values(grid.values + eta)


def rmse(a: SnapshotGrid, b: SnapshotGrid) -> float:
    """Root mean square difference over all cells of two equal-shape grids."""
    if a.shape != b.shape:
        raise GridError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a.values - b.values
    return float(np.sqrt(np.mean(np.abs(diff) ** 2)))


def crop(
    grid: SnapshotGrid,
    x_range: tuple[float, float],
    t_range: tuple[float, float],
) -> SnapshotGrid:
    """Sub-grid whose coordinates lie inside both closed ranges.

    Spacing and retained values are unchanged; x0/t0 move to the first
    retained row/column. Raises GridError when the intersection is empty or
    too small to form a valid grid.
    """
    x_lo, x_hi = min(x_range), max(x_range)
    t_lo, t_hi = min(t_range), max(t_range)
    xi = np.nonzero((grid.x >= x_lo) & (grid.x <= x_hi))[0]
    ti = np.nonzero((grid.t >= t_lo) & (grid.t <= t_hi))[0]
    if xi.size == 0 or ti.size == 0:
        raise GridError("crop ranges do not intersect the grid extent")
    return SnapshotGrid(
        values=grid.values[xi[0] : xi[-1] + 1, ti[0] : ti[-1] + 1],
        dx=grid.dx,
        dt=grid.dt,
        x0=grid.x0 + grid.dx * int(xi[0]),
        t0=grid.t0 + grid.dt * int(ti[0]),
        field_name=grid.field_name,
    )


# On-disk format: a small key/value metadata document plus a companion
# plain-text file of comma-separated values, one spatial row per line.
# Numbers are printed with 17 significant digits so parsing round-trips
# IEEE doubles exactly.

_META_KEYS = ("field_name", "n_x", "n_t", "dx", "dt", "x0", "t0", "values_file")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_grid(grid: SnapshotGrid, path: str | Path) -> Path:
    """Write ``path`` (metadata) and a ``<stem>.values.csv`` companion file.

    Returns the metadata path. Complex grids are not representable in this
    format.
    """
    if np.iscomplexobj(grid.values):
        raise TypeError("grid files store real values only")
    path = Path(path)
    values_name = path.stem + ".values.csv"
    meta = {
        "field_name": grid.field_name,
        "n_x": str(grid.n_x),
        "n_t": str(grid.n_t),
        "dx": _fmt(grid.dx),
        "dt": _fmt(grid.dt),
        "x0": _fmt(grid.x0),
        "t0": _fmt(grid.t0),
        "values_file": values_name,
    }
    lines = [f"{k} = {meta[k]}" for k in _META_KEYS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with open(path.parent / values_name, "w", encoding="utf-8") as fh:
        for row in grid.values:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_grid(path: str | Path) -> SnapshotGrid:
    """Load a grid written by :func:`write_grid`."""
    path = Path(path)
    meta: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise GridError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    missing = [k for k in _META_KEYS if k not in meta]
    if missing:
        raise GridError(f"{path}: missing metadata keys {missing}")
    n_x, n_t = int(meta["n_x"]), int(meta["n_t"])
    values_path = path.parent / meta["values_file"]
    values = np.loadtxt(values_path, delimiter=",", ndmin=2)
    if values.shape != (n_x, n_t):
        raise GridError(
            f"{values_path}: expected shape ({n_x}, {n_t}), got {values.shape}"
        )
    return SnapshotGrid(
        values=values,
        dx=float(meta["dx"]),
        dt=float(meta["dt"]),
        x0=float(meta["x0"]),
        t0=float(meta["t0"]),
        field_name=meta["field_name"],
    )
