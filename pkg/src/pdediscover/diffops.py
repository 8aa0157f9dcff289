"""Numerical differentiation of snapshot grids.

Two estimators are provided: second-order finite-difference stencils for
clean data and local least-squares polynomial fits (sliding window) for
noisy data. Both return the derivative on the full grid together with a
boundary trim width; cells inside the trim band were computed with
one-sided formulas and are lower accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import SnapshotGrid

__all__ = [
    "DerivativeSpec",
    "DerivativeResult",
    "central_fd",
    "poly_derivative",
    "differentiate",
]

_AXES = ("space", "time")
_MAX_ORDER = {"space": 4, "time": 2}


@dataclass(frozen=True)
class DerivativeSpec:
    """What to differentiate: axis, order, and estimator parameters.

    ``poly_degree`` and ``window`` apply to the polynomial method only;
    the fit degree must exceed the derivative order and the window must be
    an odd number of at least ``poly_degree + 1`` samples.
    """

    axis: str
    order: int
    method: str = "central_fd"
    poly_degree: int | None = None
    window: int | None = None

    def __post_init__(self) -> None:
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of {_AXES}, got {self.axis!r}")
        if self.method not in ("central_fd", "polynomial"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 1 <= self.order <= _MAX_ORDER[self.axis]:
            raise ValueError(
                f"{self.axis} derivative order must be in 1..{_MAX_ORDER[self.axis]},"
                f" got {self.order}"
            )
        if self.method == "polynomial":
            if self.poly_degree is None or self.window is None:
                raise ValueError("polynomial method needs poly_degree and window")
            if self.order >= self.poly_degree:
                raise ValueError(
                    f"derivative order {self.order} must be < poly_degree {self.poly_degree}"
                )
            if self.window % 2 == 0 or self.window < self.poly_degree + 1:
                raise ValueError(
                    f"window must be odd and >= poly_degree + 1, got {self.window}"
                )


@dataclass(frozen=True)
class DerivativeResult:
    """Derivative samples on the full grid plus the boundary trim width."""

    grid: SnapshotGrid
    trim: int


# Central interior stencils, second-order accurate, indexed by order.
_CENTRAL = {
    1: ([-1, 1], [-0.5, 0.5]),
    2: ([-1, 0, 1], [1.0, -2.0, 1.0]),
    3: ([-2, -1, 1, 2], [-0.5, 1.0, -1.0, 0.5]),
    4: ([-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0]),
}

# Forward one-sided stencils of matching (second) order.
_FORWARD = {
    1: [-1.5, 2.0, -0.5],
    2: [2.0, -5.0, 4.0, -1.0],
    3: [-2.5, 9.0, -12.0, 7.0, -1.5],
    4: [3.0, -14.0, 26.0, -24.0, 11.0, -2.0],
}


def fd_trim(order: int) -> int:
    """Rows/columns per edge computed with one-sided stencils."""
    return max(1, math.ceil(order / 2))


def _central_along_last(arr: np.ndarray, h: float, order: int) -> np.ndarray:
    n = arr.shape[-1]
    if n < order + 2:
        raise ValueError(
            f"axis too short for order-{order} stencil: need {order + 2} points, have {n}"
        )
    out = np.empty_like(arr)
    offsets, coeffs = _CENTRAL[order]
    tw = fd_trim(order)
    scale = h**order
    interior = sum(
        c * arr[..., tw + o : n - tw + o] for o, c in zip(offsets, coeffs)
    )
    out[..., tw : n - tw] = interior / scale
    fwd = np.asarray(_FORWARD[order])
    k = fwd.size
    for j in range(tw):
        out[..., j] = arr[..., j : j + k] @ fwd / scale
        # mirrored stencil; odd orders flip sign
        back = fwd[::-1] * ((-1.0) ** order)
        out[..., n - 1 - j] = arr[..., n - k - j : n - j] @ back / scale
    return out


@lru_cache(maxsize=256)
def _poly_row(window: int, degree: int, order: int, center: int) -> np.ndarray:
    """Weights so that ``weights @ samples`` is the fitted derivative at
    ``center`` (in index units; divide by h**order afterwards)."""
    s = np.arange(window) - center
    vand = np.vander(s.astype(float), degree + 1, increasing=True)
    pinv = np.linalg.pinv(vand)
    row = math.factorial(order) * pinv[order]
    row.setflags(write=False)
    return row


def _poly_along_last(
    arr: np.ndarray, h: float, order: int, degree: int, window: int
) -> np.ndarray:
    n = arr.shape[-1]
    if window > n:
        raise ValueError(f"window {window} exceeds axis length {n}")
    half = window // 2
    scale = h**order
    out = np.empty_like(arr)
    interior_row = _poly_row(window, degree, order, half)
    if n >= window:
        swv = np.lib.stride_tricks.sliding_window_view(arr, window, axis=-1)
        out[..., half : n - half] = swv @ interior_row / scale
    for j in range(half):
        out[..., j] = arr[..., :window] @ _poly_row(window, degree, order, j) / scale
        cr = window - 1 - j
        out[..., n - 1 - j] = arr[..., n - window :] @ _poly_row(
            window, degree, order, cr
        ) / scale
    return out


def _apply(grid: SnapshotGrid, spec: DerivativeSpec, fn) -> DerivativeResult:
    axis_index = 0 if spec.axis == "space" else 1
    h = grid.dx if spec.axis == "space" else grid.dt
    arr = np.moveaxis(np.asarray(grid.values), axis_index, -1)
    out = np.moveaxis(fn(arr, h), -1, axis_index)
    suffix = "x" * spec.order if spec.axis == "space" else "t" * spec.order
    name = f"{grid.field_name}_{suffix}"
    trim = (
        fd_trim(spec.order)
        if spec.method == "central_fd"
        else (spec.window or 1) // 2
    )
    return DerivativeResult(grid=grid.with_values(out, field_name=name), trim=trim)


def central_fd(grid: SnapshotGrid, spec: DerivativeSpec) -> DerivativeResult:
    """Differentiate with second-order central stencils; one-sided formulas
    of the same order fill the boundary band reported as ``trim``."""
    if spec.method != "central_fd":
        raise ValueError("spec.method must be 'central_fd'")
    return _apply(grid, spec, lambda a, h: _central_along_last(a, h, spec.order))


def poly_derivative(grid: SnapshotGrid, spec: DerivativeSpec) -> DerivativeResult:
    """Differentiate by sliding-window least-squares polynomial fits.

    Each point is fitted with a degree-``poly_degree`` polynomial over the
    ``window`` nearest samples (windows clamp to one-sided near the edges),
    in a center-shifted coordinate for conditioning; the fit is solved with
    an orthogonal factorization and its derivative evaluated at the point.
    """
    if spec.method != "polynomial":
        raise ValueError("spec.method must be 'polynomial'")
    return _apply(
        grid,
        spec,
        lambda a, h: _poly_along_last(a, h, spec.order, spec.poly_degree, spec.window),
    )


def differentiate(grid: SnapshotGrid, spec: DerivativeSpec) -> DerivativeResult:
    """Dispatch on ``spec.method``."""
    if spec.method == "central_fd":
        return central_fd(grid, spec)
    return poly_derivative(grid, spec)
