"""Uniform sampling lattices, sampled fields, Gaussian phantoms and interpolation.

Coordinates are ordered (x_1, ..., x_n, y).  The last axis is the vertical
one; field values are stored row-major with y varying fastest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GridError(ValueError):
    """Raised for malformed or mismatched grids."""


class OutOfDomainError(ValueError):
    """Raised when an interpolation point leaves the grid of a field that is not known to vanish there."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice on R^n x R.

    ``dims``, ``spacing`` and ``origin`` have n+1 entries; the last one
    describes the y-axis.  All x-axes share the same spacing.
    """

    n: int
    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        if self.n < 1:
            raise GridError("n must be >= 1")
        if not (len(dims) == len(spacing) == len(origin) == self.n + 1):
            raise GridError("dims, spacing and origin need n+1 entries")
        if min(dims) < 2:
            raise GridError("every axis needs at least 2 samples")
        if min(spacing) <= 0:
            raise GridError("spacings must be positive")
        if self.n > 1 and not np.allclose(spacing[:-1], spacing[0], rtol=1e-14, atol=0):
            raise GridError("all x-axes must share one spacing")

    # -- constructors -------------------------------------------------------
    @classmethod
    def half_space(cls, n: int, nx: int, x_extent: float, ny: int, y_extent: float) -> "GridSpec":
        """Grid on [-X, X)^n x (0, Y]; the first y row sits at y = dy, never at 0."""
        dx = 2.0 * x_extent / nx
        dy = y_extent / ny
        return cls(n, (nx,) * n + (ny,), (dx,) * n + (dy,), (-x_extent,) * n + (dy,))

    @classmethod
    def paraboloid(cls, n: int, nx: int, dx: float, y_min: float, y_max: float) -> "GridSpec":
        """Full-space grid with dy = dx**2, x centred on 0, y covering [y_min, y_max]."""
        dy = dx * dx
        j0 = math.floor(y_min / dy + 1e-9)
        j1 = math.ceil(y_max / dy - 1e-9)
        return cls(n, (nx,) * n + (j1 - j0 + 1,), (dx,) * n + (dy,), (-0.5 * nx * dx,) * n + (j0 * dy,))

    # -- geometry -----------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def dx(self) -> float:
        return self.spacing[0]

    @property
    def dy(self) -> float:
        return self.spacing[-1]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def paraboloid_compatible(self) -> bool:
        """True when dy equals dx**2, so every paraboloid stencil point is a lattice point."""
        return math.isclose(self.dy, self.dx * self.dx, rel_tol=1e-12)

    @property
    def is_half_space(self) -> bool:
        """True for grids whose first y row is at y = dy (strictly inside the upper half-space)."""
        return self.origin[-1] > 0 and math.isclose(self.origin[-1], self.dy, rel_tol=1e-9)

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing[k] * np.arange(self.dims[k])

    def axes(self) -> list[np.ndarray]:
        return [self.axis(k) for k in range(self.n + 1)]

    def upper(self, k: int) -> float:
        return self.origin[k] + self.spacing[k] * (self.dims[k] - 1)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All lattice points as an array of shape dims + (n+1,)."""
        return np.stack(self.mesh(), axis=-1)

    def index_of(self, point: Sequence[float]) -> tuple[int, ...] | None:
        """Lattice index of a point, or None if the point is off-lattice."""
        idx = []
        for k, c in enumerate(point):
            s = (c - self.origin[k]) / self.spacing[k]
            r = round(s)
            if abs(s - r) > 1e-9 or not 0 <= r < self.dims[k]:
                return None
            idx.append(int(r))
        return tuple(idx)

    def with_dims(self, dims: Sequence[int]) -> "GridSpec":
        return GridSpec(self.n, tuple(dims), self.spacing, self.origin)


@dataclass(frozen=True)
class Field:
    """Real samples on a grid.

    ``half_space`` marks a function that vanishes for y <= 0; ``compact``
    marks a function known to vanish outside the grid box.  Either flag
    makes out-of-box interpolation return 0.
    """

    grid: GridSpec
    values: np.ndarray
    half_space: bool = False
    compact: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.size != self.grid.size:
            raise GridError(f"expected {self.grid.size} samples, got {v.size}")
        v = v.reshape(self.grid.dims)
        if self.half_space:
            y = self.grid.axis(self.grid.n)
            low = y <= 0
            if np.any(low) and np.any(v[..., low] != 0):
                raise GridError("half_space field has nonzero samples at y <= 0")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.grid.n

    def replace(self, values: np.ndarray, **flags) -> "Field":
        kw = dict(half_space=self.half_space, compact=self.compact)
        kw.update(flags)
        return Field(self.grid, values, **kw)

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return self.replace(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return self.replace(self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return self.replace(self.values * float(scalar))

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.sqrt(inner_product(self, self))


def zeros(grid: GridSpec, **flags) -> Field:
    return Field(grid, np.zeros(grid.dims), **flags)


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


@dataclass(frozen=True)
class Bump:
    center: tuple[float, ...]
    amplitude: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.width <= 0:
            raise ValueError("bump width must be positive")
        if self.center[-1] <= 3.0 * self.width:
            raise ValueError(
                f"bump at height {self.center[-1]} is closer than 3 widths ({self.width}) to y = 0"
            )


@dataclass(frozen=True)
class Phantom:
    """Sum of isotropic Gaussian bumps amplitude * exp(-|p - c|^2 / (2 w^2))."""

    bumps: tuple[Bump, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        dims = {len(b.center) for b in self.bumps}
        if len(dims) > 1:
            raise ValueError("bumps have mixed dimensions")

    @classmethod
    def single(cls, center: Sequence[float], width: float, amplitude: float = 1.0) -> "Phantom":
        return cls((Bump(tuple(center), amplitude, width),))

    @classmethod
    def random(cls, n: int, count: int, rng: np.random.Generator, x_range: float,
               y_range: tuple[float, float], width_range: tuple[float, float]) -> "Phantom":
        """Random bumps with centres drawn so that each keeps the 3-width clearance."""
        bumps = []
        for _ in range(count):
            w = float(rng.uniform(*width_range))
            x = rng.uniform(-x_range, x_range, size=n)
            y = float(rng.uniform(max(y_range[0], 3.0 * w * 1.0001), max(y_range[1], 3.0 * w * 1.001)))
            amp = float(rng.uniform(0.5, 1.5))
            bumps.append(Bump(tuple(x) + (y,), amp, w))
        return cls(tuple(bumps))

    @property
    def peak(self) -> float:
        return max((abs(b.amplitude) for b in self.bumps), default=0.0)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return evaluate_phantom(self, points)


def evaluate_phantom(p: Phantom, point) -> np.ndarray | float:
    """Evaluate the phantom at one point (sequence) or an array of points (..., n+1)."""
    pts = np.asarray(point, dtype=np.float64)
    out = np.zeros(pts.shape[:-1])
    for b in p.bumps:
        c = np.asarray(b.center)
        if c.size != pts.shape[-1]:
            raise ValueError("point dimension does not match phantom")
        r2 = np.sum((pts - c) ** 2, axis=-1)
        out = out + b.amplitude * np.exp(-r2 / (2.0 * b.width**2))
    return float(out) if out.ndim == 0 else out


def _separable_sample(p: Phantom, grid: GridSpec) -> np.ndarray:
    out = np.zeros(grid.dims)
    axes = grid.axes()
    for b in p.bumps:
        term = np.array(b.amplitude)
        for k, a in enumerate(axes):
            fac = np.exp(-((a - b.center[k]) ** 2) / (2.0 * b.width**2))
            term = np.multiply.outer(term, fac)
        out += term
    return out


def sample_phantom(p: Phantom, grid: GridSpec) -> Field:
    """Sample the phantom on every lattice point.

    The half-space flag is set when every bump sits in y > 0 and the sampled
    mass at rows y <= 0 is below 1e-12 of the peak; those rows are then
    zeroed so the flag's invariant holds exactly.  Half-space grids have no
    such rows, so any phantom sampled on them is flagged.
    """
    values = _separable_sample(p, grid)
    y = grid.axis(grid.n)
    low = y <= 0
    half = all(b.center[-1] > 0 for b in p.bumps)
    if half and np.any(low):
        tail = float(np.sum(np.abs(values[..., low])))
        peak = p.peak
        half = tail <= 1e-12 * peak if peak > 0 else True
        if half:
            values[..., low] = 0.0
    return Field(grid, values, half_space=half)


def _snap(s: np.ndarray) -> np.ndarray:
    # fractional indices within round-off of a lattice index become exact
    r = np.rint(s)
    return np.where(np.abs(s - r) <= 1e-9, r, s)


def interpolate(f: Field, points) -> np.ndarray | float:
    """Multilinear interpolation of ``f`` at one point or an array of points (..., n+1).

    Exact at lattice points.  For half-space fields the function is taken to
    be 0 at y = 0, so points between y = 0 and the first row interpolate
    towards 0.  Out-of-box points give 0 for half-space or compact fields and
    raise OutOfDomainError otherwise.
    """
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    g = f.grid
    d = g.n + 1
    if pts.shape[-1] != d:
        raise ValueError("point dimension does not match grid")
    vals = f.values
    origin = np.array(g.origin)
    # half-space fields get a virtual zero row at y = 0 when the grid starts at dy
    if f.half_space and g.is_half_space:
        vals = np.concatenate([np.zeros(g.dims[:-1] + (1,)), vals], axis=-1)
        origin[-1] -= g.dy
    dims = np.array(vals.shape)
    s = _snap((pts - origin) / np.array(g.spacing))
    tol = 1e-9
    inside = np.all((s >= -tol) & (s <= dims - 1 + tol), axis=-1)
    if not np.all(inside) and not (f.half_space or f.compact):
        raise OutOfDomainError("interpolation point outside the grid box")
    s = np.clip(s, 0, dims - 1)
    i0 = np.minimum(np.floor(s).astype(np.int64), dims - 2)
    fr = s - i0
    flat = vals.reshape(-1)
    strides = np.array([int(np.prod(dims[k + 1:])) for k in range(d)])
    out = np.zeros(pts.shape[:-1])
    for corner in range(1 << d):
        w = np.ones(pts.shape[:-1])
        idx = np.zeros(pts.shape[:-1], dtype=np.int64)
        for k in range(d):
            bit = (corner >> k) & 1
            w = w * (fr[..., k] if bit else 1.0 - fr[..., k])
            idx = idx + (i0[..., k] + bit) * strides[k]
        out += w * flat[idx]
    out = np.where(inside, out, 0.0)
    return float(out[0]) if scalar else out


def inner_product(a: Field, b: Field) -> float:
    """Discrete L2 pairing: sum of a_i b_i times the cell volume (pairwise summation)."""
    _check_same_grid(a, b)
    return float(np.sum((a.values * b.values).ravel())) * a.grid.cell_volume


def resample_y(f: Field, y_query: np.ndarray) -> np.ndarray:
    """Linear interpolation of every x-column of ``f`` at heights ``y_query``.

    Equivalent to :func:`interpolate` at points (x_lattice, y) but without
    materialising the point array.  Returns shape dims[:-1] + (len(y_query),).
    Heights outside the column give 0 for half-space/compact fields; for
    other fields they raise OutOfDomainError.
    """
    g = f.grid
    vals = f.values
    y0, dy = g.origin[-1], g.dy
    if f.half_space and g.is_half_space:
        vals = np.concatenate([np.zeros(g.dims[:-1] + (1,)), vals], axis=-1)
        y0 -= dy
    m = vals.shape[-1]
    s = _snap((np.asarray(y_query, dtype=np.float64) - y0) / dy)
    tol = 1e-9
    inside = (s >= -tol) & (s <= m - 1 + tol)
    if not np.all(inside) and not (f.half_space or f.compact):
        raise OutOfDomainError("resampling height outside the grid")
    s = np.clip(s, 0, m - 1)
    j = np.minimum(np.floor(s).astype(np.int64), m - 2)
    a = s - j
    out = vals[..., j] * (1.0 - a) + vals[..., j + 1] * a
    out[..., ~inside] = 0.0
    return out


def same_x_lattice(a: GridSpec, b: GridSpec) -> bool:
    return (a.n == b.n and a.dims[:-1] == b.dims[:-1]
            and np.allclose(a.spacing[:-1], b.spacing[:-1], rtol=1e-12, atol=0)
            and np.allclose(a.origin[:-1], b.origin[:-1], rtol=0, atol=1e-12 * max(1.0, abs(a.origin[0]))))
