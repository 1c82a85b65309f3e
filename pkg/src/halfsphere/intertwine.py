"""Variable substitutions that conjugate the half-sphere mean transform into the paraboloid convolution.

With F = map_N(f) and G = map_M(g), the sphere-mean relation g = S f
becomes G = P F.  All maps act column by column along y; the x-lattice
of source and target grids must coincide.
"""
from __future__ import annotations

import math

import numpy as np

from .grid import Field, GridError, GridSpec, resample_y, same_x_lattice


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^n in R^(n+1)."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def paraboloid_grid_for(half: GridSpec, y_top: float | None = None) -> GridSpec:
    """Full-space grid (dy = dx^2) sharing the x-lattice of ``half``.

    y covers [-Y^2, Y^2 + R^2] where Y is the height of the half-space grid and
    R the largest |x| on it, so the image of the paraboloid convolution is
    not clipped.
    """
    Y = half.upper(half.n)
    R = max(abs(half.origin[0]), abs(half.upper(0)))
    top = Y * Y + R * R if y_top is None else y_top
    dx = half.dx
    dy = dx * dx
    j0 = math.floor(-Y * Y / dy)
    j1 = math.ceil(top / dy)
    n = half.n
    return GridSpec(n, half.dims[:-1] + (j1 - j0 + 1,), half.spacing[:-1] + (dy,),
                    half.origin[:-1] + (j0 * dy,))


def _need_x_match(src: GridSpec, dst: GridSpec) -> None:
    if not same_x_lattice(src, dst):
        raise GridError("source and target grids must share the x-lattice")


def _require_half(f: Field, what: str) -> None:
    if not f.half_space:
        raise GridError(f"{what} requires a field flagged half_space")


def _lift(f: Field, target: GridSpec, power: float, scale: float) -> Field:
    # target(x, y) = scale * y**power * f(x, sqrt(y)) for y > 0, else 0
    _need_x_match(f.grid, target)
    y = target.axis(target.n)
    pos = y > 0
    out = np.zeros(target.dims)
    if np.any(pos):
        yp = y[pos]
        col = resample_y(f.replace(f.values, compact=True), np.sqrt(yp))
        out[..., pos] = scale * yp**power * col
    return Field(target, out, half_space=True, compact=True)


def _lower(F: Field, target: GridSpec, power: float, scale: float) -> Field:
    # target(x, y) = scale * y**power * F(x, y^2) on the half-space grid
    _need_x_match(F.grid, target)
    y = target.axis(target.n)
    col = resample_y(F.replace(F.values, compact=True), y * y)
    out = scale * y**power * col
    out[..., y <= 0] = 0.0
    return Field(target, out, half_space=True)


def map_N(f: Field, target: GridSpec) -> Field:
    """F(x, y) = y^(-1/2) f(x, sqrt(y)) for y > 0 and 0 below."""
    _require_half(f, "map_N")
    if not target.paraboloid_compatible:
        raise GridError("map_N target grid must satisfy dy = dx^2")
    return _lift(f, target, -0.5, 1.0)


def map_N_inv(F: Field, target: GridSpec) -> Field:
    """f(x, y) = y F(x, y^2) on a half-space grid."""
    return _lower(F, target, 1.0, 1.0)


def map_M(g: Field, target: GridSpec) -> Field:
    """G(x, y) = |S^n|/2 * y^((n-1)/2) g(x, sqrt(y)) for y > 0 and 0 below."""
    _require_half(g, "map_M")
    n = g.n
    return _lift(g, target, 0.5 * (n - 1), 0.5 * sphere_area(n))


def map_M_inv(G: Field, target: GridSpec) -> Field:
    """g(x, y) = 2/|S^n| * y^(1-n) G(x, y^2) on a half-space grid."""
    n = G.n
    return _lower(G, target, 1.0 - n, 2.0 / sphere_area(n))


def map_L(f: Field, target: GridSpec) -> Field:
    """f(x, sqrt(y)) for y > 0 and 0 below (no weight)."""
    return _lift(f.replace(f.values, half_space=True) if f.grid.is_half_space else f, target, 0.0, 1.0)


def map_L_inv(F: Field, target: GridSpec) -> Field:
    """F(x, y^2) on a half-space grid."""
    return _lower(F, target, 0.0, 1.0)
