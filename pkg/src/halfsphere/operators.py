"""Direct-quadrature forward operators and their adjoints.

sphere_means_forward / sphere_means_adjoint act on half-space grids (first
row at y = dy).  parab_forward / parab_adjoint act on grids with dy = dx**2,
where every paraboloid stencil point is a lattice point.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from . import _kernels
from .grid import Field, GridError, GridSpec
from .intertwine import sphere_area


def default_umax(grid: GridSpec) -> float:
    """Default truncation radius: half the x-extent of the grid."""
    return 0.5 * grid.dims[0] * grid.dx


def _stencil_radius(grid: GridSpec, umax: float | None) -> int:
    U = default_umax(grid) if umax is None else float(umax)
    if U < 0:
        raise ValueError("umax must be non-negative")
    return int(math.floor(U / grid.dx + 1e-9))


def _with_zero_row(f: Field) -> np.ndarray:
    return np.concatenate([np.zeros(f.grid.dims[:-1] + (1,)), f.values], axis=-1)


def _require_half_space(f: Field, what: str) -> None:
    if not f.half_space:
        raise GridError(f"{what} requires a field flagged half_space")
    if not f.grid.is_half_space:
        raise GridError(f"{what} requires a half-space grid (first row at y = dy)")
    if f.n not in (1, 2):
        raise GridError(f"{what} is implemented for n = 1 and n = 2")


# ---------------------------------------------------------------------------
# half-sphere means
# ---------------------------------------------------------------------------

def sphere_means_forward(f: Field, arc: float | None = None) -> Field:
    """Averages of f over half-spheres centred on y = 0, radius = row height.

    With u = y sin(t) w the integral becomes
    (2/|S^n|) int_0^{pi/2} int_{S^(n-1)} f(x + y sin(t) w, y cos(t)) sin(t)^(n-1) dw dt,
    which has a bounded integrand.  ``arc`` is the target distance between
    neighbouring quadrature nodes on each half-sphere (default: the smaller
    grid spacing, halved for n = 1 where nodes are cheap).  Nodes leaving
    the grid box read 0.
    """
    _require_half_space(f, "sphere_means_forward")
    g = f.grid
    if arc is None:
        step = min(g.spacing) * (0.5 if g.n == 1 else 1.0)
    else:
        step = float(arc)
    v = _with_zero_row(f)
    if g.n == 1:
        out = _kernels.sphere_means_1d(v, g.origin[0], g.dx, g.dy, step)
    else:
        out = _kernels.sphere_means_2d(v, g.origin[0], g.origin[1], g.dx, g.dy, step)
    return Field(g, out, half_space=True)


def radial_sum(fields: list[np.ndarray], powers, coefs, grid: GridSpec, umax: float | None,
               dq: float, squared: bool = False) -> np.ndarray:
    """sum over lattice offsets u (|u| <= umax) of sum_c coefs[c] A_c(x+u, q) r**powers[c] du^n.

    Each A_c is sampled on the x-lattice of ``grid`` and on q = 0, dq, 2 dq, ...
    where q = r = sqrt(y^2 + |u|^2), or q = r^2 when ``squared``.  Output rows
    are the y rows of ``grid``.
    """
    A = np.ascontiguousarray(np.stack(fields, axis=0), dtype=np.float64)
    p = np.asarray(powers, dtype=np.float64)
    c = np.asarray(coefs, dtype=np.float64)
    K = _stencil_radius(grid, umax)
    ys = grid.axis(grid.n)
    if grid.n == 1:
        return _kernels.radial_adjoint_1d(A, p, c, dq, squared, ys, K, grid.dx)
    if grid.n == 2:
        return _kernels.radial_adjoint_2d(A, p, c, dq, squared, ys, K, grid.dx)
    raise GridError("radial sums are implemented for n = 1 and n = 2")


def sphere_means_adjoint(g: Field, umax: float | None = None) -> Field:
    """int_{|u| <= umax} g(x+u, sqrt(y^2 + |u|^2)) du on the lattice u in dx Z^n.

    Radii beyond the top row contribute 0.  This is the adjoint of
    sphere_means_forward for the data pairing weighted by |S^n| y^n / 2.
    """
    _require_half_space(g, "sphere_means_adjoint")
    grid = g.grid
    out = radial_sum([_with_zero_row(g)], [0.0], [1.0], grid, umax, grid.dy)
    return Field(grid, out, half_space=True)


def sphere_data_weight(grid: GridSpec) -> np.ndarray:
    """Row weights |S^n| y^n / 2 that make sphere_means_adjoint the adjoint of the forward map."""
    y = grid.axis(grid.n)
    return 0.5 * sphere_area(grid.n) * y**grid.n


# ---------------------------------------------------------------------------
# paraboloid convolution
# ---------------------------------------------------------------------------

def _require_parab(F: Field, what: str) -> None:
    if not F.grid.paraboloid_compatible:
        raise GridError(f"{what} needs a grid with dy = dx**2")


def stencil(n: int, K: int):
    """Lattice offsets k in Z^n with |k| <= K, in a fixed order, with their y-shifts |k|^2."""
    for k in itertools.product(range(-K, K + 1), repeat=n):
        s = sum(c * c for c in k)
        if s <= K * K:
            yield k, s


def _stencil_apply(V: np.ndarray, n: int, K: int, sign: int) -> np.ndarray:
    # out[i, j] += V[i + k, j - sign*|k|^2] for every stencil offset, zero outside
    dims = V.shape
    ny = dims[-1]
    out = np.zeros(dims)
    nz = np.nonzero(np.any(V != 0, axis=tuple(range(n))))[0]
    if nz.size == 0:
        return out
    r0, r1 = int(nz[0]), int(nz[-1]) + 1
    for k, s in stencil(n, K):
        dst, src = [], []
        ok = True
        for a, kk in enumerate(k):
            lo, hi = max(0, -kk), min(dims[a], dims[a] - kk)
            if lo >= hi:
                ok = False
                break
            dst.append(slice(lo, hi))
            src.append(slice(lo + kk, hi + kk))
        if not ok:
            continue
        # source rows r0..r1 land at rows shifted by sign*s
        a0, a1 = r0 + sign * s, r1 + sign * s
        b0, b1 = max(a0, 0), min(a1, ny)
        if b0 >= b1:
            continue
        dst.append(slice(b0, b1))
        src.append(slice(b0 - sign * s, b1 - sign * s))
        out[tuple(dst)] += V[tuple(src)]
    return out


def parab_forward(F: Field, umax: float | None = None) -> Field:
    """sum_{|k dx| <= umax} F(x + k dx, y - |k|^2 dx^2) dx^n, zero outside the grid."""
    _require_parab(F, "parab_forward")
    g = F.grid
    K = _stencil_radius(g, umax)
    out = _stencil_apply(F.values, g.n, K, +1) * g.dx**g.n
    return Field(g, out)


def parab_adjoint(G: Field, umax: float | None = None) -> Field:
    """sum_{|k dx| <= umax} G(x + k dx, y + |k|^2 dx^2) dx^n; the exact discrete adjoint of parab_forward."""
    _require_parab(G, "parab_adjoint")
    g = G.grid
    K = _stencil_radius(g, umax)
    out = _stencil_apply(G.values, g.n, K, -1) * g.dx**g.n
    return Field(g, out)
