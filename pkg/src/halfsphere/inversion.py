"""Inversion pipelines for the paraboloid convolution and the half-sphere mean transform."""
from __future__ import annotations

import math

import numpy as np

from .grid import Field, GridError
from .intertwine import map_M, map_N_inv, paraboloid_grid_for, sphere_area
from .operators import parab_adjoint, radial_sum, sphere_means_adjoint
from .spectral import apply_y_symbol, hilbert_symbol, invert_P_fourier, lambda_y


def invert_P_backprojection(G: Field, umax: float | None = None, pad: float = 2.0) -> Field:
    """pi^-n P*(Lambda_y G).

    The discrete P* samples its argument every dx along the parabola, where
    the y-argument advances by about 2|u| dx per step.  Keep ``umax`` below
    roughly (feature width)/dx or the filtered data alias; the default is the
    operators-module default (half the x-extent).
    """
    n = G.n
    L = lambda_y(G, n, pad=pad)
    return parab_adjoint(L, umax) * (1.0 / math.pi**n)


# ---------------------------------------------------------------------------
# the one-dimensional filter
# ---------------------------------------------------------------------------

def _with_zero(phi: np.ndarray) -> np.ndarray:
    return np.concatenate([np.zeros(phi.shape[:-1] + (1,)), phi], axis=-1)


def _k_y_native(phi: np.ndarray, dy: float, n: int, pad: float) -> np.ndarray:
    # t = s^2 turns d/dt into (1/2s) d/ds; the Hilbert transform of a function on
    # t >= 0 is the Hilbert transform in s of its odd extension sgn(s) h(s^2).
    ny = phi.shape[-1]
    s = dy * np.arange(ny + 1)
    h = _with_zero(phi) * s ** (n - 1)
    for _ in range(n):
        d = np.gradient(h, dy, axis=-1, edge_order=2)
        h = np.empty_like(d)
        h[..., 1:] = d[..., 1:] / (2.0 * s[1:])
        h[..., 0] = h[..., 1]
    if n % 2:
        q = h[..., 1:]
        full = np.concatenate([-q[..., ::-1], np.zeros(q.shape[:-1] + (1,)), q], axis=-1)
        out = apply_y_symbol(full, dy, hilbert_symbol, pad=pad)[..., ny + 1:]
        out = out * (-1) ** ((n - 1) // 2)
    else:
        out = h[..., 1:] * (-1) ** (n // 2)
    return out * sphere_area(n) / (2.0 * math.pi**n)


def _k_y_tgrid(phi: np.ndarray, dy: float, n: int, pad: float, count: int | None) -> np.ndarray:
    ny = phi.shape[-1]
    Y = ny * dy
    m = ny if count is None else int(count)
    dt = Y * Y / m
    t = dt * np.arange(m + 1)
    s = np.sqrt(t) / dy
    base = _with_zero(phi)
    j = np.minimum(np.floor(s).astype(np.int64), ny - 1)
    a = s - j
    chi = (base[..., j] * (1.0 - a) + base[..., j + 1] * a) * t ** ((n - 1) / 2.0)
    lam = apply_y_symbol(chi, dt, lambda eta: np.abs(eta) ** n, pad=pad)
    q = (dy * np.arange(1, ny + 1)) ** 2 / dt
    j = np.minimum(np.floor(q).astype(np.int64), m - 1)
    a = q - j
    out = lam[..., j] * (1.0 - a) + lam[..., j + 1] * a
    return out * sphere_area(n) / (2.0 * math.pi**n)


def k_y(phi: np.ndarray, dy: float, n: int, method: str = "native", pad: float = 2.0,
        count: int | None = None) -> np.ndarray:
    """The radial filter |S^n|/(2 pi^n) Lambda_t(t^((n-1)/2) phi(sqrt t)) at t = y^2.

    ``phi`` holds samples at y = dy, 2 dy, ..., along its last axis, with
    phi(0) = 0 implied.  ``method="native"`` applies d/dt = (1/2y) d/dy and
    the Hilbert transform in t through the odd extension in y, so no
    resampling is needed.  ``method="tgrid"`` resamples onto a uniform
    t-grid with ``count`` samples (default: as many as y rows), filters there
    and reads back at t = y^2.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "native":
        return _k_y_native(phi, dy, n, pad)
    if method == "tgrid":
        return _k_y_tgrid(phi, dy, n, pad, count)
    raise ValueError(f"unknown k_y method {method!r}")


# ---------------------------------------------------------------------------
# inversion of the half-sphere means
# ---------------------------------------------------------------------------

def _require(g: Field, n: int | None, what: str) -> None:
    if not g.half_space or not g.grid.is_half_space:
        raise GridError(f"{what} needs half-space data on a half-space grid")
    if n is not None and g.n != n:
        raise GridError(f"{what} is defined for n = {n}, got n = {g.n}")


def invert_S(g: Field, umax: float | None = None, method: str = "native", pad: float = 2.0) -> Field:
    """f = y S*(k_y g), filtering every x-column along the radius axis."""
    _require(g, None, "invert_S")
    kg = Field(g.grid, k_y(g.values, g.grid.dy, g.n, method=method, pad=pad), half_space=True)
    adj = sphere_means_adjoint(kg, umax)
    y = g.grid.axis(g.n)
    return Field(g.grid, adj.values * y, half_space=True)


def invert_S_2d(g: Field, umax: float | None = None, dt: float | None = None, pad: float = 2.0) -> Field:
    """f(x, y) = (y/pi) int du PV int_0^inf g_s(x+u, s) / (y^2 + u^2 - s^2) ds   (n = 1).

    With t = s^2 the inner integral is pi times the Hilbert transform in t of
    g_s(sqrt t)/(2 sqrt t), evaluated at t = y^2 + u^2.  That function is
    sampled on a uniform t-grid of step ``dt`` (default dy^2) over
    [0, Y^2 + umax^2] and transformed spectrally.
    """
    _require(g, 1, "invert_S_2d")
    grid = g.grid
    dy = grid.dy
    ny = grid.dims[-1]
    Y = ny * dy
    U = 0.5 * grid.dims[0] * grid.dx if umax is None else float(umax)
    step = dy * dy if dt is None else float(dt)
    d = np.gradient(_with_zero(g.values), dy, axis=-1, edge_order=2)
    m = int(math.ceil((Y * Y + U * U) / step)) + 1
    t = step * np.arange(m)
    s = np.sqrt(t)
    inside = s <= Y * (1.0 + 1e-12)
    q = np.minimum(s / dy, ny)
    j = np.minimum(np.floor(q).astype(np.int64), ny - 1)
    a = q - j
    dd = d[:, j] * (1.0 - a) + d[:, j + 1] * a
    chi = np.zeros_like(dd)
    chi[:, 1:] = dd[:, 1:] / (2.0 * s[1:])
    chi[:, 0] = chi[:, 1]
    chi[:, ~inside] = 0.0
    hc = apply_y_symbol(chi, step, hilbert_symbol, pad=pad)
    out = radial_sum([hc], [0.0], [1.0], grid, U, step, squared=True)
    y = grid.axis(1)
    return Field(grid, out * y, half_space=True)


def invert_S_3d(g: Field, umax: float | None = None) -> Field:
    """f(x, y) = (y/2pi) int [g/r^3 - g_r/r^2 - g_rr/r](x+u, r) du, r = sqrt(y^2 + |u|^2)   (n = 2).

    Radial derivatives use centred differences (one-sided at the ends),
    including the implied zero sample at radius 0.
    """
    _require(g, 2, "invert_S_3d")
    grid = g.grid
    dy = grid.dy
    g0 = _with_zero(g.values)
    g1 = np.gradient(g0, dy, axis=-1, edge_order=2)
    g2 = np.gradient(g1, dy, axis=-1, edge_order=2)
    out = radial_sum([g0, g1, g2], [-3.0, -2.0, -1.0], [1.0, -1.0, -1.0], grid, umax, dy)
    y = grid.axis(2)
    return Field(grid, out * y / (2.0 * math.pi), half_space=True)


def invert_S_conjugation(g: Field, route: str = "fourier", rolloff: float | None = 0.8,
                         umax: float | None = None) -> Field:
    """f = N^-1 P^-1 M g: lift the data to the paraboloid picture, invert P, map back."""
    _require(g, None, "invert_S_conjugation")
    target = paraboloid_grid_for(g.grid)
    G = map_M(g, target)
    if route == "fourier":
        F = invert_P_fourier(G, rolloff=rolloff)
    elif route == "backprojection":
        F = invert_P_backprojection(G, umax)
    else:
        raise ValueError(f"unknown route {route!r}")
    return map_N_inv(F, g.grid)
