"""Hyperplane Radon transform, its filtered inversion and the sinogram convolution intertwined with P.

A hyperplane is (w, t) . (x, y) = p with unit normal (w, t), w in R^n, t in R.
The back-projection averages over the stored directions with the given
weights (uniform weights approximate the normalized sphere measure).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .grid import Field, GridError, GridSpec
from .intertwine import sphere_area
from .spectral import apply_y_symbol, rolloff_window


class GeneralPositionError(ValueError):
    """Raised when an operation needs every direction to have t != 0 (or w != 0)."""


@dataclass(frozen=True)
class Sinogram:
    """Samples psi[m, l] = psi(direction m, p0 + l dp).

    ``weights`` are the quadrature weights of the directions; by default
    1/(number of directions).
    """

    n: int
    directions: np.ndarray
    p0: float
    dp: float
    values: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.array(self.directions, dtype=np.float64, copy=True)
        if d.ndim != 2 or d.shape[1] != self.n + 1:
            raise ValueError("directions must have shape (count, n+1)")
        nrm = np.linalg.norm(d, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-6):
            raise ValueError("directions must be unit vectors")
        d /= nrm[:, None]
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2 or v.shape[0] != d.shape[0]:
            raise ValueError("values must have shape (count, p samples)")
        if self.dp <= 0:
            raise ValueError("dp must be positive")
        w = (np.full(d.shape[0], 1.0 / d.shape[0]) if self.weights is None
             else np.array(self.weights, dtype=np.float64, copy=True))
        if w.shape != (d.shape[0],):
            raise ValueError("one weight per direction is required")
        for a in (d, v, w):
            a.setflags(write=False)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "p0", float(self.p0))
        object.__setattr__(self, "dp", float(self.dp))

    @property
    def p_grid(self) -> np.ndarray:
        return self.p0 + self.dp * np.arange(self.values.shape[1])

    @property
    def omega(self) -> np.ndarray:
        return self.directions[:, :-1]

    @property
    def theta(self) -> np.ndarray:
        return self.directions[:, -1]

    def replace(self, values: np.ndarray) -> "Sinogram":
        return Sinogram(self.n, self.directions, self.p0, self.dp, values, self.weights)


# ---------------------------------------------------------------------------
# direction sets and offset grids
# ---------------------------------------------------------------------------

def circle_directions(count: int, exclude: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Equally spaced normals (cos a, sin a), a = 2 pi (m + 1/2)/count, on the full circle.

    Directions with |sin a| < ``exclude`` are dropped; the remaining ones keep
    weight 1/count, so the dropped band simply contributes nothing to the
    back-projection.  Returns (directions, weights).
    """
    a = 2.0 * np.pi * (np.arange(count) + 0.5) / count
    d = np.stack([np.cos(a), np.sin(a)], axis=1)
    keep = np.abs(d[:, 1]) >= exclude
    return d[keep], np.full(int(keep.sum()), 1.0 / count)


def fibonacci_directions(count: int, exclude: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Fibonacci-lattice normals on S^2 (last component is the vertical one), weight 1/count each."""
    k = np.arange(count) + 0.5
    t = 1.0 - 2.0 * k / count
    r = np.sqrt(1.0 - t * t)
    phi = np.pi * (3.0 - math.sqrt(5.0)) * k
    d = np.stack([r * np.cos(phi), r * np.sin(phi), t], axis=1)
    keep = np.abs(d[:, 2]) >= exclude
    return d[keep], np.full(int(keep.sum()), 1.0 / count)


def default_directions(n: int, count: int, exclude: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return circle_directions(count, exclude)
    if n == 2:
        return fibonacci_directions(count, exclude)
    raise GridError("Radon transforms are implemented in dimensions 2 and 3")


def box_corners(grid: GridSpec) -> np.ndarray:
    lo = np.array(grid.origin)
    hi = np.array([grid.upper(k) for k in range(grid.n + 1)])
    return np.array([np.where(c, hi, lo) for c in itertools.product((0, 1), repeat=grid.n + 1)])


def p_grid_for(grid: GridSpec, count: int | None = None) -> tuple[float, float, int]:
    """Symmetric offsets [-p_max, p_max] with p_max = max(box diameter, farthest corner).

    Spacing is the smaller grid spacing unless ``count`` fixes the number of
    offsets.  Returns (p0, dp, count).
    """
    corners = box_corners(grid)
    diam = float(np.linalg.norm(corners.max(0) - corners.min(0)))
    pmax = max(diam, float(np.max(np.linalg.norm(corners, axis=1))))
    if count is None:
        dp = min(grid.spacing)
        m = int(math.ceil(pmax / dp))
        return -m * dp, dp, 2 * m + 1
    if count < 2:
        raise ValueError("need at least 2 offsets")
    dp = 2.0 * pmax / (count - 1)
    return -pmax, dp, int(count)


def _check_dim(n: int) -> None:
    if n not in (1, 2):
        raise GridError("Radon transforms are implemented in dimensions 2 and 3 (n = 1, 2)")


def _frames(dirs: np.ndarray) -> np.ndarray:
    # orthonormal in-plane pair for every normal in R^3
    out = np.empty((dirs.shape[0], 2, 3))
    for m, v in enumerate(dirs):
        a = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(v, a)
        e1 /= np.linalg.norm(e1)
        out[m, 0] = e1
        out[m, 1] = np.cross(v, e1)
    return out


# ---------------------------------------------------------------------------
# R, R*, inversion
# ---------------------------------------------------------------------------

def radon_forward(phi: Field, directions: np.ndarray, p0: float | None = None, dp: float | None = None,
                  count: int | None = None, weights: np.ndarray | None = None,
                  ds: float | None = None) -> Sinogram:
    """Integrals of phi over hyperplanes, sampled in-plane every ``ds`` (default: smaller grid spacing).

    Without p0/dp the offsets come from :func:`p_grid_for`.  Outside the grid
    box phi is taken as 0.
    """
    g = phi.grid
    _check_dim(g.n)
    dirs = np.ascontiguousarray(directions, dtype=np.float64)
    if dirs.ndim != 2 or dirs.shape[1] != g.n + 1:
        raise ValueError("directions must have shape (count, n+1)")
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    if p0 is None or dp is None:
        p0, dp, count = p_grid_for(g, count)
    elif count is None:
        raise ValueError("count is required with explicit p0 and dp")
    step = min(g.spacing) if ds is None else float(ds)
    v = np.ascontiguousarray(phi.values)
    if g.n == 1:
        out = _kernels.radon_2d(v, g.origin[0], g.origin[1], g.dx, g.dy, dirs, p0, dp, count, step)
    else:
        out = _kernels.radon_3d(v, np.array(g.origin), g.dx, g.dy, dirs, _frames(dirs), p0, dp, count, step)
    return Sinogram(g.n, dirs, p0, dp, out, weights)


def radon_adjoint(psi: Sinogram, grid: GridSpec) -> Field:
    """Weighted average over directions of psi(direction, direction . point), linear in p."""
    _check_dim(psi.n)
    if grid.n != psi.n:
        raise GridError("grid dimension does not match the sinogram")
    dirs = np.ascontiguousarray(psi.directions)
    vals = np.ascontiguousarray(psi.values)
    w = np.ascontiguousarray(psi.weights)
    ax = grid.axes()
    if psi.n == 1:
        out = _kernels.radon_adjoint_2d(vals, dirs, w, psi.p0, psi.dp, ax[0], ax[1])
    else:
        out = _kernels.radon_adjoint_3d(vals, dirs, w, psi.p0, psi.dp, ax[0], ax[1], ax[2])
    return Field(grid, out)


def ramp_p(psi: Sinogram, order: int | None = None, pad: float = 2.0,
           rolloff: float | None = None) -> Sinogram:
    """Apply the symbol |xi|^order along p for every direction (default order n)."""
    k = psi.n if order is None else int(order)

    def sym(xi):
        return np.abs(xi) ** k * rolloff_window(xi, psi.dp, rolloff)

    return psi.replace(apply_y_symbol(psi.values, psi.dp, sym, pad=pad))


def radon_constant(n: int) -> float:
    """(-2 pi)^-n pi^((n+1)/2) / Gamma((n+1)/2); equals -1/2 for n = 1."""
    return (-2.0 * math.pi) ** (-n) * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def inversion_constant(n: int) -> float:
    """Positive constant c with phi = c R* |xi|^n R phi: (2 pi)^-n |S^n| / 2.

    It differs from :func:`radon_constant` by the factor (-1)^n.
    """
    return (-1) ** n * radon_constant(n)


def radon_invert(psi: Sinogram, grid: GridSpec, pad: float = 2.0, rolloff: float | None = None) -> Field:
    """Filtered back-projection: inversion_constant(n) R*(|xi|^n psi)."""
    filt = ramp_p(psi, pad=pad, rolloff=rolloff)
    return radon_adjoint(filt, grid) * inversion_constant(psi.n)


# ---------------------------------------------------------------------------
# the sinogram convolution
# ---------------------------------------------------------------------------

def _require_general(psi: Sinogram, what: str) -> None:
    if np.any(psi.theta == 0):
        raise GeneralPositionError(f"{what} needs every direction to have a nonzero vertical component")


def _u_lattice(n: int, umax: float, du: float) -> np.ndarray:
    K = int(math.floor(umax / du + 1e-9))
    pts = [k for k in itertools.product(range(-K, K + 1), repeat=n) if sum(c * c for c in k) <= K * K]
    return np.array(pts, dtype=np.float64) * du


def _default_umax(psi: Sinogram) -> float:
    return 0.25 * psi.dp * (psi.values.shape[1] - 1)


def _qp_quadrature(psi: Sinogram, umax: float | None, du: float | None, sign: float) -> Sinogram:
    U = _default_umax(psi) if umax is None else float(umax)
    step = psi.dp if du is None else float(du)
    u = _u_lattice(psi.n, U, step)
    shifts = psi.omega @ u.T + sign * psi.theta[:, None] * np.sum(u * u, axis=1)[None, :]
    out = _kernels.shift_sum(np.ascontiguousarray(psi.values), np.ascontiguousarray(shifts),
                             psi.p0, psi.dp, step**psi.n)
    return psi.replace(out)


def qp_forward(psi: Sinogram, umax: float | None = None, du: float | None = None) -> Sinogram:
    """sum over the u-lattice (|u| <= umax) of psi(p + w.u - t|u|^2) du^n, per direction.

    Defaults: du = dp and umax = a quarter of the offset range.
    """
    _require_general(psi, "qp_forward")
    return _qp_quadrature(psi, umax, du, -1.0)


def qp_adjoint(psi: Sinogram, umax: float | None = None, du: float | None = None) -> Sinogram:
    """sum over the u-lattice of psi(p + w.v + t|v|^2) dv^n, per direction."""
    _require_general(psi, "qp_adjoint")
    return _qp_quadrature(psi, umax, du, +1.0)


def qp_invert(psi: Sinogram, method: str = "spectral", pad: float = 2.0, rolloff: float | None = None,
              umax: float | None = None, du: float | None = None) -> Sinogram:
    """Invert the sinogram convolution direction by direction.

    ``method="spectral"`` divides by its Fourier multiplier (the xi = 0 bin is
    set to 0); ``method="quadrature"`` evaluates (|t|^n/pi^n) Q*(|xi|^n psi)
    with the truncated quadrature of :func:`qp_adjoint`.
    """
    _require_general(psi, "qp_invert")
    n = psi.n
    if method == "quadrature":
        lam = ramp_p(psi, pad=pad, rolloff=rolloff)
        adj = qp_adjoint(lam, umax, du)
        return adj.replace(adj.values * (np.abs(psi.theta)[:, None] ** n / math.pi**n))
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    npts = psi.values.shape[1]
    N = int(math.ceil(pad * npts))
    xi = 2.0 * np.pi * np.fft.rfftfreq(N, d=psi.dp)
    V = np.fft.rfft(psi.values, n=N, axis=1)
    win = rolloff_window(xi, psi.dp, rolloff)
    w2 = np.sum(psi.omega**2, axis=1)
    for m in range(V.shape[0]):
        a = xi * psi.theta[m]
        mult = np.zeros(xi.shape, dtype=np.complex128)
        nz = a != 0
        aa = a[nz]
        # 1/Q_hat = |a|^n pi^-n conj(Q_hat)
        mult[nz] = (np.abs(aa) / np.pi) ** (n / 2.0) * np.exp(
            -1j * (xi[nz] ** 2 * w2[m] - np.pi * n * np.abs(aa)) / (4.0 * aa))
        V[m] *= mult * win
    return psi.replace(np.fft.irfft(V, n=N, axis=1)[:, :npts])


def fill_circle_gaps(psi: Sinogram, count: int) -> Sinogram:
    """Extend a sinogram on a subset of the ``count`` equally spaced circle normals to the full set.

    Missing directions are filled by linear interpolation in angle between
    the nearest stored neighbours on either side.  The result has uniform
    weights 1/count.
    """
    if psi.n != 1:
        raise GridError("fill_circle_gaps is defined for n = 1")
    a = 2.0 * np.pi * (np.arange(count) + 0.5) / count
    full = np.stack([np.cos(a), np.sin(a)], axis=1)
    stored = np.mod(np.arctan2(psi.theta, psi.omega[:, 0]), 2.0 * np.pi)
    slot = np.round(stored / (2.0 * np.pi) * count - 0.5).astype(int) % count
    if np.any(np.abs(a[slot] - stored) > 1e-9 * count):
        raise ValueError("stored directions are not on the equally spaced circle set")
    vals = np.zeros((count, psi.values.shape[1]))
    have = np.zeros(count, dtype=bool)
    vals[slot] = psi.values
    have[slot] = True
    idx = np.nonzero(have)[0]
    if idx.size == 0:
        raise ValueError("no stored directions")
    for m in np.nonzero(~have)[0]:
        below, above = idx[idx < m], idx[idx > m]
        i0 = below[-1] if below.size else idx[-1]
        i1 = above[0] if above.size else idx[0]
        a0 = a[i0] if i0 < m else a[i0] - 2.0 * np.pi
        a1 = a[i1] if i1 > m else a[i1] + 2.0 * np.pi
        t = (a[m] - a0) / (a1 - a0)
        vals[m] = (1.0 - t) * vals[i0] + t * vals[i1]
    return Sinogram(1, full, psi.p0, psi.dp, vals)


def invert_P_radon(G: Field, directions: int = 180, exclude: float = 0.05,
                   rolloff: float | None = None, pad: float = 2.0, fill: bool = True) -> Field:
    """F = R^-1 Q^-1 R G on the grid of G (n = 1).

    R G is sampled on ``directions`` equally spaced normals minus the band
    |t| < ``exclude``, where the sinogram convolution cannot be inverted.
    With ``fill`` the inverted sinogram is interpolated in angle across that
    band before back-projection; otherwise the band contributes nothing.
    """
    if G.n != 1:
        raise GridError("invert_P_radon is implemented for n = 1")
    dirs, w = circle_directions(int(directions), exclude)
    psi = radon_forward(G, dirs, weights=w)
    phi = qp_invert(psi, pad=pad, rolloff=rolloff)
    if fill:
        phi = fill_circle_gaps(phi, int(directions))
    return radon_invert(phi, G.grid, pad=pad)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def central_projection(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """z in R^n -> (z, -1)/sqrt(1 + |z|^2) on the lower half-sphere, as (w, t)."""
    z = np.asarray(z, dtype=np.float64)
    s = np.sqrt(1.0 + np.sum(z * z, axis=-1))
    return z / s[..., None], -1.0 / s


def _sphere_nodes(n: int, count: int) -> np.ndarray:
    # equally weighted nodes on S^(n-1): {+1, -1} or the unit circle
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    raise GridError("pullback check is implemented for n = 1 and n = 2")


def pullback_identity_check(h: Callable[[np.ndarray, np.ndarray], np.ndarray], n: int,
                            radial: int = 20000, angular: int = 256, polar: int = 20000) -> tuple[float, float]:
    """Both sides of int_{R^n} h(Phi(z)) (1+|z|^2)^(-(n+1)/2) dz = |S^n| int_{lower half} h d(normalized).

    ``h(w, t)`` takes w of shape (..., n) and t of shape (...).  The left
    side is integrated in polar coordinates z = r e, truncated where the
    radial weight r^(n-1) (1+r^2)^(-(n+1)/2) drops below 1e-10, with the
    trapezoid rule in s = asinh(r).  The right side uses the parametrisation
    (sin b e, -cos b) with the trapezoid rule in b on [0, pi/2].
    """
    e = _sphere_nodes(n, angular)
    area_e = 2.0 if n == 1 else 2.0 * np.pi
    # radius where r^(n-1) (1+r^2)^(-(n+1)/2) ~ r^-2 = 1e-10
    R = 1e5
    s = np.linspace(0.0, math.asinh(R), radial + 1)
    r = np.sinh(s)
    z = r[:, None, None] * e[None, :, :]
    w, t = central_projection(z)
    hm = np.mean(h(w, t), axis=1) * area_e
    dens = r ** (n - 1) * (1.0 + r * r) ** (-(n + 1) / 2.0) * np.cosh(s)
    lhs = float(np.trapezoid(hm * dens, s))

    b = np.linspace(0.0, 0.5 * np.pi, polar + 1)
    w2 = np.sin(b)[:, None, None] * e[None, :, :]
    t2 = np.broadcast_to(-np.cos(b)[:, None], w2.shape[:-1])
    hm2 = np.mean(h(w2, t2), axis=1) * area_e
    # |S^n| * normalized measure = the plain surface measure sin(b)^(n-1) db de
    rhs = float(np.trapezoid(hm2 * np.sin(b) ** (n - 1), b))
    return lhs, rhs


def _extend_y(phi: Field, factor: int) -> Field:
    # embed phi (zero outside its box) in a grid ``factor`` times taller, same centre
    g = phi.grid
    ny = g.dims[-1]
    extra = (factor - 1) * ny
    lo = extra // 2
    dims = g.dims[:-1] + (ny + extra,)
    origin = g.origin[:-1] + (g.origin[-1] - lo * g.dy,)
    v = np.zeros(dims)
    v[..., lo:lo + ny] = phi.values
    return Field(GridSpec(g.n, dims, g.spacing, origin), v)


def lambda_commutation_check(phi: Field, count: int = 180, min_theta: float = 0.25,
                             signed: bool = False, pad: float = 2.0, extend: int = 8) -> float:
    """max |R(Lambda_y phi) - |t|^n Lambda_p(R phi)| / max |R(Lambda_y phi)| over directions with |t| >= min_theta.

    Lambda_y phi decays only like |y|^-(n+1), so phi is first embedded in a
    box ``extend`` times taller before filtering and integrating.
    ``signed=True`` uses t^n instead of |t|^n; for odd n the two differ on
    directions with t < 0.
    """
    from .spectral import lambda_y

    g = phi.grid
    if g.n != 1:
        raise GridError("lambda_commutation_check is implemented for n = 1")
    dirs, _ = circle_directions(count, min_theta)
    big = _extend_y(phi, extend) if extend > 1 else phi
    lam = lambda_y(big, g.n, pad=pad)
    left = radon_forward(lam, dirs)
    right = ramp_p(radon_forward(big, dirs, left.p0, left.dp, left.values.shape[1]), pad=pad)
    fac = dirs[:, 1] ** g.n if signed else np.abs(dirs[:, 1]) ** g.n
    r = right.values * fac[:, None]
    scale = float(np.max(np.abs(left.values)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(left.values - r)) / scale)


def translation_property_check(phi: Field, shift, count: int = 36) -> float:
    """max |R(tau phi)(d, p) - R(phi)(d, p + d.shift)| / max |R phi|, tau phi(z) = phi(z + shift).

    ``shift`` must be a lattice vector; samples shifted in from outside the
    box are 0.
    """
    g = phi.grid
    shift = np.asarray(shift, dtype=np.float64)
    steps = shift / np.array(g.spacing)
    k = np.round(steps).astype(int)
    if np.any(np.abs(steps - k) > 1e-9):
        raise GridError("shift must be a multiple of the grid spacing on every axis")
    v = phi.values
    out = np.zeros_like(v)
    dst, src = [], []
    for a, kk in enumerate(k):
        lo, hi = max(0, -kk), min(v.shape[a], v.shape[a] - kk)
        if lo >= hi:
            return 0.0 if not np.any(v) else 1.0
        dst.append(slice(lo, hi))
        src.append(slice(lo + kk, hi + kk))
    out[tuple(dst)] = v[tuple(src)]
    moved = Field(g, out)
    dirs, w = default_directions(g.n, count)
    base = radon_forward(phi, dirs)
    left = radon_forward(moved, dirs, base.p0, base.dp, base.values.shape[1])
    q = base.p_grid[None, :] + (dirs @ shift)[:, None]
    right = np.array([np.interp(q[m], base.p_grid, base.values[m], left=0.0, right=0.0)
                      for m in range(dirs.shape[0])])
    scale = float(np.max(np.abs(base.values)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(left.values - right)) / scale)


def sphere_measure_total(n: int) -> float:
    """|S^n|, exposed for the pullback comparison."""
    return sphere_area(n)
