"""Error metrics, the decay and compact-section checks for P-images, and the quick invariant suite."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Field, GridError, GridSpec, Phantom, inner_product, sample_phantom
from .radon import GeneralPositionError

SUPPORT_THRESHOLD = 1e-10


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _mask_values(a: Field, b: Field, mask) -> tuple[np.ndarray, np.ndarray]:
    if a.grid != b.grid:
        raise GridError("fields live on different grids")
    if mask is None:
        return a.values, b.values
    m = np.broadcast_to(mask, a.grid.dims)
    return a.values[m], b.values[m]


def rel_error(a: Field, b: Field, mask=None) -> float:
    """||a - b|| / ||b|| (optionally restricted to a boolean mask)."""
    x, y = _mask_values(a, b, mask)
    den = float(np.linalg.norm(y))
    if den == 0.0:
        raise ZeroDivisionError("reference field has zero norm")
    return float(np.linalg.norm(x - y)) / den


def max_error(a: Field, b: Field, mask=None) -> float:
    x, y = _mask_values(a, b, mask)
    return float(np.max(np.abs(x - y))) if x.size else 0.0


def object_window(grid: GridSpec, top: float) -> np.ndarray:
    """Boolean mask of rows with y <= top, broadcastable to the grid."""
    y = grid.axis(grid.n)
    return (y <= top).reshape((1,) * grid.n + (-1,))


# ---------------------------------------------------------------------------
# support and off-grid evaluation of P F
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Support:
    lo: np.ndarray       # lower corner of the support box (x..., y)
    hi: np.ndarray
    peak: float

    @property
    def empty(self) -> bool:
        return self.peak == 0.0


def measure_support(F: Field, threshold: float = SUPPORT_THRESHOLD) -> Support:
    """Tightest axis-aligned box holding every sample with |F| > threshold * max|F|."""
    v = np.abs(F.values)
    peak = float(v.max()) if v.size else 0.0
    d = F.n + 1
    if peak == 0.0:
        z = np.zeros(d)
        return Support(z, z, 0.0)
    mask = v > threshold * peak
    lo, hi = np.empty(d), np.empty(d)
    for k in range(d):
        other = tuple(a for a in range(d) if a != k)
        idx = np.nonzero(np.any(mask, axis=other))[0]
        ax = F.grid.axis(k)
        lo[k], hi[k] = ax[idx[0]], ax[idx[-1]]
    return Support(lo, hi, peak)


def _row_interp(row: np.ndarray, origin: np.ndarray, dx: float, pts: np.ndarray) -> np.ndarray:
    # multilinear interpolation of one y-row (n-dimensional) at points (..., n); 0 outside
    n = row.ndim
    s = (pts - origin) / dx
    dims = np.array(row.shape)
    inside = np.all((s >= 0) & (s <= dims - 1), axis=-1)
    s = np.clip(s, 0, dims - 1)
    i0 = np.minimum(np.floor(s).astype(np.int64), dims - 2)
    fr = s - i0
    out = np.zeros(pts.shape[:-1])
    for corner in range(1 << n):
        w = np.ones(pts.shape[:-1])
        idx = []
        for k in range(n):
            bit = (corner >> k) & 1
            w = w * (fr[..., k] if bit else 1.0 - fr[..., k])
            idx.append(i0[..., k] + bit)
        out += w * row[tuple(idx)]
    return np.where(inside, out, 0.0)


def paraboloid_sum_at(F: Field, points: np.ndarray, angular: int | None = None) -> np.ndarray:
    """G(x, y) = int F(x + u, y - |u|^2) du at arbitrary points (..., n+1).

    With y' = y - |u|^2 the integral becomes
    (1/2) int_{y' < y} (y - y')^((n-2)/2) int_{S^(n-1)} F(x + sqrt(y - y') w, y') dw dy'.
    Each nonzero row of F is treated as constant in y' over its cell and the
    kernel is integrated exactly over the cell (product integration), so the
    weak singularity at y' = y is handled.  The x-dependence is linearly
    interpolated.  For n = 2 the circle uses ``angular`` nodes (default:
    about 4 per grid spacing of circumference, at least 32).
    """
    g = F.grid
    n = g.n
    if n not in (1, 2):
        raise GridError("paraboloid_sum_at is implemented for n = 1 and n = 2")
    pts = np.asarray(points, dtype=np.float64)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, n + 1)
    x, y = pts[:, :n], pts[:, n]
    dy, dx = g.dy, g.dx
    yr = g.axis(n)
    origin = np.array(g.origin[:n])
    rows = np.nonzero(np.any(F.values != 0, axis=tuple(range(n))))[0]
    out = np.zeros(pts.shape[0])
    for j in rows:
        a, b = yr[j] - 0.5 * dy, yr[j] + 0.5 * dy
        act = y > a
        if not np.any(act):
            continue
        yy = y[act]
        bb = np.minimum(b, yy)
        row = F.values[..., j]
        if n == 1:
            # (1/2) int (y - y')^(-1/2) dy' over the cell, times the two-point sphere sum
            w = np.sqrt(yy - a) - np.sqrt(yy - bb)
            rho = np.sqrt(np.maximum(yy - yr[j], 0.0))
            xa = x[act]
            val = _row_interp(row, origin, dx, xa + rho[:, None]) + _row_interp(row, origin, dx, xa - rho[:, None])
            out[act] += w * val
        else:
            w = 0.5 * (bb - a)
            rho = np.sqrt(np.maximum(yy - yr[j], 0.0))
            m = angular or max(32, int(math.ceil(4.0 * 2.0 * np.pi * float(rho.max()) / dx)))
            phi = 2.0 * np.pi * np.arange(m) / m
            ring = np.stack([np.cos(phi), np.sin(phi)], axis=1)
            q = x[act][:, None, :] + rho[:, None, None] * ring[None, :, :]
            val = _row_interp(row, origin, dx, q).sum(axis=1) * (2.0 * np.pi / m)
            out[act] += w * val
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# decay along parabolas
# ---------------------------------------------------------------------------

def ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (1 for k = 0, 2 for k = 1)."""
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)


@dataclass(frozen=True)
class DecayScan:
    base: tuple[float, ...]
    radii: np.ndarray
    values: np.ndarray      # |v| |G(x0 + v, y0 + |v|^2)|
    bound: float
    support_radius: float
    support_height: float

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=np.float64)
        if r.size > 1 and np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")

    def tail(self, factor: float = 8.0) -> np.ndarray:
        return self.values[self.radii >= factor * self.support_radius]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius", "value", "bound"])
            for r, v in zip(self.radii, self.values):
                w.writerow([repr(float(r)), repr(float(v)), repr(float(self.bound))])


def decay_scan(F: Field, x0, y0: float, radii, direction=None) -> DecayScan:
    """Record |v| |P F| at (x0 + v, y0 + |v|^2) for v = radius * direction (default: first x-axis).

    The bound is (max|F|/2) |B^(n-1)| r^(n-1) h with r the radius of the ball
    around the centre of the x-support box that contains it and h the top of
    the support; supports are measured with :func:`measure_support`.
    """
    n = F.n
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.size != n:
        raise ValueError("x0 needs n coordinates")
    radii = np.asarray(radii, dtype=np.float64)
    sup = measure_support(F)
    if sup.empty:
        return DecayScan(tuple(x0) + (float(y0),), radii, np.zeros_like(radii), 0.0, 0.0, 0.0)
    lowest_row = F.grid.origin[-1]
    if sup.lo[-1] <= 0.0 or sup.lo[-1] <= lowest_row + 0.5 * F.grid.dy:
        raise GridError("support of F touches y <= 0 (or the bottom of the grid)")
    d = np.zeros(n)
    d[0] = 1.0
    if direction is not None:
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
    r = float(np.linalg.norm(0.5 * (sup.hi[:n] - sup.lo[:n])))
    h = float(sup.hi[-1])
    bound = 0.5 * sup.peak * ball_volume(n - 1) * r ** (n - 1) * h
    pts = np.concatenate([x0[None, :] + radii[:, None] * d[None, :], (y0 + radii**2)[:, None]], axis=1)
    G = paraboloid_sum_at(F, pts)
    return DecayScan(tuple(x0) + (float(y0),), radii, np.abs(G) * radii, bound, r, h)


# ---------------------------------------------------------------------------
# plane sections of supp P F
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SectionReport:
    is_bounded: bool
    extent: float        # farthest super-threshold point from the shifted support box
    predicted: float     # covering radius r_max


def _dist_to_box(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    return np.sqrt(np.sum(d * d, axis=-1))


def support_section_check(F: Field, omega, theta: float, p: float, threshold: float = 1e-8,
                          samples: int | None = None) -> SectionReport:
    """Check that {P F != 0} meets the hyperplane omega.x + theta y = p in a bounded set.

    F is cut to its numerical support (|F| > 1e-10 max|F|).  Points of the
    plane are parametrised by x (y = (p - omega.x)/theta) over the predicted
    covering region plus a margin of its own size; |P F| is thresholded at
    ``threshold`` times its maximum over those points.  The covering region
    is the union of balls of radius
    r_max = sqrt(1 + 4 theta max|p - omega.x - theta y|) / (2 theta)
    around the x-projection of supp F shifted by -omega/(2 theta), the max
    running over supp F.
    """
    n = F.n
    w = np.atleast_1d(np.asarray(omega, dtype=np.float64))
    if w.size != n:
        raise ValueError("omega needs n components")
    if theta == 0 or np.allclose(w, 0):
        raise GeneralPositionError("plane must have omega != 0 and theta != 0")
    if theta < 0:
        w, theta, p = -w, -theta, -p
    s = float(np.sqrt(np.sum(w * w) + theta * theta))
    w, theta, p = w / s, theta / s, p / s
    sup = measure_support(F)
    if sup.empty:
        return SectionReport(True, 0.0, 0.0)
    cut = np.where(np.abs(F.values) > SUPPORT_THRESHOLD * sup.peak, F.values, 0.0)
    Fc = Field(F.grid, cut)
    corners = np.array(np.meshgrid(*[[sup.lo[k], sup.hi[k]] for k in range(n + 1)], indexing="ij")).reshape(n + 1, -1).T
    worst = float(np.max(np.abs(p - corners[:, :n] @ w - theta * corners[:, n])))
    r_max = float(math.sqrt(1.0 + 4.0 * theta * worst) / (2.0 * theta))
    lo = sup.lo[:n] - w / (2.0 * theta)
    hi = sup.hi[:n] - w / (2.0 * theta)
    margin = 2.0 * r_max + F.grid.dx
    step = (0.5 if n == 1 else 1.0) * F.grid.dx
    axes = []
    for k in range(n):
        m = samples or int(math.ceil((hi[k] - lo[k] + 2 * margin) / step)) + 1
        axes.append(np.linspace(lo[k] - margin, hi[k] + margin, m))
    xs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    ys = (p - xs @ w) / theta
    G = np.abs(paraboloid_sum_at(Fc, np.concatenate([xs, ys[:, None]], axis=1)))
    gmax = float(G.max())
    if gmax == 0.0:
        return SectionReport(True, 0.0, r_max)
    hot = xs[G > threshold * gmax]
    extent = float(_dist_to_box(hot, lo, hi).max())
    edge = float(_dist_to_box(xs, lo, hi).max())
    bounded = extent <= r_max + F.grid.dx and extent < edge - step
    return SectionReport(bool(bounded), extent, r_max)


# ---------------------------------------------------------------------------
# quick invariant suite (used by the validate command)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.limit)

    def as_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "limit": float(self.limit), "pass": self.passed}


def validation_suite(seed: int = 0, corrupt_multiplier: bool = False) -> list[Check]:
    """Fast invariant checks: P/P* adjointness, multiplier identity, T_hat(0, 1), pullback identity, decay bound.

    ``corrupt_multiplier`` perturbs the inversion symbol (fault injection for tests).
    """
    from .operators import parab_adjoint, parab_forward
    from .radon import pullback_identity_check
    from .spectral import inverse_that_multiplier, that_multiplier

    rng = np.random.default_rng(seed)
    checks = []
    for n, dims in ((1, (64, 96)), (2, (16, 16, 40))):
        g = GridSpec(n, dims, (0.25,) * n + (0.0625,), (-2.0,) * n + (-1.0,))
        a = Field(g, rng.standard_normal(g.dims))
        b = Field(g, rng.standard_normal(g.dims))
        pa = parab_forward(a)
        lhs, rhs = inner_product(pa, b), inner_product(a, parab_adjoint(b))
        checks.append(Check(f"parab_adjoint_n{n}", abs(lhs - rhs) / (pa.norm() * b.norm()), 1e-12))

    xi1 = np.linspace(-5, 5, 41)[:, None]
    xi2 = np.stack(np.meshgrid(np.linspace(-5, 5, 9), np.linspace(-3, 3, 5), indexing="ij"), -1).reshape(-1, 1, 2)
    eta = np.concatenate([-np.geomspace(1e-3, 50, 40), np.geomspace(1e-3, 50, 40)])[None, :]
    for n in (1, 2):
        xi = xi1 if n == 1 else xi2
        inv = inverse_that_multiplier(xi, eta, n)
        if corrupt_multiplier:
            inv = inv * 1.01
        prod = inv * that_multiplier(xi, eta, n)
        checks.append(Check(f"multiplier_identity_n{n}", float(np.max(np.abs(prod - 1.0))), 1e-12))
    t01 = that_multiplier(0.0, 1.0, 1)
    checks.append(Check("that_at_0_1", abs(t01 - math.sqrt(math.pi) * np.exp(-1j * math.pi / 4)), 1e-14))

    for n in (1, 2):
        lhs, rhs = pullback_identity_check(lambda w, t: np.ones_like(t), n)
        checks.append(Check(f"pullback_identity_n{n}", abs(lhs - rhs) / abs(rhs), 1e-4))

    g = GridSpec.half_space(1, 64, 4.0, 64, 8.0)
    F = sample_phantom(Phantom.single((0.0, 4.0), 0.4), g)
    scan = decay_scan(F, [0.0], 4.0, np.linspace(1, 80, 30))
    tail = scan.tail(8.0)
    checks.append(Check("decay_tail_over_bound", float(tail.max() / scan.bound) if tail.size else np.inf, 1.1))
    return checks


def run_suite(suite: Callable[[], list[Check]]) -> tuple[bool, list[dict]]:
    res = suite()
    return all(c.passed for c in res), [c.as_dict() for c in res]
