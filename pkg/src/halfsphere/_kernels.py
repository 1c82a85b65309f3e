"""Compiled inner loops for the quadrature operators.

Every kernel runs single-threaded with a fixed summation order, so results
are bit-reproducible.  Arrays along a "radial" axis always have index 0 at
coordinate 0 (callers prepend the implied zero row of half-space data).
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

_TOL = 1e-9


@nb.njit(cache=True, inline="always")
def _cell(s, m):
    # fractional index s on an axis with m samples -> (lower index, weight) or (-1, 0)
    if s < -_TOL or s > m - 1 + _TOL:
        return -1, 0.0
    if s < 0.0:
        s = 0.0
    i0 = int(math.floor(s))
    if i0 >= m - 1:
        i0 = m - 2
    return i0, s - i0


@nb.njit(cache=True)
def _bilinear(v, s0, s1):
    i, a = _cell(s0, v.shape[0])
    if i < 0:
        return 0.0
    j, b = _cell(s1, v.shape[1])
    if j < 0:
        return 0.0
    return ((1.0 - a) * ((1.0 - b) * v[i, j] + b * v[i, j + 1])
            + a * ((1.0 - b) * v[i + 1, j] + b * v[i + 1, j + 1]))


@nb.njit(cache=True)
def _trilinear(v, s0, s1, s2):
    i, a = _cell(s0, v.shape[0])
    if i < 0:
        return 0.0
    j, b = _cell(s1, v.shape[1])
    if j < 0:
        return 0.0
    k, c = _cell(s2, v.shape[2])
    if k < 0:
        return 0.0
    lo = ((1.0 - a) * ((1.0 - b) * v[i, j, k] + b * v[i, j + 1, k])
          + a * ((1.0 - b) * v[i + 1, j, k] + b * v[i + 1, j + 1, k]))
    hi = ((1.0 - a) * ((1.0 - b) * v[i, j, k + 1] + b * v[i, j + 1, k + 1])
          + a * ((1.0 - b) * v[i + 1, j, k + 1] + b * v[i + 1, j + 1, k + 1]))
    return (1.0 - c) * lo + c * hi


@nb.njit(cache=True, inline="always")
def _lerp(col, s):
    i, a = _cell(s, col.shape[0])
    if i < 0:
        return 0.0
    return (1.0 - a) * col[i] + a * col[i + 1]


@nb.njit(cache=True, inline="always")
def _rpow(val, r, p):
    # val * r**p with the common integer powers done by division
    if p == 0.0:
        return val
    if p == -1.0:
        return val / r
    if p == -2.0:
        return val / (r * r)
    if p == -3.0:
        return val / (r * r * r)
    return val * r ** p


# ---------------------------------------------------------------------------
# half-sphere means
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def sphere_means_1d(v, x0, dx, dy, arc):
    """v: (nx, ny+1) with v[:, 0] at y = 0.  Returns g on rows y = dy..ny*dy."""
    nx = v.shape[0]
    ny = v.shape[1] - 1
    out = np.zeros((nx, ny))
    for j in range(ny):
        y = (j + 1) * dy
        nth = max(4, int(math.ceil(0.5 * math.pi * y / arc)))
        dth = 0.5 * math.pi / nth
        for i in range(nx):
            x = x0 + i * dx
            acc = 0.0
            for t in range(nth + 1):
                th = t * dth
                w = 0.5 if (t == 0 or t == nth) else 1.0
                s = y * math.sin(th)
                c = y * math.cos(th) / dy
                acc += w * (_bilinear(v, (x + s - x0) / dx, c) + _bilinear(v, (x - s - x0) / dx, c))
            out[i, j] = acc * dth / math.pi
    return out


@nb.njit(cache=True)
def sphere_means_2d(v, x0, x1, dx, dy, arc):
    """v: (nx0, nx1, ny+1) with v[..., 0] at y = 0."""
    n0 = v.shape[0]
    n1 = v.shape[1]
    ny = v.shape[2] - 1
    out = np.zeros((n0, n1, ny))
    for j in range(ny):
        y = (j + 1) * dy
        nth = max(4, int(math.ceil(0.5 * math.pi * y / arc)))
        dth = 0.5 * math.pi / nth
        # per-ring angular counts and offsets are shared by every centre in this row
        for t in range(1, nth + 1):
            th = t * dth
            w = (0.5 if t == nth else 1.0) * dth * math.sin(th)
            rho = y * math.sin(th)
            sz = y * math.cos(th) / dy
            nph = max(4, int(math.ceil(2.0 * math.pi * rho / arc)))
            wr = w / nph
            for q in range(nph):
                ph = 2.0 * math.pi * q / nph
                ox = rho * math.cos(ph) / dx
                oy = rho * math.sin(ph) / dx
                for i0 in range(n0):
                    for i1 in range(n1):
                        out[i0, i1, j] += wr * _trilinear(v, i0 + ox, i1 + oy, sz)
    return out


@nb.njit(cache=True)
def radial_adjoint_1d(A, powers, coefs, dq, squared, ys, K, dx):
    """sum_k sum_m coefs[m] * A[m, i+k](q) * r**powers[m] * dx, r = sqrt(y^2 + (k dx)^2).

    A: (m, nx, nq) sampled at q = 0, dq, ...; q = r (or r^2 when ``squared``).
    Samples whose q leaves the grid contribute 0.
    """
    m = A.shape[0]
    nx = A.shape[1]
    nq = A.shape[2]
    ny = ys.shape[0]
    out = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            y = ys[j]
            acc = 0.0
            for k in range(-K, K + 1):
                ii = i + k
                if ii < 0 or ii >= nx:
                    continue
                u = k * dx
                r2 = y * y + u * u
                q = r2 if squared else math.sqrt(r2)
                s = q / dq
                if s > nq - 1 + _TOL:
                    continue
                r = math.sqrt(r2)
                for c in range(m):
                    acc += coefs[c] * _rpow(_lerp(A[c, ii], s), r, powers[c])
            out[i, j] = acc * dx
    return out


@nb.njit(cache=True)
def radial_adjoint_2d(A, powers, coefs, dq, squared, ys, K, dx):
    """Two-dimensional analogue of :func:`radial_adjoint_1d` over the lattice disc |k| <= K."""
    m = A.shape[0]
    n0 = A.shape[1]
    n1 = A.shape[2]
    nq = A.shape[3]
    ny = ys.shape[0]
    out = np.zeros((n0, n1, ny))
    K2 = K * K
    for i0 in range(n0):
        for i1 in range(n1):
            for j in range(ny):
                y = ys[j]
                acc = 0.0
                for k0 in range(-K, K + 1):
                    a = i0 + k0
                    if a < 0 or a >= n0:
                        continue
                    for k1 in range(-K, K + 1):
                        if k0 * k0 + k1 * k1 > K2:
                            continue
                        b = i1 + k1
                        if b < 0 or b >= n1:
                            continue
                        r2 = y * y + (k0 * k0 + k1 * k1) * dx * dx
                        q = r2 if squared else math.sqrt(r2)
                        s = q / dq
                        if s > nq - 1 + _TOL:
                            continue
                        r = math.sqrt(r2)
                        for c in range(m):
                            acc += coefs[c] * _rpow(_lerp(A[c, a, b], s), r, powers[c])
                out[i0, i1, j] = acc * dx * dx
    return out


# ---------------------------------------------------------------------------
# Radon transform
# ---------------------------------------------------------------------------

@nb.njit(cache=True)
def _clip(o, d, lo, hi, smin, smax):
    # restrict o + s d to [lo, hi] along one coordinate
    if abs(d) < 1e-15:
        if o < lo - _TOL or o > hi + _TOL:
            return 1.0, -1.0
        return smin, smax
    a = (lo - o) / d
    b = (hi - o) / d
    if a > b:
        a, b = b, a
    return max(smin, a), min(smax, b)


@nb.njit(cache=True)
def radon_2d(v, x0, y0, dx, dy, dirs, p0, dp, npts, ds):
    nx, ny = v.shape
    x1 = x0 + (nx - 1) * dx
    y1 = y0 + (ny - 1) * dy
    M = dirs.shape[0]
    out = np.zeros((M, npts))
    for m in range(M):
        w = dirs[m, 0]
        th = dirs[m, 1]
        tx = -th
        ty = w
        for l in range(npts):
            p = p0 + l * dp
            fx = p * w
            fy = p * th
            smin, smax = _clip(fx, tx, x0, x1, -1e300, 1e300)
            smin, smax = _clip(fy, ty, y0, y1, smin, smax)
            if smax < smin:
                continue
            k0 = int(math.ceil(smin / ds - _TOL))
            k1 = int(math.floor(smax / ds + _TOL))
            acc = 0.0
            for k in range(k0, k1 + 1):
                s = k * ds
                acc += _bilinear(v, (fx + s * tx - x0) / dx, (fy + s * ty - y0) / dy)
            out[m, l] = acc * ds
    return out


@nb.njit(cache=True)
def radon_3d(v, org, dx, dy, dirs, frames, p0, dp, npts, ds):
    n0, n1, n2 = v.shape
    lo = org
    hi = np.array([org[0] + (n0 - 1) * dx, org[1] + (n1 - 1) * dx, org[2] + (n2 - 1) * dy])
    M = dirs.shape[0]
    out = np.zeros((M, npts))
    L = math.sqrt(((hi - lo) ** 2).sum()) + math.sqrt((lo ** 2).sum() + (hi ** 2).sum())
    ka = int(math.ceil(L / ds))
    for m in range(M):
        nrm = dirs[m]
        e1 = frames[m, 0]
        e2 = frames[m, 1]
        for l in range(npts):
            p = p0 + l * dp
            acc = 0.0
            for ia in range(-ka, ka + 1):
                a = ia * ds
                o0 = p * nrm[0] + a * e1[0]
                o1 = p * nrm[1] + a * e1[1]
                o2 = p * nrm[2] + a * e1[2]
                smin, smax = _clip(o0, e2[0], lo[0], hi[0], -1e300, 1e300)
                smin, smax = _clip(o1, e2[1], lo[1], hi[1], smin, smax)
                smin, smax = _clip(o2, e2[2], lo[2], hi[2], smin, smax)
                if smax < smin:
                    continue
                k0 = int(math.ceil(smin / ds - _TOL))
                k1 = int(math.floor(smax / ds + _TOL))
                for k in range(k0, k1 + 1):
                    b = k * ds
                    acc += _trilinear(v, (o0 + b * e2[0] - lo[0]) / dx,
                                      (o1 + b * e2[1] - lo[1]) / dx,
                                      (o2 + b * e2[2] - lo[2]) / dy)
            out[m, l] = acc * ds * ds
    return out


@nb.njit(cache=True)
def radon_adjoint_2d(psi, dirs, weights, p0, dp, xs, ys):
    M, npts = psi.shape
    out = np.zeros((xs.shape[0], ys.shape[0]))
    for i in range(xs.shape[0]):
        for j in range(ys.shape[0]):
            acc = 0.0
            for m in range(M):
                p = dirs[m, 0] * xs[i] + dirs[m, 1] * ys[j]
                acc += weights[m] * _lerp(psi[m], (p - p0) / dp)
            out[i, j] = acc
    return out


@nb.njit(cache=True)
def radon_adjoint_3d(psi, dirs, weights, p0, dp, x0s, x1s, ys):
    M, npts = psi.shape
    out = np.zeros((x0s.shape[0], x1s.shape[0], ys.shape[0]))
    for i in range(x0s.shape[0]):
        for k in range(x1s.shape[0]):
            for j in range(ys.shape[0]):
                acc = 0.0
                for m in range(M):
                    p = dirs[m, 0] * x0s[i] + dirs[m, 1] * x1s[k] + dirs[m, 2] * ys[j]
                    acc += weights[m] * _lerp(psi[m], (p - p0) / dp)
                out[i, k, j] = acc
    return out


@nb.njit(cache=True)
def shift_sum(psi, shifts, p0, dp, scale):
    """out[m, l] = scale * sum_k psi[m](p_l + shifts[m, k]); linear interpolation in p."""
    M, npts = psi.shape
    K = shifts.shape[1]
    out = np.zeros((M, npts))
    for m in range(M):
        col = psi[m]
        for l in range(npts):
            acc = 0.0
            for k in range(K):
                acc += _lerp(col, l + shifts[m, k] / dp)
            out[m, l] = acc * scale
    return out
