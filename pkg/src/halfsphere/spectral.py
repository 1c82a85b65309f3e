"""Fourier transforms, the Hilbert transform in y, the order-n ramp operator and Fourier inversion of P.

Transform convention: phi_hat(xi, eta) = int int exp(-i xi.x - i eta y) phi dy dx,
with inverse (2 pi)^-(n+1) int int exp(i xi.x + i eta y) phi_hat.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, GridSpec


class SingularFrequencyError(ValueError):
    """Raised when a multiplier is evaluated where it is undefined (eta = 0)."""


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a field on ``grid`` at the frequencies of :func:`frequencies`."""

    grid: GridSpec
    values: np.ndarray

    def frequencies(self) -> list[np.ndarray]:
        return frequencies(self.grid)


def frequencies(grid: GridSpec) -> list[np.ndarray]:
    """Angular frequency axes 2 pi fftfreq(N, h) for every axis (unshifted FFT order)."""
    return [2.0 * np.pi * np.fft.fftfreq(N, d=h) for N, h in zip(grid.dims, grid.spacing)]


def _origin_phase(grid: GridSpec) -> np.ndarray:
    ph = np.ones(())
    for w, o in zip(frequencies(grid), grid.origin):
        ph = np.multiply.outer(ph, np.exp(-1j * w * o))
    return ph


def fft_forward(f: Field) -> SpectralField:
    """Riemann-sum approximation of the continuous transform at the lattice frequencies."""
    g = f.grid
    return SpectralField(g, np.fft.fftn(f.values) * g.cell_volume * _origin_phase(g))


def fft_inverse(s: SpectralField, **flags) -> Field:
    """Inverse of :func:`fft_forward`; returns the real part."""
    g = s.grid
    v = np.fft.ifftn(s.values / _origin_phase(g)) / g.cell_volume
    return Field(g, v.real, **flags)


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

def hilbert_symbol(eta) -> np.ndarray:
    """-i sgn(eta), with sgn(0) = 0."""
    return -1j * np.sign(eta)


def lambda_symbol(eta, n: int) -> np.ndarray:
    return np.abs(eta) ** n


def _xi_sq(xi, n: int) -> np.ndarray:
    # n = 1: xi is scalar-valued (any shape); n > 1: trailing axis holds the components
    xi = np.asarray(xi, dtype=np.float64)
    if n == 1:
        return xi * xi
    return np.sum(xi * xi, axis=-1)


def that_multiplier(xi, eta, n: int) -> np.ndarray | complex:
    """(pi/|eta|)^(n/2) exp(i (|xi|^2 - pi n |eta|) / (4 eta)), the Fourier multiplier of P.

    ``xi`` is scalar-valued for n = 1 (any array shape) and has a trailing
    axis of length n otherwise.  Raises
    SingularFrequencyError if any eta is 0.
    """
    eta = np.asarray(eta, dtype=np.float64)
    if np.any(eta == 0):
        raise SingularFrequencyError("the paraboloid multiplier is undefined at eta = 0")
    x2 = _xi_sq(xi, n)
    out = (np.pi / np.abs(eta)) ** (n / 2.0) * np.exp(1j * (x2 - np.pi * n * np.abs(eta)) / (4.0 * eta))
    return complex(out) if np.ndim(out) == 0 else out


def qhat(xi, omega, theta: float, n: int) -> np.ndarray | complex:
    """Fourier multiplier of the sinogram convolution for direction (omega, theta):
    (pi/|xi theta|)^(n/2) exp(i (|xi omega|^2 - pi n |xi theta|) / (4 xi theta))."""
    xi = np.asarray(xi, dtype=np.float64)
    w2 = float(np.sum(np.asarray(omega, dtype=np.float64) ** 2))
    a = xi * theta
    if np.any(a == 0):
        raise SingularFrequencyError("the sinogram multiplier is undefined at xi theta = 0")
    out = (np.pi / np.abs(a)) ** (n / 2.0) * np.exp(1j * (xi * xi * w2 - np.pi * n * np.abs(a)) / (4.0 * a))
    return complex(out) if np.ndim(out) == 0 else out


def inverse_that_multiplier(xi, eta, n: int) -> np.ndarray:
    """pi^-n conj(T_hat) |eta|^n, zero at eta = 0."""
    eta = np.asarray(eta, dtype=np.float64)
    x2 = _xi_sq(xi, n)
    out = np.zeros(np.broadcast(x2, eta).shape, dtype=np.complex128)
    nz = np.broadcast_to(eta != 0, out.shape)
    e = np.broadcast_to(eta, out.shape)[nz]
    xx = np.broadcast_to(x2, out.shape)[nz]
    ae = np.abs(e)
    out[nz] = (np.pi / ae) ** (n / 2.0) * np.exp(-1j * (xx - np.pi * n * ae) / (4.0 * e)) * ae**n / np.pi**n
    return out


@dataclass(frozen=True)
class MultiplierSpec:
    """A named Fourier symbol; ``omega``/``theta`` are used by kind "qhat" only."""

    kind: str
    n: int
    omega: tuple[float, ...] = ()
    theta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("hilbert", "lambda", "that", "that_adjoint", "qhat"):
            raise ValueError(f"unknown multiplier kind {self.kind!r}")

    def __call__(self, xi, eta=None):
        if self.kind == "hilbert":
            return hilbert_symbol(xi if eta is None else eta)
        if self.kind == "lambda":
            return lambda_symbol(xi if eta is None else eta, self.n)
        if self.kind == "that":
            return that_multiplier(xi, eta, self.n)
        if self.kind == "that_adjoint":
            return np.conj(that_multiplier(xi, eta, self.n))
        return qhat(xi, self.omega, self.theta, self.n)


def rolloff_window(eta: np.ndarray, dy: float, rolloff: float | None) -> np.ndarray:
    """Raised-cosine window in |eta|: flat up to rolloff/2 of Nyquist, zero from rolloff of Nyquist.

    ``rolloff`` None (or >= 2) disables the window.
    """
    if rolloff is None or rolloff >= 2.0:
        return np.ones_like(eta, dtype=np.float64)
    if rolloff <= 0:
        raise ValueError("rolloff must be positive")
    en = np.abs(eta) / (np.pi / dy)
    half = 0.5 * rolloff
    t = (en - half) / half
    return np.where(en <= half, 1.0, np.where(en < rolloff, 0.5 * (1.0 + np.cos(np.pi * t)), 0.0))


# ---------------------------------------------------------------------------
# one-dimensional operators along y
# ---------------------------------------------------------------------------

def apply_y_symbol(values: np.ndarray, dy: float, symbol, periodic: bool = False,
                   pad: float = 2.0) -> np.ndarray:
    """Multiply the last axis of ``values`` by ``symbol(eta)`` in Fourier space.

    Non-periodic data is zero-padded to ``pad`` times its length first.
    ``symbol`` must be Hermitian (symbol(-eta) = conj(symbol(eta))) so the
    result is real.
    """
    ny = values.shape[-1]
    N = ny if periodic else int(math.ceil(pad * ny))
    eta = 2.0 * np.pi * np.fft.rfftfreq(N, d=dy)
    V = np.fft.rfft(values, n=N, axis=-1)
    V *= symbol(eta)
    return np.fft.irfft(V, n=N, axis=-1)[..., :ny]


def hilbert_y(f: Field, periodic: bool = False, pad: float = 2.0) -> Field:
    """Hilbert transform along y, symbol -i sgn(eta) with sgn(0) = 0."""
    out = apply_y_symbol(f.values, f.grid.dy, hilbert_symbol, periodic, pad)
    return Field(f.grid, out)


def _diff_y(v: np.ndarray, dy: float, order: int) -> np.ndarray:
    # centred differences; order 2 steps use the 3-point second difference
    out = v
    while order >= 2:
        p = np.pad(out, [(0, 0)] * (out.ndim - 1) + [(1, 1)])
        out = (p[..., 2:] - 2.0 * p[..., 1:-1] + p[..., :-2]) / (dy * dy)
        order -= 2
    if order == 1:
        p = np.pad(out, [(0, 0)] * (out.ndim - 1) + [(1, 1)])
        out = (p[..., 2:] - p[..., :-2]) / (2.0 * dy)
    return out


def lambda_y(f: Field, n: int | None = None, periodic: bool = False, pad: float = 2.0,
             path: str = "spectral") -> Field:
    """Order-n ramp operator along y, Fourier symbol |eta|^n.

    ``path="spatial"`` computes (-1)^((n-1)/2) H d^n/dy^n for odd n and
    (-1)^(n/2) d^n/dy^n for even n with centred differences (samples
    outside the grid are taken as 0).
    """
    n = f.n if n is None else int(n)
    if path == "spectral":
        out = apply_y_symbol(f.values, f.grid.dy, lambda eta: lambda_symbol(eta, n), periodic, pad)
        return Field(f.grid, out)
    if path != "spatial":
        raise ValueError(f"unknown path {path!r}")
    d = _diff_y(f.values, f.grid.dy, n)
    if n % 2:
        d = apply_y_symbol(d, f.grid.dy, hilbert_symbol, periodic, pad) * (-1) ** ((n - 1) // 2)
    else:
        d = d * (-1) ** (n // 2)
    return Field(f.grid, d)


# ---------------------------------------------------------------------------
# the paraboloid convolution in Fourier space
# ---------------------------------------------------------------------------

def _xi_sq_grid(grid: GridSpec, pads: list[int]) -> np.ndarray:
    x2 = np.zeros(())
    for k in range(grid.n):
        w = 2.0 * np.pi * np.fft.fftfreq(pads[k], d=grid.spacing[k])
        x2 = np.add.outer(x2, w * w)
    return x2


def _apply_full_multiplier(G: Field, mult, pad: float, eta_block: int = 256,
                           row_block: int = 64) -> np.ndarray:
    """Zero-pad every axis by ``pad``, multiply by mult(|xi|^2, eta), crop.

    The y-axis uses a real FFT; x-axes are transformed one eta block at a
    time so the complex workspace stays near the size of the half spectrum.
    """
    g = G.grid
    n = g.n
    ny = g.dims[-1]
    Ny = int(math.ceil(pad * ny))
    Nx = [int(math.ceil(pad * d)) for d in g.dims[:-1]]
    eta = 2.0 * np.pi * np.fft.rfftfreq(Ny, d=g.dy)
    H = np.fft.rfft(G.values, n=Ny, axis=-1)
    x2 = _xi_sq_grid(g, Nx)
    xaxes = tuple(range(n))
    crop = tuple(slice(0, d) for d in g.dims[:-1])
    for b0 in range(0, eta.size, eta_block):
        b1 = min(eta.size, b0 + eta_block)
        blk = np.fft.fftn(H[..., b0:b1], s=Nx, axes=xaxes)
        blk *= mult(x2[..., None], eta[b0:b1])
        H[..., b0:b1] = np.fft.ifftn(blk, axes=xaxes)[crop]
    out = np.empty(g.dims)
    flat_in = H.reshape(-1, H.shape[-1])
    flat_out = out.reshape(-1, ny)
    for r0 in range(0, flat_in.shape[0], row_block):
        r1 = min(flat_in.shape[0], r0 + row_block)
        flat_out[r0:r1] = np.fft.irfft(flat_in[r0:r1], n=Ny, axis=-1)[:, :ny]
    return out


def _bessel_j1(z: np.ndarray) -> np.ndarray:
    # J1(z) = (1/pi) int_0^pi cos(t - z sin t) dt; the integrand is smooth and
    # periodic, so the trapezoid rule converges once nodes outnumber |z|
    z = np.asarray(z, dtype=np.float64)
    m = int(max(64, 2 * math.ceil(float(np.max(np.abs(z), initial=0.0))) + 32))
    t = np.pi * (np.arange(m) + 0.5) / m
    out = np.empty(z.shape)
    flat, res = z.reshape(-1), out.reshape(-1)
    for a in range(0, flat.size, 4096):
        zz = flat[a:a + 4096, None]
        res[a:a + 4096] = np.mean(np.cos(t[None, :] - zz * np.sin(t)[None, :]), axis=1)
    return out


def disc_window_transform(rho: np.ndarray, n: int, umax: float) -> np.ndarray:
    """int_{|u| <= umax} exp(i xi.u) du as a function of rho = |xi| (n = 1 or 2)."""
    rho = np.asarray(rho, dtype=np.float64)
    U = float(umax)
    if n == 1:
        return 2.0 * U * np.sinc(rho * U / np.pi)
    if n == 2:
        out = np.full(rho.shape, np.pi * U * U)
        nz = rho > 0
        out[nz] = 2.0 * np.pi * U * _bessel_j1(rho[nz] * U) / rho[nz]
        return out
    raise ValueError("disc_window_transform is implemented for n = 1 and n = 2")


def parab_forward_fourier(F: Field, pad: float = 2.0, umax: float | None = None) -> Field:
    """Paraboloid convolution as multiplication by T_hat after zero-padding.

    T_hat is singular at eta = 0.  That sheet instead gets the transform of the
    paraboloid truncated to |u| <= ``umax`` (default: half the x-extent, as in
    the stencil operator), which carries the column integrals of P F.
    """
    n = F.n
    U = 0.5 * F.grid.dims[0] * F.grid.dx if umax is None else float(umax)

    def mult(x2, eta):
        out = np.zeros(np.broadcast(x2, eta).shape, dtype=np.complex128)
        nz = eta != 0
        e = eta[nz]
        out[..., nz] = (np.pi / np.abs(e)) ** (n / 2.0) * np.exp(1j * (x2 - np.pi * n * np.abs(e)) / (4.0 * e))
        if not np.all(nz):
            out[..., ~nz] = disc_window_transform(np.sqrt(x2), n, U)
        return out

    return Field(F.grid, _apply_full_multiplier(F, mult, pad))


def invert_P_fourier(G: Field, rolloff: float | None = 0.8, pad: float = 2.0) -> Field:
    """F_hat = pi^-n conj(T_hat) |eta|^n G_hat W(eta), with the eta = 0 sheet set to 0.

    W is :func:`rolloff_window`; the y-mean of F is therefore not recovered.
    """
    n = G.n
    dy = G.grid.dy

    def mult(x2, eta):
        return inverse_that_multiplier(0.0, eta, n) * np.exp(-1j * x2 * _safe_inv(4.0 * eta)) \
            * rolloff_window(eta, dy, rolloff)

    return Field(G.grid, _apply_full_multiplier(G, mult, pad))


def _safe_inv(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=np.float64)
    nz = a != 0
    out[nz] = 1.0 / a[nz]
    return out
