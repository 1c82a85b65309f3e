import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfsphere.grid import Field, GridError, GridSpec, Phantom, sample_phantom
from halfsphere.operators import parab_forward
from halfsphere.radon import (GeneralPositionError, Sinogram, central_projection, circle_directions,
                              default_directions, fibonacci_directions, fill_circle_gaps, inversion_constant,
                              invert_P_radon, lambda_commutation_check, p_grid_for, pullback_identity_check,
                              qp_adjoint, qp_forward, qp_invert, radon_adjoint, radon_constant, radon_forward,
                              radon_invert, sphere_measure_total, translation_property_check)
from halfsphere.spectral import qhat, that_multiplier


def gaussian_field(N, half_width=6.0, s=1.0):
    h = 2 * half_width / N
    g = GridSpec(1, (N, N), (h, h), (-half_width, -half_width))
    X, Y = g.mesh()
    return Field(g, np.exp(-(X**2 + Y**2) / s**2))


@pytest.fixture(scope="module")
def gauss_256():
    return gaussian_field(256)


def single_direction(w, t, values, p0=-4.0, dp=0.01):
    return Sinogram(1, np.array([[w, t]]), p0, dp, np.atleast_2d(values))


# ---------------------------------------------------------------------------
# constants, direction sets, sinogram type
# ---------------------------------------------------------------------------

def test_radon_constants():
    assert radon_constant(1) == pytest.approx(-0.5, rel=1e-15)
    assert inversion_constant(1) == pytest.approx(0.5, rel=1e-15)
    assert inversion_constant(2) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert radon_constant(2) == pytest.approx(inversion_constant(2), rel=1e-15)
    assert sphere_measure_total(2) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("maker,count", [(circle_directions, 180), (fibonacci_directions, 300)])
def test_direction_sets_are_unit_and_respect_the_band(maker, count):
    d, w = maker(count, 0.05)
    assert np.max(np.abs(np.linalg.norm(d, axis=1) - 1)) <= 1e-14
    assert np.all(np.abs(d[:, -1]) >= 0.05)
    assert np.allclose(w, 1.0 / count)
    assert d.shape[0] < count
    with pytest.raises(GridError):
        default_directions(3, 10)


def test_sinogram_validation():
    d = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        Sinogram(1, d * 2, 0.0, 0.1, np.zeros((2, 4)))
    with pytest.raises(ValueError):
        Sinogram(1, d, 0.0, 0.1, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        Sinogram(1, d, 0.0, 0.0, np.zeros((2, 4)))
    with pytest.raises(ValueError):
        Sinogram(1, d, 0.0, 0.1, np.zeros((2, 4)), weights=np.ones(3))
    s = Sinogram(1, d, -0.2, 0.1, np.zeros((2, 5)))
    assert np.allclose(s.p_grid, [-0.2, -0.1, 0.0, 0.1, 0.2])
    assert np.allclose(s.weights, 0.5)


def test_offset_grid_covers_the_box():
    g = GridSpec(1, (10, 20), (0.5, 0.25), (1.0, -2.0))
    p0, dp, count = p_grid_for(g)
    pmax = -p0
    assert dp == 0.25 and count == 2 * round(pmax / dp) + 1
    assert pmax >= math.hypot(4.5, 4.75)
    p0, dp, count = p_grid_for(g, 64)
    assert count == 64 and p0 + 63 * dp == pytest.approx(-p0)


# ---------------------------------------------------------------------------
# forward and adjoint
# ---------------------------------------------------------------------------

def test_radon_of_zero_is_zero():
    g = GridSpec(1, (8, 8), (0.5, 0.5), (-2.0, -2.0))
    d, _ = circle_directions(12)
    s = radon_forward(Field(g, np.zeros(g.dims)), d)
    assert not np.any(s.values)
    assert not np.any(radon_adjoint(s, g).values)


def test_gaussian_sinogram_is_direction_independent(gauss_256):
    d, _ = circle_directions(180)
    s = radon_forward(gauss_256, d)
    exact = math.sqrt(math.pi) * np.exp(-s.p_grid**2)
    assert np.max(np.abs(s.values - exact[None, :])) <= 1e-3


def test_narrow_bump_sinogram_peaks_at_zero_offset():
    g = GridSpec(1, (64, 64), (1 / 16, 1 / 16), (-2.0, -2.0))
    X, Y = g.mesh()
    f = Field(g, np.where(X**2 + Y**2 < 0.04, np.exp(-(X**2 + Y**2) / 0.01), 0.0))
    d, _ = circle_directions(24)
    s = radon_forward(f, d)
    i0 = int(np.argmin(np.abs(s.p_grid)))
    assert np.all(np.argmax(s.values, axis=1) == i0)
    far = np.abs(s.p_grid) > 0.3
    assert np.max(np.abs(s.values[:, far])) == 0.0


def test_sinogram_is_even_under_normal_flip(gauss_256):
    f = gauss_256.replace(gauss_256.values * (1 + 0.3 * gauss_256.grid.mesh()[0]))
    d, _ = circle_directions(36)
    s = radon_forward(f, d)
    # direction m + 18 is the negative of direction m; the offsets are symmetric
    assert np.max(np.abs(s.values[18:] - s.values[:18, ::-1])) <= 1e-10 * np.max(np.abs(s.values))


def test_radon_3d_of_gaussian_converges():
    errs = []
    for N in (32, 64):
        h = 8.0 / N
        g = GridSpec(2, (N, N, N), (h, h, h), (-4.0, -4.0, -4.0))
        X, Y, Z = g.mesh()
        d, _ = fibonacci_directions(12)
        s = radon_forward(Field(g, np.exp(-(X**2 + Y**2 + Z**2))), d, count=65)
        exact = math.pi * np.exp(-s.p_grid**2)
        errs.append(np.max(np.abs(s.values - exact[None, :])))
    assert errs[1] <= 1e-2
    assert errs[1] <= 0.3 * errs[0]


def test_backprojection_of_constant_is_constant():
    g = GridSpec(1, (16, 16), (0.25, 0.25), (-2.0, -2.0))
    d, w = circle_directions(30)
    s = Sinogram(1, d, -6.0, 0.5, np.ones((30, 25)), w)
    assert np.allclose(radon_adjoint(s, g).values, 1.0, atol=1e-14)
    g3 = GridSpec(2, (4, 4, 4), (0.25,) * 3, (-0.5,) * 3)
    d3, w3 = fibonacci_directions(40)
    s3 = Sinogram(2, d3, -6.0, 0.5, np.ones((40, 25)), w3)
    assert np.allclose(radon_adjoint(s3, g3).values, 1.0, atol=1e-14)


def pairing_gap(N):
    rng = np.random.default_rng(5)
    f = gaussian_field(N, 3.0, 0.8)
    X, Y = f.grid.mesh()
    f = f.replace(f.values * (1 + 0.5 * np.sin(2 * X + Y)))
    d, w = circle_directions(N)
    s = radon_forward(f, d)
    psi = s.replace(np.exp(-s.p_grid[None, :] ** 2) * (1 + 0.2 * rng.standard_normal((N, 1))))
    lhs = float(np.sum(s.values * psi.values * psi.weights[:, None]) * s.dp)
    back = radon_adjoint(psi, f.grid)
    rhs = float(np.sum(f.values * back.values) * f.grid.cell_volume)
    return abs(lhs - rhs) / abs(lhs)


def test_adjoint_pairing_with_normalized_measure():
    e1, e2 = pairing_gap(64), pairing_gap(128)
    assert e1 <= 1e-2
    assert e2 <= 0.5 * e1 or e2 <= 1e-6


def test_filtered_backprojection_recovers_a_gaussian():
    g = GridSpec(1, (64, 64), (2 / 64, 2 / 64), (-1.0, -1.0))
    X, Y = g.mesh()
    f = Field(g, np.exp(-(X**2 + Y**2) / (2 * 0.15**2)))
    d, _ = circle_directions(180)
    rec = radon_invert(radon_forward(f, d, count=256), g)
    assert np.linalg.norm(rec.values - f.values) / np.linalg.norm(f.values) <= 2e-2


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_filtered_backprojection_is_linear(a, b):
    g = GridSpec(1, (16, 16), (0.25, 0.25), (-2.0, -2.0))
    rng = np.random.default_rng(11)
    d, _ = circle_directions(20)
    s1 = Sinogram(1, d, -3.0, 0.25, rng.standard_normal((20, 25)))
    s2 = s1.replace(rng.standard_normal((20, 25)))
    lhs = radon_invert(s1.replace(a * s1.values + b * s2.values), g).values
    rhs = a * radon_invert(s1, g).values + b * radon_invert(s2, g).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (np.max(np.abs(rhs)) + 1)


# ---------------------------------------------------------------------------
# the sinogram convolution
# ---------------------------------------------------------------------------

def test_sinogram_convolution_needs_general_position():
    s = single_direction(1.0, 0.0, np.zeros(8))
    for op in (qp_forward, qp_adjoint, qp_invert):
        with pytest.raises(GeneralPositionError):
            op(s)


def test_sinogram_convolution_of_zero():
    s = single_direction(0.6, 0.8, np.zeros(64), dp=0.1)
    assert not np.any(qp_forward(s).values)
    assert not np.any(qp_adjoint(s).values)
    assert not np.any(qp_invert(s).values)


def test_sinogram_convolution_spreads_a_spike_one_way():
    dp, width = 0.0025, 0.05
    p = -4.0 + dp * np.arange(3201)
    s = single_direction(0.0, 1.0, np.exp(-p**2 / width**2) / (math.sqrt(math.pi) * width), dp=dp)
    out = qp_forward(s, umax=1.5, du=0.005).values[0]
    # brute-force shift sum of the same narrow profile
    u = 0.005 * np.arange(-300, 301)
    brute = np.array([np.sum(np.exp(-(q - u**2) ** 2 / width**2)) for q in p]) * 0.005 / (math.sqrt(math.pi) * width)
    assert np.max(np.abs(out - brute)) <= 1e-3 * np.max(brute)
    assert np.max(np.abs(out[p < -0.4])) < 1e-12
    far = (p > 0.5) & (p < 2.0)
    # away from the spike the profile follows 1/sqrt(p)
    assert np.allclose(out[far], 1 / np.sqrt(p[far]), rtol=2e-2)


def test_sinogram_multiplier_coincides_with_paraboloid_multiplier():
    assert qhat(1.0, (0.0,), 1.0, 1) == pytest.approx(math.sqrt(math.pi) * np.exp(-1j * math.pi / 4), abs=1e-15)
    xi = np.concatenate([-np.geomspace(1e-3, 40, 50), np.geomspace(1e-3, 40, 50)])
    assert np.array_equal(qhat(xi, (0.0,), 1.0, 1), that_multiplier(0.0, xi, 1))


def test_sinogram_convolution_round_trip_per_direction():
    # the kernel does not decay, so the offset range and cutoff must be generous
    dp = 0.05
    p = -160.0 + dp * np.arange(6401)
    d, _ = circle_directions(16, 0.3)
    s = Sinogram(1, d, p[0], dp, np.tile(np.exp(-(p - 1.0) ** 2), (d.shape[0], 1)))
    back = qp_invert(qp_forward(s, umax=32.0), pad=4.0)
    err = np.linalg.norm(back.values - s.values, axis=1) / np.linalg.norm(s.values, axis=1)
    assert np.max(err) <= 2e-2


def test_radon_of_paraboloid_image_is_sinogram_convolution():
    X, w = 24.0, 3.7
    y0 = 3.05 * w
    top = y0 + 4 * w
    g = GridSpec.paraboloid(1, 64, 2 * X / 64, -top, top + X * X + 2 * w)
    F = sample_phantom(Phantom.single((0.0, y0), w), g)
    G = parab_forward(F, 8.0)
    d, _ = circle_directions(90, 0.2)
    a = radon_forward(G, d)
    b = qp_forward(radon_forward(F, d, a.p0, a.dp, a.values.shape[1]), 8.0, g.dx)
    assert np.linalg.norm(a.values - b.values) / np.linalg.norm(a.values) <= 2e-2


def test_fill_circle_gaps_interpolates_in_angle():
    d, w = circle_directions(12, 0.3)
    a = np.arctan2(d[:, 1], d[:, 0])
    s = Sinogram(1, d, 0.0, 1.0, np.cos(a)[:, None] * np.ones((1, 3)), w)
    full = fill_circle_gaps(s, 12)
    assert full.values.shape == (12, 3)
    assert np.allclose(full.weights, 1 / 12)
    # stored rows unchanged, filled rows between their neighbours
    fa = np.arctan2(full.directions[:, 1], full.directions[:, 0])
    for m in range(12):
        assert min(np.cos(fa[m - 1]), np.cos(fa[(m + 1) % 12])) - 1e-12 <= full.values[m, 0]
    with pytest.raises(ValueError):
        fill_circle_gaps(s, 10)


def test_paraboloid_inversion_through_radon_rejects_n2():
    g = GridSpec.paraboloid(2, 4, 0.5, -1.0, 1.0)
    with pytest.raises(GridError):
        invert_P_radon(Field(g, np.zeros(g.dims)))


def test_paraboloid_inversion_through_radon_of_zero():
    g = GridSpec.paraboloid(1, 16, 0.5, -2.0, 10.0)
    assert not np.any(invert_P_radon(Field(g, np.zeros(g.dims)), directions=36).values)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

def test_central_projection_lands_on_lower_half_sphere():
    z = np.random.default_rng(0).normal(size=(50, 2))
    w, t = central_projection(z)
    assert np.allclose(np.sum(w * w, axis=-1) + t * t, 1.0)
    assert np.all(t < 0)


@pytest.mark.parametrize("n,expected", [(1, math.pi), (2, 2 * math.pi)])
def test_pullback_identity_for_constant(n, expected):
    lhs, rhs = pullback_identity_check(lambda w, t: np.ones_like(t), n)
    assert abs(lhs - expected) <= 1e-4 * expected
    assert abs(rhs - expected) <= 1e-4 * expected


def test_pullback_identity_for_vertical_component_squared():
    lhs, rhs = pullback_identity_check(lambda w, t: t**2, 1)
    # int dz / (1+z^2)^2 = pi/2
    assert abs(lhs - rhs) <= 1e-4 * abs(rhs)
    assert rhs == pytest.approx(math.pi / 2, rel=1e-4)


@pytest.mark.parametrize("n", [1, 2])
def test_pullback_identity_for_random_smooth_functions(n):
    rng = np.random.default_rng(40 + n)
    for _ in range(5):
        c = rng.normal(size=4)
        a = rng.normal(size=n)

        def h(w, t):
            return c[0] + c[1] * t + c[2] * np.cos(3 * t + w @ a) + c[3] * np.exp(-(w @ a) ** 2)

        lhs, rhs = pullback_identity_check(h, n)
        assert abs(lhs - rhs) <= 1e-4 * max(abs(rhs), 1.0)


def test_ramp_commutation_of_zero():
    g = GridSpec(1, (16, 16), (0.25, 0.25), (-2.0, -2.0))
    assert lambda_commutation_check(Field(g, np.zeros(g.dims)), count=18) == 0.0


def test_ramp_commutation_discrepancy_shrinks():
    e128 = lambda_commutation_check(gaussian_field(128))
    e256 = lambda_commutation_check(gaussian_field(256))
    assert e256 <= 3e-2
    assert e256 <= 0.5 * e128


def test_ramp_commutation_for_vertical_normal():
    # with only near-vertical normals kept both sides filter along p = y
    assert lambda_commutation_check(gaussian_field(128), count=180, min_theta=0.999) <= 2e-2


def test_translation_property(gauss_256):
    h = gauss_256.grid.dx
    assert translation_property_check(gauss_256, (0.0, 0.0)) == 0.0
    assert translation_property_check(gauss_256, (h, 0.0)) <= 1e-3
    assert translation_property_check(gauss_256, (3 * h, -2 * h)) <= 1e-3
    with pytest.raises(GridError):
        translation_property_check(gauss_256, (0.3 * h, 0.0))
