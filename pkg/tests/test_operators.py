import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfsphere.grid import Field, GridError, GridSpec, Phantom, inner_product, interpolate, sample_phantom
from halfsphere.operators import (parab_adjoint, parab_forward, sphere_data_weight,
                                  sphere_means_adjoint, sphere_means_forward)

trap = np.trapezoid


@pytest.fixture(scope="module")
def bump_1d():
    h = GridSpec.half_space(1, 128, 4.0, 128, 4.0)
    ph = Phantom.single((0.3, 1.5), 0.3)
    f = sample_phantom(ph, h)
    return h, f, sphere_means_forward(f)


def test_sphere_means_of_zero():
    h = GridSpec.half_space(1, 16, 2.0, 16, 2.0)
    z = Field(h, np.zeros(h.dims), half_space=True)
    assert not np.any(sphere_means_forward(z).values)
    assert not np.any(sphere_means_adjoint(z).values)


def test_sphere_means_need_half_space_input():
    h = GridSpec.half_space(1, 16, 2.0, 16, 2.0)
    with pytest.raises(GridError):
        sphere_means_forward(Field(h, np.ones(h.dims)))
    full = GridSpec(1, (8, 8), (0.25, 0.25), (-1.0, -1.0))
    with pytest.raises(GridError):
        sphere_means_forward(Field(full, np.zeros((8, 8)), half_space=True))


def test_sphere_means_match_dense_quadrature(bump_1d):
    h, f, g = bump_1d
    fc = f.replace(f.values, compact=True)
    t = np.linspace(-np.pi / 2, np.pi / 2, 20001)
    xs, ys = h.axis(0), h.axis(1)
    worst = 0.0
    for i in (20, 50, 64, 70, 90):
        for j in (10, 30, 47, 60, 100):
            x, y = xs[i], ys[j]
            pts = np.stack([x + y * np.sin(t), y * np.cos(t)], -1)
            oracle = trap(interpolate(fc, pts), t) / math.pi
            worst = max(worst, abs(g.values[i, j] - oracle))
    assert worst / np.max(np.abs(g.values)) <= 1e-3


def test_sphere_means_peak_at_bump_height(bump_1d):
    h, f, g = bump_1d
    i0 = int(np.argmin(np.abs(h.axis(0) - 0.3)))
    assert abs(h.axis(1)[np.argmax(g.values[i0])] - 1.5) <= 2 * h.dy


def test_sphere_means_follow_the_half_circle_locus(bump_1d):
    h, f, g = bump_1d
    xs, ys = h.axis(0), h.axis(1)
    for i in range(40, 90, 7):
        r = math.hypot(xs[i] - 0.3, 1.5)
        assert abs(ys[np.argmax(g.values[i])] - r) <= 2 * h.dy


def test_sphere_means_n2_match_dense_quadrature():
    h = GridSpec.half_space(2, 32, 2.0, 32, 2.0)
    f = sample_phantom(Phantom.single((0.2, -0.1, 1.0), 0.3), h)
    g = sphere_means_forward(f, arc=0.5 * h.dy)
    fc = f.replace(f.values, compact=True)
    T, P = np.meshgrid(np.linspace(0, np.pi / 2, 1201), np.linspace(0, 2 * np.pi, 1200, endpoint=False),
                       indexing="ij")
    a = h.axes()
    worst = 0.0
    for i, j, k in ((14, 14, 8), (14, 16, 15), (17, 14, 20), (17, 16, 28)):
        x0, x1, y = a[0][i], a[1][j], a[2][k]
        pts = np.stack([x0 + y * np.sin(T) * np.cos(P), x1 + y * np.sin(T) * np.sin(P), y * np.cos(T)], -1)
        oracle = trap(interpolate(fc, pts).mean(axis=1) * np.sin(T[:, 0]), T[:, 0])
        worst = max(worst, abs(g.values[i, j, k] - oracle))
    assert worst / np.max(np.abs(g.values)) <= 1e-3


def test_sphere_adjoint_matches_dense_quadrature():
    h = GridSpec.half_space(1, 128, 4.0, 128, 4.0)

    def ring(x, r):
        return np.exp(-((x - 0.2) ** 2 + (r - 1.8) ** 2) / (2 * 0.3**2))

    X, Y = h.mesh()
    g = Field(h, ring(X, Y), half_space=True)
    U = 4.0
    A = sphere_means_adjoint(g, U)
    u = np.linspace(-U, U, 20001)
    worst = 0.0
    for i in (20, 50, 64, 70, 90):
        for j in (10, 30, 47, 60, 100):
            x, y = h.axis(0)[i], h.axis(1)[j]
            worst = max(worst, abs(A.values[i, j] - trap(ring(x + u, np.sqrt(y * y + u * u)), u)))
    assert worst / np.max(np.abs(A.values)) <= 1e-3


def test_sphere_adjoint_concentrates_below_the_data_radius():
    h = GridSpec.half_space(1, 64, 4.0, 64, 4.0)
    X, Y = h.mesh()
    g = Field(h, np.exp(-(X**2 + (Y - 2.0) ** 2) / (2 * 0.1**2)), half_space=True)
    A = sphere_means_adjoint(g, 3.0)
    col = A.values[32]
    y = h.axis(1)
    assert col[y <= 2.2].sum() > 50 * np.abs(col[y > 2.4]).sum()


def _sphere_pairing_gap(nx):
    h = GridSpec.half_space(1, nx, 4.0, nx, 4.0)
    f = sample_phantom(Phantom.single((0.2, 1.6), 0.35), h)
    X, Y = h.mesh()
    g = Field(h, np.exp(-((X + 0.3) ** 2 + (Y - 2.0) ** 2) / (2 * 0.4**2)), half_space=True)
    w = sphere_data_weight(h)[None, :]
    lhs = inner_product(sphere_means_forward(f).replace(sphere_means_forward(f).values * w), g)
    rhs = inner_product(f, sphere_means_adjoint(g, 4.0))
    return abs(lhs - rhs) / (f.norm() * g.norm())


def test_sphere_pair_is_adjoint_up_to_quadrature():
    e64, e128 = _sphere_pairing_gap(64), _sphere_pairing_gap(128)
    assert e128 <= 0.5 * e64 or e128 <= 1e-6


def test_parab_rejects_incompatible_grid():
    g = GridSpec(1, (8, 8), (0.5, 0.5), (0.0, 0.0))
    with pytest.raises(GridError):
        parab_forward(Field(g, np.zeros((8, 8))))
    with pytest.raises(GridError):
        parab_adjoint(Field(g, np.zeros((8, 8))))


def test_parab_point_mass_traces_parabola():
    g = GridSpec.paraboloid(1, 16, 0.25, -2.0, 2.0)
    v = np.zeros(g.dims)
    i0, j0 = 8, g.dims[1] - 5
    v[i0, j0] = 1.0
    G = parab_forward(Field(g, v), umax=1.0)
    nz = np.argwhere(G.values != 0)
    expect = {(i0 - k, j0 + k * k) for k in range(-4, 5) if 0 <= j0 + k * k < g.dims[1]}
    expect = {e for e in expect if 0 <= e[0] < 16 and e[1] < g.dims[1]}
    # G(x, y) = sum_k F(x + k dx, y - k^2 dy) dx, so the mass spreads upward along y = y0 + |k|^2 dy
    got = {tuple(p) for p in nz}
    assert got == expect
    assert np.all(G.values[tuple(np.array(sorted(got)).T)] == 0.25)
    A = parab_adjoint(Field(g, v), umax=1.0)
    down = {tuple(p) for p in np.argwhere(A.values != 0)}
    assert all(j <= j0 for _, j in down) and A.values[i0, j0] == 0.25


def test_parab_matches_fine_quadrature():
    g = GridSpec.paraboloid(1, 128, 0.0625, -1.0, 12.0)
    ph = Phantom.single((0.1, 2.0), 0.3)
    F = sample_phantom(ph, g)
    U = 2.5
    G = parab_forward(F, U)
    u = np.linspace(-U, U, int(round(2 * U / (g.dx / 4))) + 1)
    worst = 0.0
    for i in (40, 64, 70, 90):
        for y in (2.0, 3.5, 5.0, 7.0):
            j = int(round((y - g.origin[1]) / g.dy))
            x, yy = g.axis(0)[i], g.axis(1)[j]
            oracle = trap(ph(np.stack([x + u, yy - u * u], -1)), u)
            worst = max(worst, abs(G.values[i, j] - oracle))
    assert worst / np.max(np.abs(G.values)) <= 1e-3


@pytest.mark.parametrize("n, dims", [(1, (64, 64)), (1, (128, 96)), (2, (16, 16, 24))])
def test_parab_exact_discrete_adjoint(n, dims, rng):
    g = GridSpec(n, dims, (0.25,) * n + (0.0625,), (-2.0,) * n + (-1.0,))
    F, G = (Field(g, rng.standard_normal(g.dims)) for _ in range(2))
    PF = parab_forward(F)
    gap = abs(inner_product(PF, G) - inner_product(F, parab_adjoint(G)))
    assert gap <= 1e-12 * PF.norm() * G.norm()


@given(st.integers(0, 2**31), st.integers(-3, 3))
def test_parab_translation_equivariance(seed, shift):
    r = np.random.default_rng(seed)
    g = GridSpec.paraboloid(1, 24, 0.25, -1.0, 3.0)
    v = np.zeros(g.dims)
    v[8:16] = r.standard_normal((8, g.dims[1]))
    a = parab_forward(Field(g, v), 1.0).values
    b = parab_forward(Field(g, np.roll(v, shift, axis=0)), 1.0).values
    np.testing.assert_allclose(np.roll(a, shift, axis=0), b, atol=1e-13)


@given(st.integers(0, 2**31), st.floats(-2, 2), st.floats(-2, 2))
def test_operators_are_linear(seed, a, b):
    r = np.random.default_rng(seed)
    h = GridSpec.half_space(1, 12, 1.5, 12, 1.5)
    u, v = (Field(h, r.standard_normal(h.dims), half_space=True) for _ in range(2))
    for op in (sphere_means_forward, sphere_means_adjoint):
        lhs, rhs = op(u * a + v * b).values, a * op(u).values + b * op(v).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(rhs))))
    g = GridSpec.paraboloid(1, 12, 0.25, -1.0, 1.0)
    U, V = (Field(g, r.standard_normal(g.dims)) for _ in range(2))
    for op in (parab_forward, parab_adjoint):
        lhs, rhs = op(U * a + V * b).values, a * op(U).values + b * op(V).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(rhs))))
