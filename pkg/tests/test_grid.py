import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aflab.grid import (ContractError, Geometry, GeometryConfig, GeometryError, Grid,
                        build_geometry, curvature_of_metric, dirichlet_form, grad_sq,
                        integrate, inner, lap_hat, laplacian, sample)

from conftest import geometry


def test_grid_invariants():
    g = Grid(16, 8, 2.0, 1.0)
    assert g.shape == (8, 16)
    assert g.hx == 0.125 and g.hy == 0.125
    X, Y = g.coords()
    assert X[0, 1] == 0.125 and Y[1, 0] == 0.125
    with pytest.raises(ContractError):
        Grid(7, 16)
    with pytest.raises(ContractError):
        Grid(16, 16, -1.0)


def test_integrate_normalized_constant():
    geom = geometry("flat-zero", 24)
    assert abs(integrate(1.0, geom) - 1.0) <= 1e-12
    assert integrate(np.zeros(geom.grid.shape), geom) == 0.0


def test_integrate_bump_kappa_oracle():
    # closed form: int -c (1 - cos cos)/2 * 2 ghat dxdy with 2 ghat = 1 gives -c/2
    for n in (16, 64):
        geom = geometry("synthetic-bump", n, bump_amplitude=10.0)
        assert integrate(geom.kappa, geom) == pytest.approx(-5.0, rel=1e-4)
    assert geom.kappa_l1 == pytest.approx(5.0, rel=1e-12)


def test_integrate_grid_mismatch():
    geom = geometry("flat-zero", 16)
    with pytest.raises(ContractError):
        integrate(np.ones((8, 8)), geom)


def test_lap_hat_constant_is_zero(bump32):
    assert np.all(lap_hat(np.full(bump32.grid.shape, 3.7), bump32) == 0.0)


def test_lap_hat_discrete_symbol():
    grid = Grid(32, 32, 1.5, 1.0)
    geom = Geometry(grid, np.ones(grid.shape), np.zeros(grid.shape))
    X, _ = grid.coords()
    u = np.cos(2 * np.pi * X / grid.lx)
    symbol = -math.sin(math.pi * grid.hx / grid.lx) ** 2 / grid.hx ** 2
    np.testing.assert_allclose(lap_hat(u, geom), symbol * u, atol=1e-11)
    np.testing.assert_allclose(laplacian(u, geom), 2 * symbol * u, atol=1e-11)


def test_lap_hat_rejects_non_periodic_samples():
    grid = Grid(16, 16)
    with pytest.raises(ContractError):
        sample(lambda x, y: x, grid)
    u = sample(lambda x, y: np.sin(2 * np.pi * x), grid)
    assert u.shape == grid.shape


def test_grad_sq_examples():
    grid = Grid(32, 32)
    geom = Geometry(grid, np.ones(grid.shape), np.zeros(grid.shape))
    X, _ = grid.coords()
    f = np.sin(2 * np.pi * X)
    assert np.all(grad_sq(np.full(grid.shape, 2.0), geom) == 0.0)
    # independent code path: explicit index loops
    ref = np.empty(grid.shape)
    for j in range(grid.ny):
        for i in range(grid.nx):
            fx = (f[j, (i + 1) % grid.nx] - f[j, i - 1]) / (2 * grid.hx)
            fy = (f[(j + 1) % grid.ny, i] - f[j - 1, i]) / (2 * grid.hy)
            ref[j, i] = (fx * fx + fy * fy) / 4.0
    np.testing.assert_allclose(grad_sq(f, geom), ref, rtol=1e-14, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.floats(0.1, 10.0))
def test_grad_sq_homogeneous(seed, scale):
    geom = geometry("synthetic-bump", 16)
    f = np.random.default_rng(seed).standard_normal(geom.grid.shape)
    np.testing.assert_allclose(grad_sq(scale * f, geom), scale ** 2 * grad_sq(f, geom),
                               rtol=1e-13, atol=1e-300)


def test_summation_by_parts(bump32, rng):
    u = rng.standard_normal(bump32.grid.shape)
    w = rng.standard_normal(bump32.grid.shape)
    a = inner(lap_hat(u, bump32), w, bump32)
    b = inner(u, lap_hat(w, bump32), bump32)
    assert abs(a - b) <= 1e-12 * abs(a)
    assert inner(-lap_hat(u, bump32), w, bump32) == pytest.approx(dirichlet_form(u, bump32, w),
                                                                  rel=1e-12)


def test_curvature_of_flat_metric_is_zero():
    grid = Grid(16, 16)
    assert np.all(curvature_of_metric(np.full(grid.shape, 0.5), grid) == 0.0)


def test_curvature_of_perturbed_metric():
    # kappa = -lap_hat(log ghat) with log ghat = -eps cos(kx): kappa ~ -eps k^2 cos(kx) / (4 ghat)
    grid = Grid(128, 128)
    X, _ = grid.coords()
    eps, k = 1e-3, 2 * np.pi
    g = np.exp(-eps * np.cos(k * X))
    kappa = curvature_of_metric(g, grid)
    expected = -eps * k * k * np.cos(k * X) / (4 * g)
    np.testing.assert_allclose(kappa, expected, atol=1e-3 * np.abs(expected).max())


def test_geometry_validation():
    grid = Grid(16, 16)
    ones = np.ones(grid.shape)
    with pytest.raises(GeometryError):
        Geometry(grid, -ones, 0 * ones)
    with pytest.raises(GeometryError):
        Geometry(grid, ones, 0.1 * ones)
    with pytest.raises(GeometryError):
        Geometry(grid, ones, 0 * ones, alpha_prime=0.0)
    with pytest.raises(GeometryError):
        Geometry(grid, ones, 0 * ones, normalized=True)
    geom = Geometry(grid, ones, -ones)
    assert geom.total_area == pytest.approx(2.0)
    assert geom.K == 1.0


def test_presets():
    flat = geometry("flat-zero", 16)
    assert flat.normalized and np.all(flat.kappa == 0)
    ck = geometry("constant-kappa", 16, kappa_level=2.0)
    assert np.all(ck.kappa == -2.0)
    bump = geometry("synthetic-bump", 16, bump_amplitude=4.0)
    assert bump.K == pytest.approx(4.0) and float(bump.kappa.max()) == 0.0
    assert geometry("consistent-neg", 16, bump_amplitude=0.0).kappa_l1 == 0.0
    with pytest.raises(GeometryError):
        geometry("consistent-neg", 16, bump_amplitude=0.3)
    with pytest.raises(GeometryError):
        build_geometry(GeometryConfig("nope"))
    patch = build_geometry(GeometryConfig("spinorial-patch", nx=32, ny=32))
    assert not patch.grid.periodic and np.all(patch.kappa <= 0)


def test_file_geometry_roundtrip(tmp_path):
    from aflab import fieldio
    bump = geometry("synthetic-bump", 16, bump_amplitude=3.0, normalize=False)
    fieldio.write_field(tmp_path / "g.bin", bump.grid, bump.g_hat)
    fieldio.write_field(tmp_path / "k.bin", bump.grid, bump.kappa)
    g = build_geometry(GeometryConfig(None, g_hat_file=str(tmp_path / "g.bin"),
                                      kappa_file=str(tmp_path / "k.bin"), normalize=True))
    assert g.total_area == pytest.approx(1.0, abs=1e-12)
    # normalizing scales ghat by 1/area and kappa by area: kappa_l1 is invariant
    assert g.kappa_l1 == pytest.approx(bump.kappa_l1, rel=1e-12)
