import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aflab import fieldio
from aflab.grid import ContractError, Geometry, Grid
from aflab.spinorial import (SpinorSample, convergence_study, fubini_study_pullback,
                             load_sample, patch_geometry, patch_grid, stereographic,
                             verify_kappa_identity, verify_kernel_identity)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_stereographic_examples():
    assert stereographic(0) == (1.0, 0.0, 0.0)
    np.testing.assert_allclose(stereographic(1), (0.0, 1.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(stereographic(1j), (0.0, 0.0, 1.0), atol=1e-15)
    assert stereographic(complex("inf")) == (-1.0, 0.0, 0.0)


@given(finite, finite)
def test_stereographic_unit_sphere(x, y):
    a, b, c = stereographic(complex(x, y))
    assert abs(a * a + b * b + c * c - 1.0) <= 1e-12


@given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7))
def test_stereographic_lipschitz(x1, y1, x2, y2):
    p = np.array(stereographic(complex(x1, y1)))
    q = np.array(stereographic(complex(x2, y2)))
    assert np.linalg.norm(p - q) <= 2 * abs(complex(x1, y1) - complex(x2, y2)) + 1e-15


def test_stereographic_arrays_match_scalars(rng):
    z = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    a, b, c = stereographic(z)
    for k in range(20):
        np.testing.assert_allclose((a[k], b[k], c[k]), stereographic(z[k]), rtol=0, atol=1e-15)


def test_density_constant_and_identity_map():
    grid = patch_grid(64)
    assert np.all(fubini_study_pullback(SpinorSample.from_zeta(grid, 0.3 + 0.1j)).density == 0)
    X, Y = grid.coords()
    dens = fubini_study_pullback(SpinorSample.from_zeta(grid, X + 1j * Y)).density
    j, i = 32, 32                       # node at z = 0
    assert X[j, i] == 0 and Y[j, i] == 0
    assert dens[j, i] == pytest.approx(2.0, rel=1e-12)
    inner = dens[2:-2, 2:-2]
    closed = (2.0 / (1 + X ** 2 + Y ** 2) ** 2)[2:-2, 2:-2]
    np.testing.assert_allclose(inner, closed, rtol=1e-12)
    assert np.all(dens >= 0)


def test_density_inversion_invariance():
    grid = patch_grid(128)
    X, Y = grid.coords()
    z = 0.5 + X + 1j * (Y + 1.5)        # keeps away from zero
    d1 = fubini_study_pullback(SpinorSample.from_zeta(grid, z)).density
    d2 = fubini_study_pullback(SpinorSample.from_zeta(grid, 1.0 / np.conj(z))).density
    np.testing.assert_allclose(d1[2:-2, 2:-2], d2[2:-2, 2:-2], rtol=1e-3)


def test_identities_for_constant_zeta():
    grid = patch_grid(32)
    geom = Geometry(grid, np.ones(grid.shape), np.zeros(grid.shape))
    s = SpinorSample.from_zeta(grid, 0.4 - 0.2j)
    assert verify_kappa_identity(s, geom) == 0.0
    assert verify_kernel_identity(s, geom) == (0.0, 0.0, 0.0)


def test_patch_residuals_converge():
    rows = convergence_study((64, 128, 256))
    for c in range(1, 5):
        for a, b in zip(rows, rows[1:]):
            assert a[c] / b[c] >= 3.7


def test_corrupted_kappa_detected():
    patch = patch_geometry(64)
    bad = Geometry(patch.geometry.grid, patch.geometry.g_hat, patch.geometry.kappa - 0.1)
    assert verify_kappa_identity(patch.sample, bad) >= 0.05
    assert verify_kappa_identity(patch.sample, patch.geometry) < 1e-3


def test_non_holomorphic_control():
    hol = patch_geometry(128)
    res_h = max(verify_kernel_identity(hol.sample, hol.geometry))

    def zeta(z):
        return 0.3 * z ** 2 + 0.2 * np.exp(z) + 0.3 * np.conj(z) * z.real

    non = patch_geometry(128, zeta=zeta, dzeta=None)
    res_n = max(verify_kernel_identity(non.sample, non.geometry))
    assert res_n >= 10 * res_h


def test_grid_mismatch():
    patch = patch_geometry(32)
    other = patch_geometry(64)
    with pytest.raises(ContractError):
        verify_kappa_identity(patch.sample, other.geometry)


def test_load_sample(tmp_path):
    grid = Grid(16, 16)
    X, Y = grid.coords()
    fieldio.write_field(tmp_path / "re.bin", grid, X)
    fieldio.write_field(tmp_path / "im.bin", grid, Y)
    s = load_sample(tmp_path / "re.bin", tmp_path / "im.bin")
    np.testing.assert_array_equal(s.zeta, X + 1j * Y)
