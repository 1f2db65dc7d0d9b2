"""Gauss-map utilities: stereographic coordinates, the Fubini-Study pullback
and residual checks of the two background identities

    kappa * omega_hat = -phi^* omega_FS,
    (lap_hat - kappa) alpha = (lap_hat - kappa) beta = (lap_hat - kappa) gamma = 0.

For ``omega_hat = i sum_k mu_k ^ conj(mu_k)`` with ``mu_k = c_k(zeta) dz`` one
finds ``sum |c_k|^2 = (1 + |zeta|^2)^2 / 2``, so the ``spinorial-patch``
background is ``ghat = (1 + |zeta|^2)^2 / 2`` and
``kappa = -4 |zeta'|^2 / (1 + |zeta|^2)^4``. A holomorphic zeta cannot be
doubly periodic without poles, so the patch is a plain rectangle and the
checks skip a margin of nodes where the periodic stencil wraps.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from aflab.grid import ContractError, Geometry, Grid, lap_hat

MARGIN = 2


def stereographic(zeta):
    """Point ``(alpha, beta, gamma)`` on the unit sphere for ``zeta``.

    Works elementwise on arrays. ``zeta = inf`` maps to the pole ``(-1, 0, 0)``.
    """
    if np.isscalar(zeta):
        z = complex(zeta)
        if cmath.isinf(z):
            return (-1.0, 0.0, 0.0)
        r = 1.0 + abs(z) ** 2
        return ((1.0 - abs(z) ** 2) / r, 2.0 * z.real / r, 2.0 * z.imag / r)
    z = np.asarray(zeta, dtype=complex)
    a2 = np.abs(z) ** 2
    r = 1.0 + a2
    alpha = (1.0 - a2) / r
    beta = 2.0 * z.real / r
    # i (conj(z) - z) = 2 Im z
    gamma = 2.0 * z.imag / r
    pole = np.isinf(z)
    if np.any(pole):
        alpha = np.where(pole, -1.0, alpha)
        beta = np.where(pole, 0.0, beta)
        gamma = np.where(pole, 0.0, gamma)
    return alpha, beta, gamma


@dataclass(frozen=True, eq=False)
class SpinorSample:
    grid: Grid
    zeta_re: np.ndarray
    zeta_im: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    @classmethod
    def from_zeta(cls, grid: Grid, zeta) -> "SpinorSample":
        z = np.asarray(zeta, dtype=complex) * np.ones(grid.shape)
        a, b, c = stereographic(z)
        return cls(grid, z.real.copy(), z.imag.copy(), a, b, c)

    @property
    def zeta(self) -> np.ndarray:
        return self.zeta_re + 1j * self.zeta_im


def load_sample(re_path, im_path) -> SpinorSample:
    """``SpinorSample`` from two field dumps holding Re zeta and Im zeta."""
    from aflab import fieldio

    grid, re = fieldio.read_field(re_path)
    grid_im, im = fieldio.read_field(im_path)
    if grid_im != grid:
        raise fieldio.FormatError("real and imaginary dumps describe different grids")
    return SpinorSample.from_zeta(grid, re + 1j * im)


@dataclass(frozen=True, eq=False)
class PullbackDensity:
    grid: Grid
    density: np.ndarray


def _wirtinger(z: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    zx = (np.roll(z, -1, axis=1) - np.roll(z, 1, axis=1)) / (2.0 * grid.hx)
    zy = (np.roll(z, -1, axis=0) - np.roll(z, 1, axis=0)) / (2.0 * grid.hy)
    return 0.5 * (zx - 1j * zy), 0.5 * (zx + 1j * zy)


def fubini_study_pullback(sample: SpinorSample) -> PullbackDensity:
    """Coefficient of ``phi^* omega_FS`` against ``i dz ^ dzbar = 2 dx dy``.

    Uses the energy density ``2 (|zeta_z|^2 + |zeta_zbar|^2) / (1 + |zeta|^2)^2``,
    which is the pullback coefficient for holomorphic zeta and stays
    non-negative (and invariant under ``zeta -> 1/conj(zeta)``) otherwise.
    """
    z = sample.zeta
    dz, dzb = _wirtinger(z, sample.grid)
    dens = 2.0 * (np.abs(dz) ** 2 + np.abs(dzb) ** 2) / (1.0 + np.abs(z) ** 2) ** 2
    return PullbackDensity(sample.grid, dens)


def _interior(a: np.ndarray, margin: int) -> np.ndarray:
    return a[margin:-margin, margin:-margin] if margin else a


def _same_grid(sample: SpinorSample, geom: Geometry):
    if sample.grid.shape != geom.grid.shape:
        raise ContractError("spinor sample and geometry live on different grids")


def _ratio(num: float, den: float) -> float:
    if num == 0.0:
        return 0.0
    return num / den if den > 0 else math.inf


def verify_kappa_identity(sample: SpinorSample, geom: Geometry, margin: int = MARGIN) -> float:
    """Interior ``max |kappa ghat + density| / max density``."""
    _same_grid(sample, geom)
    dens = fubini_study_pullback(sample).density
    res = _interior(np.abs(geom.kappa * geom.g_hat + dens), margin)
    return _ratio(float(res.max()), float(_interior(dens, margin).max()))


def verify_kernel_identity(sample: SpinorSample, geom: Geometry,
                           margin: int = MARGIN) -> tuple[float, float, float]:
    """Interior residuals of ``lap_hat(c) - kappa c`` for the three components."""
    _same_grid(sample, geom)
    out = []
    for comp in (sample.alpha, sample.beta, sample.gamma):
        r = _interior(np.abs(lap_hat(comp, geom) - geom.kappa * comp), margin)
        out.append(_ratio(float(r.max()), float(_interior(np.abs(comp), margin).max())))
    return tuple(out)


# --------------------------------------------------------------------------
# the spinorial-patch preset

def default_zeta(z):
    # branch point (zeta' = 0, so kappa = 0) near z = -0.257
    return 0.3 * z ** 2 + 0.2 * np.exp(z)


def default_dzeta(z):
    return 0.6 * z + 0.2 * np.exp(z)


@dataclass(frozen=True, eq=False)
class SpinorPatch:
    sample: SpinorSample
    geometry: Geometry


def patch_grid(n: int, half_width: float = 1.0) -> Grid:
    return Grid(n, n, 2 * half_width, 2 * half_width, -half_width, -half_width, periodic=False)


def patch_geometry(n: int = 128, zeta=default_zeta, dzeta=default_dzeta,
                   alpha_prime: float = 1.0, half_width: float = 1.0) -> SpinorPatch:
    """Sample zeta on a square patch and build ``(ghat, kappa)`` from it.

    With ``dzeta`` given, kappa is the closed form for holomorphic zeta;
    with ``dzeta=None`` it is taken from the discrete pullback density
    (used for non-holomorphic controls).
    """
    grid = patch_grid(n, half_width)
    X, Y = grid.coords()
    zc = X + 1j * Y
    zv = np.asarray(zeta(zc), dtype=complex) * np.ones(grid.shape)
    sample = SpinorSample.from_zeta(grid, zv)
    r = 1.0 + np.abs(zv) ** 2
    g = 0.5 * r ** 2
    if dzeta is not None:
        dz = np.asarray(dzeta(zc), dtype=complex) * np.ones(grid.shape)
        kappa = -4.0 * np.abs(dz) ** 2 / r ** 4
    else:
        kappa = -fubini_study_pullback(sample).density / g
    geom = Geometry(grid, g, kappa, alpha_prime, False, "spinorial-patch")
    return SpinorPatch(sample, geom)


def convergence_study(resolutions=(64, 128, 256), zeta=default_zeta, dzeta=default_dzeta):
    """Identity residuals at each resolution (rows: n, kappa, alpha, beta, gamma)."""
    rows = []
    for n in resolutions:
        patch = patch_geometry(n, zeta, dzeta)
        rk = verify_kappa_identity(patch.sample, patch.geometry)
        ra, rb, rc = verify_kernel_identity(patch.sample, patch.geometry)
        rows.append((n, rk, ra, rb, rc))
    return rows
