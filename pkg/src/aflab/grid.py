"""Periodic grid, discrete operators and background geometry.

Conventions (fixed throughout the package):

* ``z = x + i y``, so ``d_z d_zbar = (d_xx + d_yy) / 4`` and
  ``i dz ^ dzbar = 2 dx ^ dy``.
* The background form is ``omega_hat = i ghat dz ^ dzbar = 2 ghat dx dy``.
* ``lap_hat(u) = ghat^{z zbar} u_{z zbar} = (u_xx + u_yy) / (4 ghat)``; the real
  Laplacian of ``omega_hat`` is ``2 * lap_hat``.
* Fields are float64 arrays of shape ``(ny, nx)``: y is the outer (row) index,
  node ``(j, i)`` sits at ``(x0 + i hx, y0 + j hy)``.

Derivatives are second-order central differences with periodic wrap. The
compact three-point Laplacian and the edge-based Dirichlet form are exact
discrete adjoints, so summation by parts holds to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from aflab.kernels import backend

KAPPA_TOL = 1e-10
NORMALIZE_TOL = 1e-12


class ContractError(ValueError):
    """Arguments that violate an operation's preconditions."""


class GeometryError(ValueError):
    """Background data that fails validation (ghat <= 0, kappa > 0, ...)."""


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    x0: float = 0.0
    y0: float = 0.0
    periodic: bool = True

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ContractError("nx, ny must be integers")
        if self.nx < 8 or self.ny < 8:
            raise ContractError(f"grid needs nx, ny >= 8 (got {self.nx}x{self.ny})")
        if not (self.lx > 0 and self.ly > 0):
            raise ContractError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        x = self.x0 + self.hx * np.arange(self.nx)
        y = self.y0 + self.hy * np.arange(self.ny)
        return np.meshgrid(x, y)

    def refine(self, factor: int = 2) -> "Grid":
        return replace(self, nx=self.nx * factor, ny=self.ny * factor)


@dataclass(frozen=True, eq=False)
class Geometry:
    grid: Grid
    g_hat: np.ndarray
    kappa: np.ndarray
    alpha_prime: float = 1.0
    normalized: bool = False
    name: str = "custom"
    total_area: float = field(init=False)
    kappa_l1: float = field(init=False)

    def __post_init__(self):
        g = np.ascontiguousarray(self.g_hat, dtype=float)
        k = np.ascontiguousarray(self.kappa, dtype=float)
        if g.shape != self.grid.shape or k.shape != self.grid.shape:
            raise ContractError("g_hat/kappa shape does not match grid")
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(k)):
            raise GeometryError("g_hat and kappa must be finite")
        if not np.all(g > 0):
            raise GeometryError("g_hat must be positive everywhere")
        kmax = float(k.max())
        if kmax > KAPPA_TOL:
            raise GeometryError(
                f"kappa must be <= 0 (positive part {kmax:.3g} exceeds {KAPPA_TOL:g})")
        k = np.minimum(k, 0.0)
        if not self.alpha_prime > 0:
            raise GeometryError("alpha_prime must be positive")
        g.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "g_hat", g)
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "total_area", integrate(np.ones(self.grid.shape), self))
        object.__setattr__(self, "kappa_l1", integrate(-k, self))
        if self.normalized and abs(self.total_area - 1.0) > NORMALIZE_TOL:
            raise GeometryError(f"normalized geometry has area {self.total_area!r}")

    # cached per-geometry arrays used by the kernels
    @property
    def weights(self) -> np.ndarray:
        """Nodal weights of omega_hat: ``2 ghat hx hy``."""
        w = self.__dict__.get("_w")
        if w is None:
            w = 2.0 * self.g_hat * self.grid.hx * self.grid.hy
            w.setflags(write=False)
            self.__dict__["_w"] = w
        return w

    @property
    def inv4g(self) -> np.ndarray:
        w = self.__dict__.get("_inv4g")
        if w is None:
            w = 0.25 / self.g_hat
            w.setflags(write=False)
            self.__dict__["_inv4g"] = w
        return w

    @property
    def K(self) -> float:
        """``sup(-kappa)``."""
        return float(-self.kappa.min())

    def with_kappa(self, kappa) -> "Geometry":
        return Geometry(self.grid, self.g_hat, kappa, self.alpha_prime,
                        self.normalized, self.name)


def _check(field, geom: Geometry) -> np.ndarray:
    a = np.asarray(field, dtype=float)
    if a.shape == ():
        a = np.full(geom.grid.shape, float(a))
    if a.shape != geom.grid.shape:
        raise ContractError(f"field shape {a.shape} does not match grid {geom.grid.shape}")
    return np.ascontiguousarray(a)


def integrate(field, geom: Geometry) -> float:
    """Discrete ``int field omega_hat`` with compensated summation."""
    a = _check(field, geom)
    return math.fsum((a * geom.weights).ravel())


def inner(u, w, geom: Geometry) -> float:
    return integrate(_check(u, geom) * _check(w, geom), geom)


def l2_norm(u, geom: Geometry) -> float:
    return math.sqrt(max(inner(u, u, geom), 0.0))


def lap_hat(field, geom: Geometry) -> np.ndarray:
    """``ghat^{z zbar} d_z d_zbar u = (u_xx + u_yy) / (4 ghat)``."""
    a = _check(field, geom)
    g = geom.grid
    return backend.lap(a, geom.inv4g, 1.0 / g.hx ** 2, 1.0 / g.hy ** 2)


def laplacian(field, geom: Geometry) -> np.ndarray:
    """Real Laplacian of omega_hat, ``2 * lap_hat``."""
    return 2.0 * lap_hat(field, geom)


def central_gradient(field, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(field, dtype=float)
    fx = (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2.0 * grid.hx)
    fy = (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) / (2.0 * grid.hy)
    return fx, fy


def grad_sq(field, geom: Geometry) -> np.ndarray:
    """``|df|^2 = ghat^{z zbar} f_z f_zbar = (f_x^2 + f_y^2) / (4 ghat)``."""
    fx, fy = central_gradient(_check(field, geom), geom.grid)
    return (fx * fx + fy * fy) * geom.inv4g


def dirichlet_form(u, geom: Geometry, w=None) -> float:
    """Edge-based ``int <du, dw>`` (the form whose operator is ``-lap_hat``)."""
    a = _check(u, geom)
    b = a if w is None else _check(w, geom)
    g = geom.grid
    ax = (np.roll(a, -1, axis=1) - a) / g.hx
    bx = (np.roll(b, -1, axis=1) - b) / g.hx
    ay = (np.roll(a, -1, axis=0) - a) / g.hy
    by = (np.roll(b, -1, axis=0) - b) / g.hy
    return math.fsum(((0.5 * g.hx * g.hy) * (ax * bx + ay * by)).ravel())


def curvature_of_metric(g_hat, grid: Grid) -> np.ndarray:
    """Discrete Gauss curvature ``-ghat^{z zbar} d_z d_zbar log ghat``."""
    g = np.asarray(g_hat, dtype=float)
    if g.shape != grid.shape:
        raise ContractError("g_hat shape does not match grid")
    if not np.all(g > 0):
        raise GeometryError("g_hat must be positive to take its curvature")
    inv4g = np.ascontiguousarray(0.25 / g)
    return -backend.lap(np.ascontiguousarray(np.log(g)), inv4g,
                        1.0 / grid.hx ** 2, 1.0 / grid.hy ** 2)


# --------------------------------------------------------------------------
# presets

PRESETS = ("flat-zero", "constant-kappa", "synthetic-bump", "consistent-neg",
           "spinorial-patch")


@dataclass
class GeometryConfig:
    preset: str | None = "flat-zero"
    nx: int = 128
    ny: int = 128
    lx: float = 1.0
    ly: float = 1.0
    alpha_prime: float = 1.0
    normalize: bool = True
    kappa_level: float = 1.0
    bump_amplitude: float = 1.0
    g_hat_file: str | None = None
    kappa_file: str | None = None


def flat_metric(grid: Grid, normalize: bool) -> np.ndarray:
    value = 1.0 / (2.0 * grid.lx * grid.ly) if normalize else 1.0
    return np.full(grid.shape, value)


def bump_kappa(grid: Grid, amplitude: float) -> np.ndarray:
    X, Y = grid.coords()
    return -amplitude * (1.0 - np.cos(2 * np.pi * X / grid.lx) * np.cos(2 * np.pi * Y / grid.ly)) / 2.0


def build_geometry(config: GeometryConfig) -> Geometry:
    """Construct and validate background data from a preset or field dumps."""
    from aflab import fieldio

    ap = config.alpha_prime
    if config.g_hat_file or config.kappa_file:
        if not (config.g_hat_file and config.kappa_file):
            raise GeometryError("file geometry needs both g_hat_file and kappa_file")
        grid, g = fieldio.read_field(config.g_hat_file)
        grid_k, k = fieldio.read_field(config.kappa_file)
        if grid_k.shape != grid.shape or (grid_k.lx, grid_k.ly) != (grid.lx, grid.ly):
            raise fieldio.FormatError("g_hat and kappa dumps describe different grids")
        if config.normalize:
            area = math.fsum((2.0 * g * grid.hx * grid.hy).ravel())
            g = g / area
            k = k * area
        return Geometry(grid, g, k, ap, config.normalize, "file")

    name = config.preset
    if name == "spinorial-patch":
        from aflab import spinorial
        return spinorial.patch_geometry(config.nx, alpha_prime=ap).geometry
    grid = Grid(config.nx, config.ny, config.lx, config.ly)
    g = flat_metric(grid, config.normalize)
    if name == "flat-zero":
        k = np.zeros(grid.shape)
    elif name == "constant-kappa":
        k = np.full(grid.shape, -abs(config.kappa_level))
    elif name == "synthetic-bump":
        k = bump_kappa(grid, abs(config.bump_amplitude))
    elif name == "consistent-neg":
        # kappa is derived from ghat = base * exp(amplitude * psi). On a torus
        # sum(kappa * w) = 0 (discrete Gauss-Bonnet), so kappa <= 0 forces
        # amplitude = 0; any other value is rejected by the kappa check.
        X, Y = grid.coords()
        psi = np.cos(2 * np.pi * X / grid.lx) * np.cos(2 * np.pi * Y / grid.ly)
        g = g * np.exp(config.bump_amplitude * psi) if config.bump_amplitude else g
        if config.normalize:
            g = g / math.fsum((2.0 * g * grid.hx * grid.hy).ravel())
        k = curvature_of_metric(g, grid)
        pos = float(k.max())
        if pos > KAPPA_TOL:
            raise GeometryError(
                "consistent-neg: curvature of ghat has positive part "
                f"{pos:.3g}; on a periodic chart a self-consistent kappa <= 0 must vanish")
    else:
        raise GeometryError(f"unknown geometry preset {name!r}; expected one of {PRESETS}")
    return Geometry(grid, g, k, ap, config.normalize, name)


def sample(func, grid: Grid, rtol: float = 1e-9) -> np.ndarray:
    """Evaluate ``func(X, Y)`` on the nodes of a periodic grid.

    The function is also evaluated one period to the right and above; data
    that does not repeat (``u = x``, say) is rejected.
    """
    X, Y = grid.coords()
    values = np.asarray(func(X, Y), dtype=float) * np.ones(grid.shape)
    if grid.periodic:
        scale = max(1.0, float(np.max(np.abs(values))))
        shifted_x = np.asarray(func(X + grid.lx, Y), dtype=float)
        shifted_y = np.asarray(func(X, Y + grid.ly), dtype=float)
        if (np.max(np.abs(shifted_x - values)) > rtol * scale
                or np.max(np.abs(shifted_y - values)) > rtol * scale):
            raise ContractError("field is not periodic on the grid")
    return np.ascontiguousarray(values)
