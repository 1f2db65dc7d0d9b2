"""The operator ``L(w) = -lap_hat(w) + kappa w`` and its low spectrum.

``L`` is self-adjoint in the omega_hat inner product. The eigen-operator
``-Delta + 2 kappa`` of the large-data theory equals ``2 L``, so its first
eigenvalue is ``2 * lam_1(L)`` and the growth rate is ``eta = -lam_1(L)``.

Discretely ``A = M L`` with ``M = diag(2 ghat hx hy)`` is the symmetric
matrix ``-(hx hy / 2) Delta_h + diag(M kappa)``. The solver does shift-invert
subspace iteration with Rayleigh-Ritz on ``(A, M)``; each shifted solve is a
block preconditioned CG on ``A - sigma M`` with the shift taken from the
Gershgorin-type bound ``sigma = -max|kappa| - 1`` so that ``A - sigma M`` is
positive definite. The preconditioner is the FFT inverse of the
constant-coefficient part of that matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aflab.grid import ContractError, Geometry, dirichlet_form, integrate, lap_hat


class SolverError(RuntimeError):
    pass


def apply_L(w, geom: Geometry) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return -lap_hat(w, geom) + geom.kappa * w


def rayleigh_quotient(w, geom: Geometry) -> float:
    """``(int |dw|^2 + int kappa w^2) / int w^2``, exact for eigenvectors of ``L``."""
    w = np.asarray(w, dtype=float)
    norm2 = integrate(w * w, geom)
    if not norm2 > 0:
        raise ValueError("rayleigh_quotient needs a non-zero field")
    return (dirichlet_form(w, geom) + integrate(geom.kappa * w * w, geom)) / norm2


@dataclass(eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenfunctions: list
    residuals: np.ndarray
    kernel_tol: float
    shift: float
    iterations: int
    kernel_indices: list = field(default_factory=list)
    degenerate: bool = False
    ground_state_positive: bool = True

    @property
    def eta(self) -> float:
        return -float(self.eigenvalues[0])

    @property
    def q1(self) -> np.ndarray:
        return self.eigenfunctions[0]

    @property
    def gap(self) -> float:
        if len(self.eigenvalues) < 2:
            return math.inf
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("index,eigenvalue,residual\n")
            for i, (lam, res) in enumerate(zip(self.eigenvalues, self.residuals)):
                fh.write(f"{i},{lam:.17g},{res:.17g}\n")


class _ShiftedSystem:
    """``B = A - sigma M`` acting on stacks of fields shaped ``(p, ny, nx)``."""

    def __init__(self, geom: Geometry, sigma: float):
        g = geom.grid
        self.geom = geom
        self.c = 0.5 * g.hx * g.hy
        self.ihx2, self.ihy2 = 1.0 / g.hx ** 2, 1.0 / g.hy ** 2
        self.diag = geom.weights * (geom.kappa - sigma)
        kx = 2.0 * np.pi * np.fft.fftfreq(g.nx)
        ky = 2.0 * np.pi * np.fft.fftfreq(g.ny)
        symbol = (4.0 * np.sin(kx / 2) ** 2)[None, :] * self.ihx2 \
            + (4.0 * np.sin(ky / 2) ** 2)[:, None] * self.ihy2
        self.precond_symbol = self.c * symbol + float(np.mean(self.diag))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        lap = (np.roll(x, -1, axis=2) - 2.0 * x + np.roll(x, 1, axis=2)) * self.ihx2
        lap += (np.roll(x, -1, axis=1) - 2.0 * x + np.roll(x, 1, axis=1)) * self.ihy2
        return -self.c * lap + self.diag * x

    def precondition(self, r: np.ndarray) -> np.ndarray:
        return np.fft.ifft2(np.fft.fft2(r) / self.precond_symbol).real

    def solve(self, b: np.ndarray, rtol: float = 1e-13, maxiter: int = 2000) -> np.ndarray:
        x = np.zeros_like(b)
        r = b.copy()
        z = self.precondition(r)
        p = z.copy()
        rz = np.einsum("kij,kij->k", r, z)
        bnorm = np.sqrt(np.einsum("kij,kij->k", b, b))
        bnorm[bnorm == 0] = 1.0
        for _ in range(maxiter):
            q = self.matvec(p)
            alpha = rz / np.einsum("kij,kij->k", p, q)
            x += alpha[:, None, None] * p
            r -= alpha[:, None, None] * q
            rnorm = np.sqrt(np.einsum("kij,kij->k", r, r))
            if np.all(rnorm <= rtol * bnorm):
                return x
            z = self.precondition(r)
            rz_new = np.einsum("kij,kij->k", r, z)
            beta = rz_new / rz
            rz = rz_new
            p = z + beta[:, None, None] * p
        raise SolverError(f"inner CG did not converge (max rel residual {np.max(rnorm / bnorm):.3g})")


def _start_block(geom: Geometry, p: int) -> np.ndarray:
    rng = np.random.default_rng(20170901)
    block = rng.standard_normal((p,) + geom.grid.shape)
    block[0] = 1.0
    return block


def _residual_norms(X, lam, geom):
    out = []
    for x, l in zip(X, lam):
        r = apply_L(x, geom) - l * x
        out.append(math.sqrt(integrate(r * r, geom)))
    return np.array(out)


def eigensolve(geom: Geometry, k: int = 6, kernel_tol: float | None = None,
               tol: float = 1e-9, max_iter: int = 500, guard: int = 6) -> SpectralData:
    """Lowest ``k`` eigenpairs of ``L``, omega_hat-orthonormal.

    Raises :class:`SolverError` when the residuals do not reach ``tol`` within
    ``max_iter`` outer iterations.
    """
    if k < 1:
        raise ContractError("eigensolve needs k >= 1")
    n = geom.grid.nx * geom.grid.ny
    p = min(k + guard, n)
    sigma = -float(np.max(np.abs(geom.kappa))) - 1.0
    system = _ShiftedSystem(geom, sigma)
    w = geom.weights
    X = _start_block(geom, p)
    res = np.full(k, np.inf)
    for it in range(1, max_iter + 1):
        Y = system.solve(w * X)
        # Rayleigh-Ritz on span(Y) for the pencil (A, M)
        AY = np.stack([w * apply_L(y, geom) for y in Y])
        Am = np.einsum("aij,bij->ab", Y, AY)
        Mm = np.einsum("aij,bij->ab", Y, w * Y)
        Am = 0.5 * (Am + Am.T)
        Mm = 0.5 * (Mm + Mm.T)
        Lc = np.linalg.cholesky(Mm)
        Li = np.linalg.inv(Lc)
        theta, V = np.linalg.eigh(Li @ Am @ Li.T)
        C = Li.T @ V
        X = np.einsum("ab,aij->bij", C, Y)
        for j in range(p):
            X[j] /= math.sqrt(integrate(X[j] * X[j], geom))
        res = _residual_norms(X[:k], theta[:k], geom)
        if np.all(res <= tol):
            break
    else:
        raise SolverError(
            f"eigensolve did not converge in {max_iter} iterations; residuals {res.tolist()}")

    lam = np.array(theta[:k], dtype=float)
    funcs = [np.ascontiguousarray(X[j]) for j in range(k)]
    q1 = funcs[0]
    if integrate(q1, geom) < 0:
        funcs[0] = q1 = -q1
    positive = bool(np.all(q1 > 0))
    if kernel_tol is None:
        # relative to the computed spectrum; the floor keeps an exactly-zero
        # mode detectable when it is the only one computed
        kernel_tol = max(1e-8 * float(np.max(np.abs(lam))),
                         1e-12 * max(1.0, float(np.max(np.abs(geom.kappa)))))
    kernel = [i for i, l in enumerate(lam) if abs(l) <= kernel_tol]
    degenerate = bool(k > 1 and lam[1] - lam[0] <= max(tol, 1e-8 * max(1.0, abs(lam[0]))))
    return SpectralData(lam, funcs, res, kernel_tol, sigma, it, kernel, degenerate, positive)
