"""Derived quantities along a run: energy and dissipation, modal balance,
mass and the blow-up envelope, growth-rate fits, the normalized profile and
a curvature surrogate. Series derivatives are centered finite differences of
the logged samples, never extra right-hand-side evaluations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aflab.grid import ContractError, Geometry, grad_sq, integrate, inner, l2_norm, lap_hat
from aflab.kernels import backend

_NAN = float("nan")


class DomainError(ValueError):
    pass


# --------------------------------------------------------------------------
# energy

def energy(u, geom: Geometry) -> float:
    """``I(u) = 1/2 int |du|^2 + 1/2 int kappa u^2`` in its edge-based discrete form."""
    g = geom.grid
    return backend.energy(np.ascontiguousarray(u, dtype=float), geom.kappa,
                          geom.weights, g.hx, g.hy)


def dissipation(u, ef, geom: Geometry) -> float:
    u = np.asarray(u, dtype=float)
    ef = np.asarray(ef, dtype=float)
    a = 1.0 - 0.5 * geom.alpha_prime * geom.kappa / (ef * ef)
    r = lap_hat(u, geom) - geom.kappa * u
    return -integrate(a * r * r, geom)


# --------------------------------------------------------------------------
# series derivatives

def fornberg_weights(x0: float, xs, m: int = 1) -> np.ndarray:
    """Weights of the ``m``-th derivative at ``x0`` from nodes ``xs`` (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def series_derivative(t, y, order: int = 2) -> np.ndarray:
    """Centered ``(order + 1)``-point derivative; the first and last
    ``order // 2`` entries are NaN."""
    if order not in (2, 4):
        raise ContractError("series derivative order must be 2 or 4")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    h = order // 2
    out = np.full(len(t), _NAN)
    for i in range(h, len(t) - h):
        w = fornberg_weights(t[i], t[i - h:i + h + 1])
        out[i] = float(np.dot(w, y[i - h:i + h + 1]))
    return out


# --------------------------------------------------------------------------
# modal balance and mass

def modal_values(ef, u, spectral, geom: Geometry, modes) -> list[tuple[int, float, float]]:
    """``(index, <e^f, q>, <u, q>)`` for each tracked mode."""
    return [(j, inner(ef, spectral.eigenfunctions[j], geom),
             inner(u, spectral.eigenfunctions[j], geom)) for j in modes]


def modal_balance(t, m, uq, eigenvalue: float, order: int = 2) -> np.ndarray:
    """``|dm/dt + lambda <u, q>|`` along a logged series (NaN at the ends)."""
    return np.abs(series_derivative(t, m, order) + eigenvalue * np.asarray(uq, dtype=float))


def mass(ef, geom: Geometry) -> float:
    return integrate(ef, geom)


def mass_rate(ef, geom: Geometry) -> float:
    """``int (-kappa) e^f - (alpha'/2) int kappa^2 / e^f``."""
    ef = np.asarray(ef, dtype=float)
    k = geom.kappa
    return integrate(-k * ef, geom) - 0.5 * geom.alpha_prime * integrate(k * k / ef, geom)


def mass_derivative_identity(t, A, rates, order: int = 2) -> tuple[np.ndarray, np.ndarray]:
    return series_derivative(t, A, order), np.asarray(rates, dtype=float)


# --------------------------------------------------------------------------
# blow-up envelope

@dataclass(frozen=True)
class BlowupBound:
    applies: bool
    P: float
    E: float
    K: float
    t_max: float
    t_max_V: float | None = None

    def envelope(self, t) -> np.ndarray:
        """Upper bound for ``K A(t)^2``."""
        return self.P - np.exp(2.0 * self.K * np.asarray(t, dtype=float)) * self.E

    def holds(self, t, A, inflation: float = 0.01) -> np.ndarray:
        """``K A^2 <= (1 + inflation) * envelope`` elementwise."""
        A = np.asarray(A, dtype=float)
        return self.K * A * A <= (1.0 + inflation) * self.envelope(t)


def blowup_bound(A0: float, geom: Geometry, V_norm: float | None = None) -> BlowupBound:
    K = geom.K
    P = 0.5 * geom.alpha_prime * geom.kappa_l1 ** 2
    if not geom.kappa_l1 > 0 or not K > 0:
        return BlowupBound(False, P, _NAN, K, math.inf)
    E = P - K * A0 * A0
    if not E > 0:
        return BlowupBound(False, P, E, K, math.inf)
    t_max = math.log(P / E) / (2.0 * K)
    t_v = None
    if V_norm is not None:
        t_v = (math.log(P - K * V_norm ** 2) - math.log(E)) / (2.0 * K)
    return BlowupBound(True, P, E, K, t_max, t_v)


def kernel_functions(spectral, geom: Geometry) -> np.ndarray:
    """Near-kernel modes scaled so that their pointwise vector norm is at most 1."""
    idx = spectral.kernel_indices
    if not idx:
        return np.zeros((0,) + geom.grid.shape)
    Q = np.stack([spectral.eigenfunctions[j] for j in idx])
    return Q / float(np.sqrt((Q * Q).sum(axis=0)).max())


def kernel_vector(ef, phis, geom: Geometry) -> np.ndarray:
    """``V`` with components ``int e^f phi_k``; satisfies ``|V| <= int e^f``."""
    return np.array([inner(ef, p, geom) for p in phis])


# --------------------------------------------------------------------------
# growth, profile, curvature

def growth_fit(t, A, window: float = 0.5, min_samples: int = 10) -> float:
    """Least-squares slope of ``log A`` over the trailing ``window`` fraction."""
    t = np.asarray(t, dtype=float)
    A = np.asarray(A, dtype=float)
    if len(t) < min_samples:
        raise ContractError(f"growth_fit needs at least {min_samples} samples")
    if np.any(~(A > 0)):
        raise DomainError("growth_fit needs positive samples")
    if not 0 < window <= 1:
        raise ContractError("window must lie in (0, 1]")
    start = len(t) - max(min_samples, int(math.ceil(window * len(t))))
    tt, ly = t[start:], np.log(A[start:])
    tc = tt - tt.mean()
    den = float(np.dot(tc, tc))
    if den == 0:
        raise ContractError("growth_fit needs distinct sample times")
    return float(np.dot(tc, ly - ly.mean()) / den)


def decay_fit(t, y, window: float = 0.5, min_samples: int = 10) -> float:
    """Decay exponent ``gamma`` of ``y ~ C e^{-gamma t}``."""
    return -growth_fit(t, y, window, min_samples)


def normalized_v(u, geom: Geometry) -> np.ndarray:
    nrm = l2_norm(u, geom)
    if not nrm > 0:
        raise DomainError("normalized_v of a zero field")
    return np.asarray(u, dtype=float) / nrm


def eigen_distance(v, spectral, geom: Geometry | None = None) -> float:
    """``max |v - q1|`` after aligning the sign of ``v`` with ``q1``."""
    v = np.asarray(v, dtype=float)
    q1 = spectral.q1
    s = float(np.sum(v * q1)) if geom is None else inner(v, q1, geom)
    if s < 0:
        v = -v
    return float(np.abs(v - q1).max())


def ef_distance(ef, spectral, geom: Geometry) -> float:
    """``max |e^f / ||e^f|| - q1|``."""
    return eigen_distance(normalized_v(ef, geom), spectral, geom)


def harnack_ratio(v) -> float:
    v = np.asarray(v, dtype=float)
    lo = float(v.min())
    if lo <= 0:
        return math.inf
    return float(v.max()) / lo


def curvature_proxy(ef, geom: Geometry) -> float:
    ef = np.asarray(ef, dtype=float)
    if not np.all(ef > 0):
        raise ContractError("curvature_proxy needs e^f > 0")
    f = np.log(ef)
    df = np.sqrt(grad_sq(f, geom))
    return float(np.max((1.0 + df + np.abs(2.0 * lap_hat(f, geom))) / (ef * ef)))


# --------------------------------------------------------------------------
# records

@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    A: float
    I_u: float
    dissipation: float
    min_ef: float
    max_ef: float
    sup_einv_f: float
    v_dist: float
    harnack_ratio: float
    curv_proxy: float
    eta_fit: float = _NAN
    modal: list = field(default_factory=list)  # (index, m, <u,q>, residual)
    ef_dist: float = _NAN
    min_u: float = _NAN
    max_u: float = _NAN
    mass_rate: float = _NAN
    V: tuple = ()


CSV_COLUMNS = ("t", "dt", "A", "I_u", "dissipation", "min_ef", "max_ef", "sup_einv_f",
               "v_dist", "harnack_ratio", "eta_fit", "curv_proxy")


def snapshot(t: float, dt: float, ef, u, geom: Geometry, spectral=None, modes=(),
             phis=None) -> DiagnosticsRecord:
    ef = np.asarray(ef, dtype=float)
    u = np.asarray(u, dtype=float)
    if spectral is not None:
        try:
            v = normalized_v(u, geom)
            vd, hr = eigen_distance(v, spectral, geom), harnack_ratio(v)
        except DomainError:
            vd, hr = math.inf, math.inf
        efd = ef_distance(ef, spectral, geom)
        modal = [(j, m, uq, _NAN) for j, m, uq in modal_values(ef, u, spectral, geom, modes)]
    else:
        vd = hr = efd = _NAN
        modal = []
    V = tuple(kernel_vector(ef, phis, geom)) if phis is not None and len(phis) else ()
    return DiagnosticsRecord(
        t=t, dt=dt, A=mass(ef, geom), I_u=energy(u, geom),
        dissipation=dissipation(u, ef, geom), min_ef=float(ef.min()),
        max_ef=float(ef.max()), sup_einv_f=float(1.0 / ef.min()), v_dist=vd,
        harnack_ratio=hr, curv_proxy=curvature_proxy(ef, geom), modal=modal,
        ef_dist=efd, min_u=float(u.min()), max_u=float(u.max()),
        mass_rate=mass_rate(ef, geom), V=V)


def finalize_records(records, spectral=None, order: int = 2, fit_window: float = 0.5,
                     min_fit_samples: int = 10) -> None:
    """Fill the running ``eta_fit`` and the modal balance residuals in place."""
    t = np.array([r.t for r in records])
    A = np.array([r.A for r in records])
    for i, rec in enumerate(records):
        if i + 1 >= min_fit_samples and np.all(A[:i + 1] > 0):
            rec.eta_fit = growth_fit(t[:i + 1], A[:i + 1], fit_window, min_fit_samples)
    if spectral is None or not records or not records[0].modal:
        return
    for k, (j, _, _, _) in enumerate(records[0].modal):
        m = [r.modal[k][1] for r in records]
        uq = [r.modal[k][2] for r in records]
        res = modal_balance(t, m, uq, float(spectral.eigenvalues[j]), order)
        for rec, rv in zip(records, res):
            jj, mm, uu, _ = rec.modal[k]
            rec.modal[k] = (jj, mm, uu, float(rv))


def _fmt(x) -> str:
    return "%.17g" % x


def write_csv(records, path) -> None:
    modes = [m[0] for m in records[0].modal] if records else []
    header = list(CSV_COLUMNS)
    for j in modes:
        header += [f"m_{j}", f"residual_{j}"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in records:
            row = [getattr(r, c) for c in CSV_COLUMNS]
            for _, m, _, res in r.modal:
                row += [m, res]
            fh.write(",".join(_fmt(x) for x in row) + "\n")
