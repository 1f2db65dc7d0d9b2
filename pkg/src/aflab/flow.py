"""Time integration of the conformal-factor equation

    d/dt e^f = lap_hat(u) - kappa u,      u = e^f + (alpha'/2) kappa e^{-f},

in its conformal (``ef``) form, its ``u`` form

    d/dt u = (1 - (alpha'/2) kappa e^{-2f}) (lap_hat(u) - kappa u),

and the intrinsic metric form (used only to cross-check the other two).
Stepping is explicit (forward Euler or classical RK4) with a CFL step from
the parabolic coefficient ``(1 - (alpha'/2) kappa e^{-2f}) / (4 ghat)``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from aflab import fieldio
from aflab.grid import ContractError, Geometry, grad_sq, lap_hat
from aflab.kernels import backend

BLOWUP_EPS = 1e-4
SCHEMES = ("euler", "rk4")
FORMS = ("ef", "u")
SCHEME_ORDER = {"euler": 1, "rk4": 4}


class ReconstructionError(ValueError):
    """``u <= 0`` where ``kappa = 0``: e^f cannot be recovered from u."""


class Status(str, enum.Enum):
    RUNNING = "Running"
    BLOWN_UP = "BlownUp"
    COMPLETED = "Completed"
    ABORTED = "Aborted"


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    dt: float
    ef: np.ndarray
    step: int = 0
    status: Status = Status.RUNNING
    ef_min0: float = math.nan
    t_sing: float | None = None
    location: tuple | None = None
    reason: str | None = None

    @classmethod
    def initial(cls, ef, geom: Geometry, dt: float = 0.0) -> "FlowState":
        ef = np.ascontiguousarray(ef, dtype=float)
        if ef.shape != geom.grid.shape:
            raise ContractError("initial e^f does not match the grid")
        if not np.all(ef > 0):
            raise ContractError("initial e^f must be positive")
        return cls(0.0, dt, ef, 0, Status.RUNNING, float(ef.min()))

    def sidecar(self) -> dict:
        out = {"t": self.t, "step": self.step, "dt": self.dt, "status": self.status.value}
        if self.t_sing is not None:
            out["t_sing"] = self.t_sing
            out["location"] = list(self.location)
        if self.reason:
            out["reason"] = self.reason
        return out


def write_checkpoint(state: FlowState, geom: Geometry, path) -> None:
    """Field dump of e^f at ``path`` plus a JSON sidecar at ``path + '.json'``."""
    fieldio.write_field(path, geom.grid, state.ef)
    with open(f"{path}.json", "w") as fh:
        json.dump(state.sidecar(), fh, indent=2, sort_keys=True)


def read_checkpoint(path) -> tuple[np.ndarray, dict]:
    _, ef = fieldio.read_field(path)
    with open(f"{path}.json") as fh:
        return ef, json.load(fh)


# --------------------------------------------------------------------------
# pointwise conversions

def u_from_ef(ef, geom: Geometry) -> np.ndarray:
    ef = np.asarray(ef, dtype=float)
    if not np.all(ef > 0):
        raise ContractError("u_from_ef needs e^f > 0")
    return ef + 0.5 * geom.alpha_prime * geom.kappa / ef


def ef_from_u(u, geom: Geometry) -> np.ndarray:
    """``e^f = (u + sqrt(u^2 - 2 alpha' kappa)) / 2``."""
    u = np.asarray(u, dtype=float)
    ef = 0.5 * (u + np.sqrt(u * u - 2.0 * geom.alpha_prime * geom.kappa))
    if not np.all(ef > 0):
        bad = np.argwhere(~(ef > 0))[0]
        raise ReconstructionError(
            f"u <= 0 at a kappa = 0 node {tuple(int(i) for i in bad)}; flow cannot continue")
    return ef


# --------------------------------------------------------------------------
# right-hand sides

def _stencil_args(geom: Geometry):
    g = geom.grid
    return (geom.kappa, geom.inv4g, 0.5 * geom.alpha_prime, 1.0 / g.hx ** 2, 1.0 / g.hy ** 2)


def rhs_conformal(ef, geom: Geometry) -> np.ndarray:
    ef = np.ascontiguousarray(ef, dtype=float)
    if not np.all(ef > 0):
        raise ContractError("rhs_conformal needs e^f > 0")
    return backend.rhs_ef(ef, *_stencil_args(geom))


def rhs_u_form(u, geom: Geometry) -> np.ndarray:
    out = backend.rhs_u(np.ascontiguousarray(u, dtype=float), *_stencil_args(geom))
    if out is None:
        raise ReconstructionError("u <= 0 at a kappa = 0 node")
    return out


def intrinsic_terms(ef, geom: Geometry) -> dict:
    """The quantities the metric form is written in, for ``omega = e^f omega_hat``."""
    ef = np.asarray(ef, dtype=float)
    if not np.all(ef > 0):
        raise ContractError("intrinsic form needs e^f > 0")
    f = np.log(ef)
    einv = 1.0 / ef
    k = geom.kappa
    mu2 = einv                                   # ||mu||^2_omega
    scalar = -einv * lap_hat(f, geom) + einv * k  # R_omega
    dlogmu = einv * grad_sq(f, geom)             # |d log ||mu||^2|^2_omega
    dphi2 = -2.0 * k * einv                      # ||grad phi||^2_omega
    lap_dphi2 = einv * 2.0 * lap_hat(dphi2, geom)  # Delta_omega ||grad phi||^2
    return {"mu2": mu2, "R": scalar, "dlogmu2": dlogmu, "dphi2": dphi2,
            "lap_dphi2": lap_dphi2}


# The metric form and the e^f equation share the same time
# variable (the half-speed rescaling is already absorbed), so the factor is 1.
INTRINSIC_TIME_FACTOR = 1.0


def rhs_intrinsic(ef, geom: Geometry) -> np.ndarray:
    """``d/dt e^f`` assembled from the metric form of the flow.

    The curvature-correction term enters as ``-(alpha'/8)(Delta ||grad phi||^2
    + ||grad phi||^4)``; with the opposite sign on the Laplacian term the
    metric form would not reduce to the e^f equation (and would lose
    parabolicity where ``(alpha'/2)|kappa| e^{-2f} > 1``).
    """
    q = intrinsic_terms(ef, geom)
    ap = geom.alpha_prime
    log_rate = (1.0 / q["mu2"]) * (-q["R"] + q["dlogmu2"]) \
        - (ap / 8.0) * (q["lap_dphi2"] + q["dphi2"] ** 2)
    return INTRINSIC_TIME_FACTOR * np.asarray(ef) * log_rate


# --------------------------------------------------------------------------
# stepping

def cfl_dt(ef, geom: Geometry, safety: float = 1.0) -> float:
    """Explicit-Euler bound ``safety * h_min^2 / (4 a_max)`` for the 5-point stencil."""
    if not 0 < safety <= 1:
        raise ContractError("cfl safety must lie in (0, 1]")
    ef = np.ascontiguousarray(ef, dtype=float)
    a_max = backend.cfl_coef(ef, geom.kappa, geom.inv4g, 0.5 * geom.alpha_prime)
    h = min(geom.grid.hx, geom.grid.hy)
    return safety * h * h / (4.0 * a_max)


def _advance(form, y, dt, scheme, args):
    kern = backend.rk4 if scheme == "rk4" else backend.euler
    return kern(0 if form == "ef" else 1, y, dt, *args)


def _to_ef(form, y, geom):
    if form == "ef":
        return y
    return 0.5 * (y + np.sqrt(y * y - 2.0 * geom.alpha_prime * geom.kappa))


def step(state: FlowState, geom: Geometry, scheme: str = "rk4", safety: float = 0.9,
         blowup_eps: float = BLOWUP_EPS, dt: float | None = None,
         t_end: float | None = None, form: str = "ef") -> FlowState:
    """One explicit step plus event checks; returns a new state.

    A step that drives ``min e^f`` to ``blowup_eps * (initial min e^f)`` or
    makes reconstruction impossible ends in ``BlownUp``; the crossing time
    inside the step is located by bisection on the sub-step length.
    """
    if state.status is not Status.RUNNING:
        raise ContractError(f"cannot step a state with status {state.status.value}")
    if scheme not in SCHEMES:
        raise ContractError(f"unknown scheme {scheme!r}")
    if form not in FORMS:
        raise ContractError(f"unknown form {form!r}")
    if dt is None:
        dt = cfl_dt(state.ef, geom, safety)
    if t_end is not None and state.t + dt * (1.0 + 1e-9) >= t_end:
        # land on t_end instead of leaving a sliver step behind
        dt = t_end - state.t
    if not dt > 0:
        raise ContractError("time step must be positive")
    args = _stencil_args(geom)
    y0 = state.ef if form == "ef" else u_from_ef(state.ef, geom)
    threshold = blowup_eps * state.ef_min0

    def trial(h):
        y = _advance(form, y0, h, scheme, args)
        if y is None:
            return None, False
        ef = _to_ef(form, y, geom)
        if not np.all(np.isfinite(ef)):
            return ef, None
        return ef, bool(ef.min() > threshold)

    ef_new, ok = trial(dt)
    if ok is None:
        return replace(state, t=state.t + dt, dt=dt, step=state.step + 1,
                       status=Status.ABORTED, reason="non-finite values in e^f")
    if ok:
        status = Status.RUNNING
        if t_end is not None and state.t + dt >= t_end:
            status = Status.COMPLETED
        t_new = t_end if status is Status.COMPLETED else state.t + dt
        return replace(state, t=t_new, dt=dt, ef=ef_new, step=state.step + 1, status=status)

    lo, hi = 0.0, 1.0
    ef_lo = state.ef
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ef_mid, ok_mid = trial(mid * dt)
        if ok_mid:
            lo, ef_lo = mid, ef_mid
        else:
            hi = mid
        if (hi - lo) * dt <= 1e-14 * max(1.0, state.t):
            break
    t_sing = state.t + hi * dt
    j, i = np.unravel_index(int(np.argmin(ef_lo)), ef_lo.shape)
    X, Y = geom.grid.coords()
    return replace(state, t=t_sing, dt=hi * dt, ef=np.ascontiguousarray(ef_lo),
                   step=state.step + 1, status=Status.BLOWN_UP, t_sing=t_sing,
                   location=(int(j), int(i), float(X[j, i]), float(Y[j, i])))


def evolve_u_form(state: FlowState, geom: Geometry, scheme: str = "rk4", **kw) -> FlowState:
    """Same as :func:`step` but advancing ``u`` and reconstructing e^f."""
    return step(state, geom, scheme, form="u", **kw)


def integrate_flow(ef0, geom: Geometry, t_end: float, scheme: str = "rk4",
                   safety: float = 0.9, dt: float | None = None, form: str = "ef",
                   max_steps: int = 10_000_000, blowup_eps: float = BLOWUP_EPS,
                   callback=None) -> FlowState:
    """Step from ``ef0`` until ``t_end``, blow-up or ``max_steps``."""
    state = FlowState.initial(ef0, geom)
    if callback is not None:
        callback(state)
    while state.status is Status.RUNNING:
        if state.step >= max_steps:
            return replace(state, status=Status.ABORTED, reason="max_steps reached")
        state = step(state, geom, scheme, safety, blowup_eps, dt, t_end, form)
        if callback is not None:
            callback(state)
    return state
