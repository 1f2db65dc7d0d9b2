"""Pure-numpy implementations of the hot stencil kernels.

Every function here has a twin of the same name and signature in
``_ckernels.pyx``; :mod:`aflab.kernels` picks one at import time.
Arrays are C-contiguous float64 of shape ``(ny, nx)`` with periodic wrap.
"""
import math

import numpy as np

BACKEND = "python"


def lap(u, inv4g, ihx2, ihy2):
    out = (np.roll(u, -1, axis=1) - 2.0 * u + np.roll(u, 1, axis=1)) * ihx2
    out += (np.roll(u, -1, axis=0) - 2.0 * u + np.roll(u, 1, axis=0)) * ihy2
    out *= inv4g
    return out


def rhs_ef(ef, kappa, inv4g, hap, ihx2, ihy2):
    u = ef + hap * kappa / ef
    return lap(u, inv4g, ihx2, ihy2) - kappa * u


def _ef_from_u(u, kappa, ap):
    return 0.5 * (u + np.sqrt(u * u - 2.0 * ap * kappa))


def rhs_u(u, kappa, inv4g, hap, ihx2, ihy2):
    ef = _ef_from_u(u, kappa, 2.0 * hap)
    if not np.all(ef > 0.0):
        return None
    coef = 1.0 - hap * kappa / (ef * ef)
    return coef * (lap(u, inv4g, ihx2, ihy2) - kappa * u)


def _rhs(form, y, kappa, inv4g, hap, ihx2, ihy2):
    if form == 0:
        if not np.all(y > 0.0):
            return None
        return rhs_ef(y, kappa, inv4g, hap, ihx2, ihy2)
    return rhs_u(y, kappa, inv4g, hap, ihx2, ihy2)


def euler(form, y, dt, kappa, inv4g, hap, ihx2, ihy2):
    k = _rhs(form, y, kappa, inv4g, hap, ihx2, ihy2)
    if k is None:
        return None
    return y + dt * k


def rk4(form, y, dt, kappa, inv4g, hap, ihx2, ihy2):
    args = (kappa, inv4g, hap, ihx2, ihy2)
    k1 = _rhs(form, y, *args)
    if k1 is None:
        return None
    k2 = _rhs(form, y + (0.5 * dt) * k1, *args)
    if k2 is None:
        return None
    k3 = _rhs(form, y + (0.5 * dt) * k2, *args)
    if k3 is None:
        return None
    k4 = _rhs(form, y + dt * k3, *args)
    if k4 is None:
        return None
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def cfl_coef(ef, kappa, inv4g, hap):
    return float(np.max((1.0 - hap * kappa / (ef * ef)) * inv4g))


def wsum(field, w):
    return math.fsum((field * w).ravel())


def energy(u, kappa, w, hx, hy):
    """Edge-based discrete I(u); ``w`` is the nodal area weight 2*ghat*hx*hy."""
    dx = (np.roll(u, -1, axis=1) - u) / hx
    dy = (np.roll(u, -1, axis=0) - u) / hy
    grad = (0.25 * hx * hy) * (dx * dx + dy * dy)
    pot = 0.5 * kappa * u * u * w
    return math.fsum(np.concatenate([grad.ravel(), pot.ravel()]))
