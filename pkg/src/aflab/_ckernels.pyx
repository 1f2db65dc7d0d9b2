# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels; see ``_pykernels.py`` for the reference semantics."""
import numpy as np

from libc.math cimport sqrt, fabs

BACKEND = "cython"


cdef void _lap(const double[:, ::1] u, const double[:, ::1] inv4g,
               double ihx2, double ihy2, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1]
    cdef Py_ssize_t i, j, jm, jp, im, ip
    cdef double c
    for j in range(ny):
        jm = j - 1 if j > 0 else ny - 1
        jp = j + 1 if j < ny - 1 else 0
        for i in range(nx):
            im = i - 1 if i > 0 else nx - 1
            ip = i + 1 if i < nx - 1 else 0
            c = u[j, i]
            out[j, i] = ((u[j, ip] - 2.0 * c + u[j, im]) * ihx2
                         + (u[jp, i] - 2.0 * c + u[jm, i]) * ihy2) * inv4g[j, i]


cdef int _rhs(int form, const double[:, ::1] y, const double[:, ::1] kappa,
              const double[:, ::1] inv4g, double hap, double ihx2, double ihy2,
              double[:, ::1] uscr, double[:, ::1] coef,
              double[:, ::1] out) noexcept nogil:
    """Fill ``out`` with the time derivative; return 0, or 1 if e^f <= 0 somewhere."""
    cdef Py_ssize_t ny = y.shape[0], nx = y.shape[1]
    cdef Py_ssize_t i, j
    cdef double e, k, v
    cdef double ap = 2.0 * hap
    if form == 0:
        for j in range(ny):
            for i in range(nx):
                e = y[j, i]
                if not (e > 0.0):
                    return 1
                uscr[j, i] = e + hap * kappa[j, i] / e
        _lap(uscr, inv4g, ihx2, ihy2, out)
        for j in range(ny):
            for i in range(nx):
                out[j, i] = out[j, i] - kappa[j, i] * uscr[j, i]
    else:
        for j in range(ny):
            for i in range(nx):
                v = y[j, i]
                k = kappa[j, i]
                e = 0.5 * (v + sqrt(v * v - 2.0 * ap * k))
                if not (e > 0.0):
                    return 1
                coef[j, i] = 1.0 - hap * k / (e * e)
        _lap(y, inv4g, ihx2, ihy2, out)
        for j in range(ny):
            for i in range(nx):
                out[j, i] = coef[j, i] * (out[j, i] - kappa[j, i] * y[j, i])
    return 0


def lap(const double[:, ::1] u, const double[:, ::1] inv4g, double ihx2, double ihy2):
    out = np.empty((u.shape[0], u.shape[1]))
    cdef double[:, ::1] o = out
    with nogil:
        _lap(u, inv4g, ihx2, ihy2, o)
    return out


def rhs_ef(const double[:, ::1] ef, const double[:, ::1] kappa,
           const double[:, ::1] inv4g, double hap, double ihx2, double ihy2):
    out = np.empty((ef.shape[0], ef.shape[1]))
    uscr = np.empty_like(out)
    cdef double[:, ::1] o = out, us = uscr
    cdef int bad
    with nogil:
        bad = _rhs(0, ef, kappa, inv4g, hap, ihx2, ihy2, us, us, o)
    if bad:
        # non-positive e^f: follow the numpy semantics (inf/nan propagate)
        e = np.asarray(ef)
        k = np.asarray(kappa)
        u = e + hap * k / e
        return lap(u, inv4g, ihx2, ihy2) - k * u
    return out


def rhs_u(const double[:, ::1] u, const double[:, ::1] kappa,
          const double[:, ::1] inv4g, double hap, double ihx2, double ihy2):
    out = np.empty((u.shape[0], u.shape[1]))
    coef = np.empty_like(out)
    cdef double[:, ::1] o = out, c = coef
    cdef int bad
    with nogil:
        bad = _rhs(1, u, kappa, inv4g, hap, ihx2, ihy2, c, c, o)
    if bad:
        return None
    return out


def euler(int form, const double[:, ::1] y, double dt, const double[:, ::1] kappa,
          const double[:, ::1] inv4g, double hap, double ihx2, double ihy2):
    cdef Py_ssize_t ny = y.shape[0], nx = y.shape[1], i, j
    res = np.empty((ny, nx))
    scr = np.empty((ny, nx))
    cdef double[:, ::1] r = res, s = scr
    cdef int bad
    with nogil:
        bad = _rhs(form, y, kappa, inv4g, hap, ihx2, ihy2, s, s, r)
        if not bad:
            for j in range(ny):
                for i in range(nx):
                    r[j, i] = y[j, i] + dt * r[j, i]
    if bad:
        return None
    return res


def rk4(int form, const double[:, ::1] y, double dt, const double[:, ::1] kappa,
        const double[:, ::1] inv4g, double hap, double ihx2, double ihy2):
    cdef Py_ssize_t ny = y.shape[0], nx = y.shape[1], i, j
    res = np.empty((ny, nx))
    buf = np.empty((4, ny, nx))
    cdef double[:, ::1] r = res
    cdef double[:, :, ::1] b = buf
    cdef double[:, ::1] k = b[0], stage = b[1], acc = b[2], scr = b[3]
    cdef int bad = 0
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    with nogil:
        bad = _rhs(form, y, kappa, inv4g, hap, ihx2, ihy2, scr, scr, k)
        if not bad:
            for j in range(ny):
                for i in range(nx):
                    acc[j, i] = k[j, i]
                    stage[j, i] = y[j, i] + h2 * k[j, i]
            bad = _rhs(form, stage, kappa, inv4g, hap, ihx2, ihy2, scr, scr, k)
        if not bad:
            for j in range(ny):
                for i in range(nx):
                    acc[j, i] = acc[j, i] + 2.0 * k[j, i]
                    stage[j, i] = y[j, i] + h2 * k[j, i]
            bad = _rhs(form, stage, kappa, inv4g, hap, ihx2, ihy2, scr, scr, k)
        if not bad:
            for j in range(ny):
                for i in range(nx):
                    acc[j, i] = acc[j, i] + 2.0 * k[j, i]
                    stage[j, i] = y[j, i] + dt * k[j, i]
            bad = _rhs(form, stage, kappa, inv4g, hap, ihx2, ihy2, scr, scr, k)
        if not bad:
            for j in range(ny):
                for i in range(nx):
                    r[j, i] = y[j, i] + h6 * (acc[j, i] + k[j, i])
    if bad:
        return None
    return res


def cfl_coef(const double[:, ::1] ef, const double[:, ::1] kappa,
             const double[:, ::1] inv4g, double hap):
    cdef Py_ssize_t ny = ef.shape[0], nx = ef.shape[1], i, j
    cdef double m = -1.0, c, e
    with nogil:
        for j in range(ny):
            for i in range(nx):
                e = ef[j, i]
                c = (1.0 - hap * kappa[j, i] / (e * e)) * inv4g[j, i]
                if c > m or c != c:
                    m = c
    return m


cdef inline void _neumaier(double x, double* s, double* comp) noexcept nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        comp[0] += (s[0] - t) + x
    else:
        comp[0] += (x - t) + s[0]
    s[0] = t


def wsum(const double[:, ::1] field, const double[:, ::1] w):
    cdef Py_ssize_t ny = field.shape[0], nx = field.shape[1], i, j
    cdef double s = 0.0, comp = 0.0
    with nogil:
        for j in range(ny):
            for i in range(nx):
                _neumaier(field[j, i] * w[j, i], &s, &comp)
    return s + comp


def energy(const double[:, ::1] u, const double[:, ::1] kappa,
           const double[:, ::1] w, double hx, double hy):
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1], i, j, ip, jp
    cdef double s = 0.0, comp = 0.0, dx, dy, c
    cdef double q = 0.25 * hx * hy
    with nogil:
        for j in range(ny):
            jp = j + 1 if j < ny - 1 else 0
            for i in range(nx):
                ip = i + 1 if i < nx - 1 else 0
                c = u[j, i]
                dx = (u[j, ip] - c) / hx
                dy = (u[jp, i] - c) / hy
                _neumaier(q * (dx * dx + dy * dy), &s, &comp)
        for j in range(ny):
            for i in range(nx):
                c = u[j, i]
                _neumaier(0.5 * kappa[j, i] * c * c * w[j, i], &s, &comp)
    return s + comp
