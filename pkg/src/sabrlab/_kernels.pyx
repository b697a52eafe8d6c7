# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled payoff quadrature.

Same contract as :mod:`sabrlab._kernels_py`; see there for the substitution
and the panel policy.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sinh, asinh, asin, sqrt, fabs, floor, M_PI

cnp.import_array()



cdef inline double _h(double s, double s_minus, double c, bint unit) nogil:
    cdef double y, z, r2
    if unit:
        return 1.0
    y = sinh(s)
    if s_minus == 0.0:
        z = c * y
    else:
        r2 = sinh(s - s_minus) * sinh(s + s_minus)
        if r2 <= 0.0:
            return 0.0
        z = c * sqrt(r2)
    if fabs(z) < 1e-3:
        if y == 0.0:
            return c
        return (z / y) * (1.0 - z * z / 6.0 + z * z * z * z / 120.0)
    return sin(z) / y


cdef inline double _shc(double x) nogil:
    if x < 1e-4:
        return 1.0 + x * x / 6.0
    return sinh(x) / x


cdef double _panel_sum(double a, double b, double u, double s_minus, double L,
                       double c, bint unit, const double[:] xg, const double[:] wg) nogil:
    cdef Py_ssize_t i, n = xg.shape[0]
    cdef double mid = 0.5 * (a + b), half = 0.5 * (b - a), acc = 0.0
    cdef double t, st, ct, s, x, den
    for i in range(n):
        t = mid + half * xg[i]
        st = sin(t)
        ct = cos(t)
        s = s_minus + L * st * st
        x = 0.5 * L * ct * ct
        den = sqrt(L * sinh(0.5 * (u + s)) * _shc(x))
        acc += wg[i] * 2.0 * L * st * _h(s, s_minus, c, unit) / den
    return half * acc


cdef double _g_one(double u, double sigma0, double s_minus, bint unit,
                   const double[:] xg, const double[:] wg, int refine, int min_panels,
                   double osc_threshold) nogil:
    cdef double L = u - s_minus
    cdef double c = 0.5 * sigma0
    cdef double rmax, theta_prev, theta_next, sh2m, sm, acc = 0.0, grid_next, step
    cdef long m, M = 0
    cdef int j, r
    if L <= 0.0:
        return 0.0
    if not unit:
        rmax = sqrt(sinh(u - s_minus) * sinh(u + s_minus))
        if sigma0 * rmax > osc_threshold:
            M = <long> floor(sigma0 * rmax / (2.0 * M_PI))
    step = 0.5 * M_PI / min_panels
    theta_prev = 0.0
    m = 1
    j = 1
    sh2m = sinh(s_minus) * sinh(s_minus)
    while True:
        grid_next = j * step if j <= min_panels else 1e300
        if m <= M:
            sm = asinh(sqrt(sh2m + (2.0 * M_PI * m / sigma0) ** 2))
            theta_next = asin(sqrt(min(1.0, (sm - s_minus) / L)))
        else:
            theta_next = 1e300
        if grid_next >= 1e300 and theta_next >= 1e300:
            break
        if theta_next < grid_next:
            m += 1
        else:
            theta_next = grid_next
            j += 1
        if theta_next > theta_prev:
            for r in range(refine):
                acc += _panel_sum(theta_prev + (theta_next - theta_prev) * r / refine,
                                  theta_prev + (theta_next - theta_prev) * (r + 1) / refine,
                                  u, s_minus, L, c, unit, xg, wg)
            theta_prev = theta_next
    return sinh(u) * acc


def g_values(double[:] u, double sigma0, double s_minus, bint unit,
             const double[:] xg, const double[:] wg, int refine=1, int min_panels=4, double osc_threshold=50.0):
    """Payoff ``g(u, s_minus)`` (or ``g0`` when ``unit``) at every ``u``."""
    cdef Py_ssize_t k, n = u.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[:] o = out
    with nogil:
        for k in range(n):
            o[k] = _g_one(u[k], sigma0, s_minus, unit, xg, wg, refine, min_panels, osc_threshold)
    return out


def panel_count(double u, double sigma0, double s_minus, bint unit, int min_panels=4,
                double osc_threshold=50.0):
    """Number of base panels used for ``u`` (before refinement)."""
    cdef double rmax
    cdef long M = 0
    if u - s_minus <= 0:
        return 0
    if not unit:
        rmax = sqrt(sinh(u - s_minus) * sinh(u + s_minus))
        if sigma0 * rmax > osc_threshold:
            M = <long> floor(sigma0 * rmax / (2.0 * M_PI))
    return M + min_panels
