"""Pure-numpy payoff quadrature (fallback for the compiled kernel).

The payoff integral

    g(u) = sinh(u) * int_{s_-}^{u} h(s) / sqrt(cosh u - cosh s) ds

is computed after the substitution ``s = s_- + L sin(theta)**2`` with
``L = u - s_-`` and ``theta`` in ``[0, pi/2]``.  Using

    cosh u - cosh s = 2 sinh((u+s)/2) sinh(L cos(theta)**2 / 2)

the inverse square root at ``s = u`` cancels against the Jacobian and the
integrand becomes smooth on the closed interval.  At ``s = s_-`` the factor
``sin(theta)`` keeps it regular as well.

Panels: ``min_panels`` equal pieces of ``[0, pi/2]``, merged with the
``theta`` images of the zeros of the sine factor once the number of
oscillations is large (``sigma0 * R(u) > 50``).  Each panel is split into
``refine`` equal pieces and integrated by Gauss-Legendre.
"""

from __future__ import annotations

import math

import numpy as np

OSC_THRESHOLD = 50.0


def _h(s: np.ndarray, s_minus: float, c: float, unit: bool) -> np.ndarray:
    if unit:
        return np.ones_like(s)
    y = np.sinh(s)
    if s_minus == 0.0:
        z = c * y
    else:
        r2 = np.sinh(s - s_minus) * np.sinh(s + s_minus)
        z = c * np.sqrt(np.maximum(r2, 0.0))
    small = np.abs(z) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.sin(z) / y
        series = (z / y) * (1.0 - z * z / 6.0 + z**4 / 120.0)
    out = np.where(small, series, direct)
    out = np.where(y == 0.0, c if s_minus == 0.0 else 0.0, out)
    return out


def _shc(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x < 1e-4, 1.0 + x * x / 6.0, np.sinh(x) / np.where(x == 0.0, 1.0, x))


def _edges(u: float, sigma0: float, s_minus: float, unit: bool, min_panels: int, osc_threshold: float) -> np.ndarray:
    L = u - s_minus
    grid = np.linspace(0.0, 0.5 * math.pi, min_panels + 1)
    if unit:
        return grid
    rmax = math.sqrt(math.sinh(u - s_minus) * math.sinh(u + s_minus))
    if sigma0 * rmax <= osc_threshold:
        return grid
    M = int(math.floor(sigma0 * rmax / (2.0 * math.pi)))
    m = np.arange(1, M + 1, dtype=float)
    sm = np.arcsinh(np.sqrt(math.sinh(s_minus) ** 2 + (2.0 * math.pi * m / sigma0) ** 2))
    theta = np.arcsin(np.sqrt(np.minimum(1.0, (sm - s_minus) / L)))
    return np.unique(np.concatenate([grid, theta]))


def _g_one(u, sigma0, s_minus, unit, xg, wg, refine, min_panels, osc_threshold) -> float:
    L = u - s_minus
    if L <= 0.0:
        return 0.0
    e = _edges(u, sigma0, s_minus, unit, min_panels, osc_threshold)
    frac = np.arange(refine + 1) / refine
    e = (e[:-1, None] + np.diff(e)[:, None] * frac[None, :])
    a = e[:, :-1].ravel()
    b = e[:, 1:].ravel()
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    t = mid[:, None] + half[:, None] * xg[None, :]
    st = np.sin(t)
    ct = np.cos(t)
    s = s_minus + L * st * st
    x = 0.5 * L * ct * ct
    den = np.sqrt(L * np.sinh(0.5 * (u + s)) * _shc(x))
    f = 2.0 * L * st * _h(s, s_minus, 0.5 * sigma0, unit) / den
    return math.sinh(u) * float(np.sum(half * (f @ wg)))


def g_values(u, sigma0, s_minus, unit, xg, wg, refine=1, min_panels=4, osc_threshold=OSC_THRESHOLD) -> np.ndarray:
    """Payoff ``g(u, s_minus)`` (or ``g0`` when ``unit``) at every ``u``."""
    u = np.asarray(u, dtype=float)
    xg = np.asarray(xg, dtype=float)
    wg = np.asarray(wg, dtype=float)
    return np.array(
        [_g_one(float(v), float(sigma0), float(s_minus), bool(unit), xg, wg, int(refine), int(min_panels), float(osc_threshold))
         for v in u]
    )


def panel_count(u, sigma0, s_minus, unit, min_panels=4, osc_threshold=OSC_THRESHOLD) -> int:
    """Number of base panels used for ``u`` (before refinement)."""
    if u - s_minus <= 0:
        return 0
    return len(_edges(u, sigma0, s_minus, unit, min_panels, osc_threshold)) - 1
