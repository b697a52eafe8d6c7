"""Large-sigma0 scaling limit of the ATM implied variance.

With ``tau = sigma0 * omega * T / 2`` held fixed as ``sigma0 -> inf`` the
normalized ATM implied variance tends to

    S(tau) = sin(2 lam) / lam - (1 + cos(2 lam)) / 2,   lam / cos(lam) = tau.

``S`` is even and analytic in ``tau`` up to the critical values ``+-i tau0``
of ``lam -> lam / cos(lam)``, where ``y0 tanh y0 = 1`` and
``tau0 = y0 / cosh y0``.  The covered ATM call decays like
``exp(-sigma0 * tau * S(tau) / 4)``; :func:`saddle_asymptote` gives the
leading term including its prefactor.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .payoff_kernel import DEFAULT_QUAD, DomainError, ModelParams, QuadSpec, eval_g_inf
from .series_core import (
    PowerSeries,
    cos_series,
    ps_compose,
    ps_mul,
    ps_reciprocal,
    ps_reversion,
)

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class ScalingState:
    tau: float
    lam: float
    sigma_hat_sq: float
    phi_saddle: float
    C_saddle: float


@dataclass(frozen=True)
class RadiusResult:
    y0: float
    tau0: float
    Tc_omega_sigma0: float

    def T_c(self, sigma0: float, omega: float = 1.0) -> float:
        """Convergence radius of the maturity series at fixed ``sigma0 * omega``."""
        return self.Tc_omega_sigma0 / (omega * sigma0)


# --------------------------------------------------------------------------
# closed form
# --------------------------------------------------------------------------


def solve_lambda(tau: float, tol: float = 1e-15, max_iter: int = 100) -> float:
    """Root in ``[0, pi/2)`` of ``lam - tau cos(lam)``.

    Newton from ``min(tau, pi/2 - 1/tau)`` clipped into the bracket, with a
    bisection step whenever Newton leaves the current bracket.
    """
    if tau < 0 or not math.isfinite(tau):
        raise DomainError("tau must be finite and nonnegative")
    if tau == 0.0:
        return 0.0
    lo, hi = 0.0, HALF_PI
    x = min(tau, HALF_PI - 1.0 / tau)
    x = min(max(x, lo), hi)
    for _ in range(max_iter):
        f = x - tau * math.cos(x)
        if f == 0.0:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        xn = x - f / (1.0 + tau * math.sin(x))
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(xn, 1e-300):
            return xn
        x = xn
    return x


def sigma_hat_sq(tau: float) -> float:
    """Scaling-limit implied variance ``sin(2 lam)/lam - (1 + cos 2 lam)/2``."""
    tau = abs(tau)
    if tau < 1e-4:
        t2 = tau * tau
        return 1.0 - t2 / 3.0 + 4.0 * t2 * t2 / 15.0
    lam = solve_lambda(tau)
    return math.sin(2 * lam) / lam - 0.5 * (1.0 + math.cos(2 * lam))


def phi_saddle(tau: float) -> float:
    """Saddle exponent ``(2 sin lam - lam cos lam) / 4``."""
    lam = solve_lambda(tau)
    return 0.25 * (2.0 * math.sin(lam) - lam * math.cos(lam))


def saddle_constant(lam: float) -> float:
    """``sqrt(pi lam / (sin lam cos^2 lam (1 + lam tan lam)))``."""
    if lam <= 0:
        raise DomainError("the saddle constant needs lam > 0")
    return math.sqrt(math.pi * lam / (math.sin(lam) * math.cos(lam) ** 2 * (1.0 + lam * math.tan(lam))))


def scaling_state(tau: float) -> ScalingState:
    lam = solve_lambda(tau)
    C = saddle_constant(lam) if lam > 0 else math.inf
    return ScalingState(tau, lam, sigma_hat_sq(tau), phi_saddle(tau), C)


# --------------------------------------------------------------------------
# series
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _lambda_of_tau(N: int) -> PowerSeries:
    # tau(lam) = lam / cos(lam)
    tau_of_lam = ps_mul(PowerSeries.identity(N), ps_reciprocal(cos_series(N)))
    return ps_reversion(PowerSeries(tau_of_lam.coeffs, parity="odd"))


@lru_cache(maxsize=None)
def sigma_hat_series(N: int = 24) -> PowerSeries:
    """Exact Taylor coefficients of the scaling-limit variance in ``tau``.

    ``lam(tau)`` comes from reverting ``lam / cos(lam)``; it is composed into
    ``sin(2 lam)/lam - (1 + cos 2 lam)/2``, whose own series has coefficients
    ``(-4)^n (2/(2n+1)! - 1/(2 (2n)!))`` for ``n >= 1``.
    """
    if N < 0:
        raise DomainError("order must be nonnegative")
    if N == 0:
        return PowerSeries([Fraction(1)], parity="even")

    def outer(k: int) -> Fraction:
        if k % 2:
            return Fraction(0)
        n = k // 2
        if n == 0:
            return Fraction(1)
        return Fraction((-4) ** n) * (Fraction(2, math.factorial(2 * n + 1)) - Fraction(1, 2 * math.factorial(2 * n)))

    out = PowerSeries.from_function(outer, N, parity="even")
    return ps_compose(out, _lambda_of_tau(N))


def sigma_hat_series_value(tau: float, N: int = 24) -> float:
    return float(sigma_hat_series(N).to_float()(tau))


def convergence_radius(tol: float = 1e-15) -> RadiusResult:
    """Positive root of ``y tanh y = 1`` and the radius ``y0 / cosh y0``."""
    y = 1.2
    for _ in range(100):
        f = y * math.tanh(y) - 1.0
        d = math.tanh(y) + y / math.cosh(y) ** 2
        step = f / d
        y -= step
        if abs(step) <= tol * y:
            break
    tau0 = y / math.cosh(y)
    return RadiusResult(y0=y, tau0=tau0, Tc_omega_sigma0=2.0 * tau0)


def critical_points(kmax: int = 3) -> list[tuple[complex, complex]]:
    """Critical points ``z`` of ``z / cos z`` with their critical values.

    Returns the imaginary pair ``+-i y0`` and the real solutions of
    ``tan z = -1/z`` with ``|k| <= kmax`` (one in each interval
    ``((k - 1/2) pi, k pi)``).
    """
    rr = convergence_radius()
    pts: list[tuple[complex, complex]] = []
    for z in (1j * rr.y0, -1j * rr.y0):
        pts.append((z, z / cmath.cos(z)))
    for k in range(1, kmax + 1):
        lo, hi = (k - 0.5) * math.pi + 1e-12, k * math.pi
        g = lambda x: math.cos(x) + x * math.sin(x)  # zero iff tan x = -1/x
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if (g(lo) > 0) == (g(mid) > 0):
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        for z in (complex(x), complex(-x)):
            pts.append((z, z / cmath.cos(z)))
    return pts


# --------------------------------------------------------------------------
# large-sigma0 asymptotics
# --------------------------------------------------------------------------


def g_large_sigma_asymptote(u, sigma0: float):
    """Two-term large-sigma0 form of the ATM payoff."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("u must be positive")
    osc = 2.0 * math.sqrt(math.pi) / np.sqrt(sigma0 * np.sinh(2 * u)) * np.cos(0.5 * sigma0 * np.sinh(u) + 0.25 * math.pi)
    out = eval_g_inf(u) - osc
    return float(out) if out.ndim == 0 else out


def saddle_asymptote(tau: float, sigma0: float) -> float:
    """Leading large-sigma0 behavior of the Gaussian-averaged payoff deficit.

    ``(1/(2 sqrt(tau))) * 2 Re[sqrt(i) C sigma0^(-1/2) exp(-sigma0 phi)]``
    with the saddle exponent ``phi`` and constant ``C`` at ``lam(tau)``.
    """
    if not tau > 0:
        raise DomainError("tau must be positive (the saddle degenerates at 0)")
    lam = solve_lambda(tau)
    C = saddle_constant(lam)
    phi = 0.25 * (2.0 * math.sin(lam) - lam * math.cos(lam))
    z = cmath.sqrt(1j) * C * sigma0**-0.5 * math.exp(-sigma0 * phi)
    return (1.0 / (2.0 * math.sqrt(tau))) * 2.0 * z.real


@dataclass(frozen=True)
class ScalingRow:
    sigma0: float
    T: float
    covered_call: float
    exponent: float
    target: float
    rel_err: float
    delta_v: float
    saddle: float


def scaling_limit_check(
    tau: float, sigma0_list: Sequence[float], S0: float = 1.0, quad_spec: QuadSpec = DEFAULT_QUAD
) -> list[ScalingRow]:
    """``-(1/sigma0) log[(S0 - C)/S0]`` along ``T = 2 tau / sigma0`` versus ``tau S(tau) / 4``."""
    from .pricer import VALUE_FACTOR, delta_v_with_error

    if not tau > 0:
        raise DomainError("tau must be positive")
    target = 0.25 * tau * sigma_hat_sq(tau)
    rows = []
    for s0 in sigma0_list:
        T = 2.0 * tau / s0
        dv, _ = delta_v_with_error(T, ModelParams(s0, S0=S0), quad_spec)
        cc = VALUE_FACTOR * S0 * math.exp(-T / 8) * dv
        expo = -math.log(cc / S0) / s0 if cc > 0 else math.inf
        rows.append(ScalingRow(s0, T, cc, expo, target, expo / target - 1.0, dv, saddle_asymptote(tau, s0)))
    return rows


def contour_samples(tau: float, x: Sequence[float]) -> np.ndarray:
    """Zero-phase curve ``y(x) = lam(tau sinh(x) / x)`` of the saddle exponent."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(x == 0.0, 1.0, np.sinh(x) / np.where(x == 0.0, 1.0, x))
    return np.array([solve_lambda(tau * r) for r in np.abs(ratio)])
