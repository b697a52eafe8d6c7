"""Option values from the single-integral kernel representation.

The ATM time value is

    V = 2 S0 e^(-T/8) / (pi^(3/2) sqrt(T)) * int_0^inf e^(-u^2/2T) g(u) du,

which this module evaluates as ``(2 sqrt2 / pi) S0 e^(-T/8) * N[g]`` with the
normalized Gaussian moment ``N[g] = int e^(-u^2/2T) g(u) du / sqrt(2 pi T)``.
The outer integral uses Gauss-Legendre panels on the Gaussian scale, split at
the oscillation period of ``g`` when ``sigma0`` is large.  The cutoff is the
smallest ``u`` for which the analytic tail bound (from
``g <= sqrt2 sigma0 u cosh(u/2)``) drops below a fixed floor; the bound is
added to the error estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, ndtr

from .payoff_kernel import (
    DEFAULT_QUAD,
    SQRT2,
    ConvergenceError,
    DomainError,
    ModelParams,
    QuadSpec,
    eval_g0,
    eval_g_inf,
    eval_g_with_error,
    mckean_tail,
)
from .series_engine import MAX_PAYOFF_ORDER, derive_payoff_series, vexp_terms

OUTER_GL = 24
TAIL_FLOOR = 1e-30
VALUE_FACTOR = 2.0 * SQRT2 / math.pi

Payoff = Literal["sabr", "unit", "inf"]


class CancellationWarning(RuntimeWarning):
    """The error estimate of a small difference exceeds the requested tolerance."""


@dataclass(frozen=True)
class PriceResult:
    value: float
    abs_err_est: float
    method: str

    def __post_init__(self):
        if self.abs_err_est < 0:
            raise ValueError("abs_err_est must be nonnegative")


@dataclass(frozen=True)
class ImpliedVolResult:
    sigma_bs: float
    iterations: int
    residual: float


# --------------------------------------------------------------------------
# outer Gaussian integral
# --------------------------------------------------------------------------


def tail_bound(T: float, U: float, sigma0: float) -> float:
    """Bound on ``int_U^inf e^(-u^2/2T) (|g| + g_inf) du / sqrt(2 pi T)``.

    Uses ``|g| <= sqrt2 sigma0 u e^(u/2)`` and ``g_inf <= (pi/sqrt2) e^(u/2)``.
    """
    z = (U - 0.5 * T) / math.sqrt(T)
    gauss = math.exp(T / 8)
    first = SQRT2 * sigma0 * gauss * (
        T * math.exp(-0.5 * z * z) + 0.5 * T * math.sqrt(2 * math.pi * T) * float(ndtr(-z))
    )
    second = (math.pi / SQRT2) * gauss * math.sqrt(2 * math.pi * T) * float(ndtr(-z))
    return (first + second) / math.sqrt(2 * math.pi * T)


def choose_cutoff(T: float, sigma0: float, start: float = 0.0, floor: float = TAIL_FLOOR) -> tuple[float, float]:
    """Cutoff ``U >= start + 8 sqrt(T)`` with tail bound below ``floor``."""
    U = start + 8.0 * math.sqrt(T)
    step = 0.5 * math.sqrt(T)
    b = tail_bound(T, U, sigma0)
    while b > floor and U < 600.0:
        U += step
        b = tail_bound(T, U, sigma0)
    return U, b


def _outer_edges(lo: float, hi: float, T: float, osc_sigma0: float | None, osc_hi: float, density: int) -> np.ndarray:
    n = max(4, int(math.ceil((hi - lo) / math.sqrt(T) * density / 2)))
    edges = [np.linspace(lo, hi, n + 1)]
    if osc_sigma0 is not None and osc_hi > lo:
        amp = osc_sigma0 * math.sinh(osc_hi)
        if amp > 50.0:
            m = np.arange(1, int(amp / (2 * math.pi)) + 1, dtype=float)
            u = np.arcsinh(2 * math.pi * m / osc_sigma0)
            edges.append(u[(u > lo) & (u < min(hi, osc_hi))])
    return np.unique(np.concatenate(edges))


def _oscillation_reach(T: float, sigma0: float, lo: float, hi: float, floor: float) -> float:
    """Largest ``u`` where the oscillating part of ``g`` still matters.

    That part has amplitude about ``2 sqrt(pi) / sqrt(sigma0 sinh 2u)``;
    beyond the returned point its Gaussian-weighted size is below ``floor``.
    """
    u = np.linspace(max(lo, 1e-6), hi, 4001)
    with np.errstate(over="ignore"):
        size = np.exp(-0.5 * u * u / T) / math.sqrt(2 * math.pi * T) * 4.0 / np.sqrt(sigma0 * np.sinh(2 * u))
    keep = u[size > floor]
    return float(keep[-1]) if keep.size else lo


def _panel_nodes(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def gaussian_moment(
    T: float,
    payoff: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    sigma0: float,
    quad_spec: QuadSpec = DEFAULT_QUAD,
    lo: float = 0.0,
    tail_floor: float | None = None,
    oscillating: bool = False,
) -> tuple[float, float]:
    """``int_lo^inf e^(-u^2/2T) f(u) du / sqrt(2 pi T)`` and an error estimate.

    ``payoff`` maps nodes to ``(values, abs_errors)``.  Panel density is
    doubled until two successive rules agree to the tolerance.  The cutoff
    keeps the tail bound below ``tail_floor`` (default ``abs_tol / 1000``).
    For ``oscillating`` payoffs the panels are also split at each period of
    ``cos(sigma0/2 sinh u)`` as far as that oscillation can matter.
    """
    floor = 1e-3 * quad_spec.abs_tol if tail_floor is None else tail_floor
    if quad_spec.u_max is not None:
        U = max(quad_spec.u_max, lo + 1e-12)
        tail = tail_bound(T, U, sigma0)
    else:
        U, tail = choose_cutoff(T, sigma0, lo, floor)
    osc_sigma0 = sigma0 if oscillating and quad_spec.osc_split else None
    osc_hi = _oscillation_reach(T, sigma0, lo, U, floor) if osc_sigma0 else lo
    norm = 1.0 / math.sqrt(2 * math.pi * T)

    def rule(density: int):
        nodes, weights = _panel_nodes(_outer_edges(lo, U, T, osc_sigma0, osc_hi, density), OUTER_GL)
        vals, errs = payoff(nodes)
        ker = np.exp(-0.5 * (nodes * nodes) / T) * weights * norm
        return float(np.sum(ker * vals)), float(np.sum(ker * errs))

    density = 2
    prev, inner = rule(density)
    for _ in range(quad_spec.max_subdiv):
        density *= 2
        cur, inner = rule(density)
        diff = abs(cur - prev)
        if diff <= max(quad_spec.abs_tol, quad_spec.rel_tol * abs(cur)):
            return cur, diff + inner + tail
        prev = cur
    raise ConvergenceError(f"outer quadrature not converged at T={T}", estimate=cur, error=diff + inner + tail)


def value_integral(
    T: float,
    params: ModelParams | None = None,
    payoff: Payoff = "sabr",
    quad_spec: QuadSpec = DEFAULT_QUAD,
    s_minus: float = 0.0,
) -> tuple[float, float]:
    """Normalized Gaussian moment of a payoff (``sabr``, ``unit`` = g0, ``inf``)."""
    if not T > 0:
        raise DomainError("T must be positive")
    if payoff == "sabr":
        if params is None:
            raise DomainError("sabr payoff needs params")
        sig = params.sigma0
        fn = lambda u: eval_g_with_error(u, params, quad_spec, s_minus)
    elif payoff == "unit":
        sig = 2.0
        fn = lambda u: ((g := eval_g0(u)), 4e-16 * np.abs(g))
    elif payoff == "inf":
        sig = 2.0
        fn = lambda u: ((g := eval_g_inf(u)), 2e-16 * np.abs(g))
    else:
        raise DomainError(f"unknown payoff {payoff!r}")
    return gaussian_moment(T, fn, sig, quad_spec, lo=s_minus, oscillating=payoff == "sabr")


# --------------------------------------------------------------------------
# pricing
# --------------------------------------------------------------------------


def _clamp(value: float, err: float, what: str) -> float:
    if value < 0:
        if value < -10 * err - 1e-300:
            raise ConvergenceError(f"{what} is negative beyond its error estimate", estimate=value, error=err)
        warnings.warn(f"{what} {value:.3g} within quadrature noise, clamped to 0", RuntimeWarning, stacklevel=3)
        return 0.0
    return value


def price_strike(T: float, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD) -> PriceResult:
    """Time value ``E[(S_T - K)^+] - (S0 - K)^+`` at strike ``params.K``."""
    if not T > 0:
        raise DomainError("T must be positive")
    p, T_eff = params.rescaled(T)
    sm = p.s_minus
    I, err = value_integral(T_eff, p, "sabr", quad_spec, s_minus=sm)
    pref = VALUE_FACTOR * math.sqrt(p.K * p.S0) * math.exp(-T_eff / 8)
    return PriceResult(_clamp(pref * I, pref * err, "time value"), pref * err, "quadrature")


def price_atm(T: float, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD) -> PriceResult:
    """ATM time value (the strike in ``params`` is ignored)."""
    atm = ModelParams(params.sigma0, params.omega, params.S0, params.S0)
    return price_strike(T, atm, quad_spec)


def double_integral_price(T: float, params: ModelParams, rel_tol: float = 1e-11) -> PriceResult:
    """Time value from the kernel-tail form, without exchanging the integrals.

    ``V = (2 sqrt(K S0) / pi) int_{s_-}^inf G(T, s) / sinh s * sin(sigma0/2 sqrt(sinh^2 s - sinh^2 s_-)) ds``
    """
    if not T > 0:
        raise DomainError("T must be positive")
    p, t = params.rescaled(T)
    sm = p.s_minus
    c = 0.5 * p.sigma0
    sh2 = math.sinh(sm) ** 2

    def integrand(s: float) -> float:
        y = math.sinh(s)
        if y == 0.0:
            return c
        r = math.sqrt(max(y * y - sh2, 0.0))
        return mckean_tail(t, s) * math.sin(c * r) / y

    # panels between zeros of the sine factor, summed until the remaining
    # tail, bounded by G(t, b) * int_b^inf ds / sinh s, is negligible
    s_max = max(sm, 0.5 * t) + math.sqrt(90.0 * t) + 1.0
    n_osc = int(c * math.sinh(s_max) / math.pi)
    zeros = np.arcsinh(np.sqrt(sh2 + (math.pi * np.arange(1, n_osc + 1) / c) ** 2)) if n_osc else np.empty(0)
    grid = np.linspace(sm, s_max, 41)
    edges = np.unique(np.concatenate([grid, zeros[zeros < s_max]]))
    val = err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = quad(integrand, a, b, epsabs=0.0, epsrel=rel_tol, limit=100)
        val += v
        err += e
        rest = mckean_tail(t, b) * math.log(1.0 / math.tanh(0.5 * b))
        if rest < 1e-3 * rel_tol * abs(val):
            err += rest
            break
    pref = 2.0 * math.sqrt(p.K * p.S0) / math.pi
    return PriceResult(pref * val, pref * err, "double_integral")


def series_price(T: float, params: ModelParams, N: int) -> PriceResult:
    """Partial sum through order ``N`` of the short-maturity ATM value series.

    The error field carries the magnitude of the first omitted term.
    """
    if not T > 0:
        raise DomainError("T must be positive")
    if not 0 <= N < MAX_PAYOFF_ORDER:
        raise DomainError(f"N must lie in [0, {MAX_PAYOFF_ORDER - 1}]")
    p, t = params.rescaled(T)
    ps = derive_payoff_series(N + 1)
    terms = vexp_terms(ps, t, p.sigma0)
    pref = VALUE_FACTOR * p.S0 * math.exp(-t / 8)
    return PriceResult(pref * float(np.sum(terms[: N + 1])), pref * abs(float(terms[N + 1])), f"series({N})")


def delta_v_with_error(
    T: float, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD, cancel_rtol: float = 1e-3
) -> tuple[float, float]:
    """``int e^(-u^2/2T) (g_inf - g) du / sqrt(2 pi T)`` with its error estimate.

    The result is exponentially small at large sigma0 while the integrand is
    O(1), so a :class:`CancellationWarning` is raised when the error estimate
    exceeds ``cancel_rtol`` times the value.
    """
    if not T > 0:
        raise DomainError("T must be positive")
    p, t = params.rescaled(T)
    atm = ModelParams(p.sigma0, 1.0, p.S0, p.S0)

    def diff(u):
        g, e = eval_g_with_error(u, atm, quad_spec, 0.0)
        ginf = eval_g_inf(u)
        return ginf - g, e + 2e-16 * ginf

    val, err = gaussian_moment(t, diff, atm.sigma0, quad_spec, tail_floor=TAIL_FLOOR, oscillating=True)
    if err > cancel_rtol * abs(val):
        warnings.warn(
            f"delta_v={val:.3e} carries error estimate {err:.2e} (cancellation)", CancellationWarning, stacklevel=2
        )
    return val, err


def delta_v(T: float, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD) -> float:
    """Deficit of the ATM payoff below its large-sigma0 limit, Gaussian-averaged.

    Positive; the covered call ``S0 - C`` equals ``(2 sqrt2/pi) S0 e^(-T/8)`` times it.
    """
    return delta_v_with_error(T, params, quad_spec)[0]


def covered_call(T: float, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD) -> PriceResult:
    """``S0 - C`` at the money, computed from ``delta_v`` to avoid cancellation."""
    p, t = params.rescaled(T)
    val, err = delta_v_with_error(T, params, quad_spec)
    pref = VALUE_FACTOR * p.S0 * math.exp(-t / 8)
    return PriceResult(_clamp(pref * val, pref * err, "covered call"), pref * err, "quadrature")


# --------------------------------------------------------------------------
# Black-Scholes utilities
# --------------------------------------------------------------------------


def bs_atm_value(T: float, sigma: float) -> float:
    """ATM Black-Scholes call with ``S0 = K = 1`` and zero rates."""
    if not (T > 0 and sigma > 0):
        raise DomainError("T and sigma must be positive")
    return float(erf(sigma * math.sqrt(T) / (2.0 * SQRT2)))


def bs_call(S0: float, K: float, T: float, sigma: float) -> float:
    """Black-Scholes call with zero rates."""
    if sigma <= 0:
        return max(S0 - K, 0.0)
    sd = sigma * math.sqrt(T)
    d1 = math.log(S0 / K) / sd + 0.5 * sd
    return S0 * float(ndtr(d1)) - K * float(ndtr(d1 - sd))


def _vega(S0: float, K: float, T: float, sigma: float) -> float:
    sd = sigma * math.sqrt(T)
    d1 = math.log(S0 / K) / sd + 0.5 * sd
    return S0 * math.sqrt(T) * math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)


def _solve_vol(f: Callable[[float], float], fprime: Callable[[float], float], tol: float, max_iter: int = 200):
    """Bracketed Newton with bisection fallback on an increasing ``f``.

    Iterates until the step is at rounding level, then checks the residual.
    """
    lo, hi = 0.0, 1.0
    while f(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise ConvergenceError("implied vol bracket exceeded 1e6")
    eps = np.finfo(float).eps
    x = 0.5 * (lo + hi)
    it = 0
    for it in range(1, max_iter + 1):
        fx = f(x)
        if fx == 0.0:
            break
        if fx > 0:
            hi = x
        else:
            lo = x
        d = fprime(x)
        xn = x - fx / d if d > 0 else math.nan
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        done = abs(xn - x) <= 2 * eps * xn or hi - lo <= 2 * eps * hi
        x = xn
        if done:
            break
    r = abs(f(x))
    if r > tol:
        raise ConvergenceError("implied vol residual above tolerance", estimate=x, error=r)
    return x, it, r


def implied_vol(price_over_S0: float, T: float, tol: float = 1e-12) -> ImpliedVolResult:
    """Black-Scholes vol reproducing an ATM call price ``C/S0``."""
    if not 0 < price_over_S0 < 1:
        raise DomainError("ATM price over spot must lie in (0, 1)")
    if not T > 0:
        raise DomainError("T must be positive")
    a = math.sqrt(T) / (2.0 * SQRT2)
    f = lambda s: float(erf(a * s)) - price_over_S0
    fp = lambda s: 2.0 * a / math.sqrt(math.pi) * math.exp(-((a * s) ** 2))
    s, it, r = _solve_vol(f, fp, tol)
    return ImpliedVolResult(s, it, r)


def implied_vol_strike(call: float, S0: float, K: float, T: float, tol: float = 1e-12) -> ImpliedVolResult:
    """Black-Scholes vol reproducing a call price at any strike."""
    lower = max(S0 - K, 0.0)
    if not lower < call < S0:
        raise DomainError("call price outside the no-arbitrage range")
    if K == S0:
        r = implied_vol(call / S0, T, tol / S0)
        return r
    f = lambda s: bs_call(S0, K, T, s) - call
    fp = lambda s: _vega(S0, K, T, s) if s > 0 else 0.0
    s, it, r = _solve_vol(f, fp, tol)
    return ImpliedVolResult(s, it, r)
