"""Payoff integrands of the uncorrelated log-normal SABR model.

With ``h(s) = sin(sigma0/2 * sinh s) / sinh s`` the ATM payoff is

    g(u) = sinh u * int_0^u h(s) / sqrt(cosh u - cosh s) ds,

and away from the money the two-parameter version ``g(u, s_minus)`` uses
``h(s, s_minus) = sin(sigma0/2 * sqrt(sinh^2 s - sinh^2 s_minus)) / sinh s``
integrated from ``s_minus``.  ``g0`` is the payoff with ``h = 1`` and ``g_inf``
its large-sigma0 limit.  The real payoff is delegated to the quadrature in
:mod:`sabrlab.kernels`; the complex continuation lives here and uses adaptive
quadrature along the straight segment ``s = w u``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.integrate import quad
from scipy.special import elliprf

from . import kernels

SQRT2 = math.sqrt(2.0)
G_INF_SCALE = math.pi / SQRT2

Quadrant = Literal["Q1", "Q2", "Q3", "Q4"]


class DomainError(ValueError):
    """Argument outside the domain where a quantity is defined."""


class ConvergenceError(RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class BranchError(AssertionError):
    """The square-root argument landed on its branch cut inside the strip."""


@dataclass(frozen=True)
class ModelParams:
    """Uncorrelated (rho = 0), log-normal (beta = 1) SABR parameters."""

    sigma0: float
    omega: float = 1.0
    S0: float = 1.0
    K: float | None = None

    def __post_init__(self):
        for name in ("sigma0", "omega", "S0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
        if self.K is None:
            object.__setattr__(self, "K", self.S0)
        elif not (self.K > 0 and math.isfinite(self.K)):
            raise DomainError(f"K must be positive and finite, got {self.K!r}")

    def rescaled(self, T: float) -> tuple["ModelParams", float]:
        """Equivalent unit vol-of-vol problem: ``(sigma0/omega, 1, omega^2 T)``."""
        if self.omega == 1.0:
            return self, T
        return replace(self, sigma0=self.sigma0 / self.omega, omega=1.0), T * self.omega**2

    @property
    def s_minus(self) -> float:
        """Lower integration limit ``|log(K/S0)| / sigma0`` (for unit omega)."""
        return abs(math.log(self.K / self.S0)) / (self.sigma0 / self.omega)

    @property
    def is_atm(self) -> bool:
        return self.K == self.S0


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature configuration.

    ``u_max`` of ``None`` lets the pricer choose its own cutoff.  The payoff
    quadrature starts from one Gauss-Legendre rule per panel and doubles the
    panel subdivision up to ``max_subdiv`` times until two successive
    estimates agree.
    """

    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    u_max: float | None = None
    osc_split: bool = True
    max_subdiv: int = 6
    min_panels: int = 4

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.u_max is not None and not self.u_max > 0:
            raise DomainError("u_max must be positive")
        if self.max_subdiv < 1 or self.min_panels < 1:
            raise DomainError("max_subdiv and min_panels must be >= 1")


DEFAULT_QUAD = QuadSpec()


@dataclass(frozen=True)
class ComplexEval:
    u: complex
    quadrant: Quadrant
    value: complex


# --------------------------------------------------------------------------
# real payoffs
# --------------------------------------------------------------------------


def eval_h(s, params: ModelParams, s_minus: float = 0.0):
    """``sin(sigma0/2 * R(s)) / sinh s`` with ``R = sqrt(sinh^2 s - sinh^2 s_minus)``.

    Near the origin of the sine argument a Taylor branch replaces the
    quotient, which also gives the limit ``sigma0/2`` at ``s = 0``.
    """
    c = 0.5 * params.sigma0
    s_arr = np.asarray(s, dtype=float)
    y = np.sinh(s_arr)
    if s_minus == 0.0:
        z = c * y
    else:
        z = c * np.sqrt(np.maximum(y * y - math.sinh(s_minus) ** 2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.abs(z) < 1e-3
        ratio = np.where(y == 0.0, c if s_minus == 0.0 else 0.0, z / np.where(y == 0.0, 1.0, y))
        out = np.where(small, ratio * (1.0 - z * z / 6.0 + z**4 / 120.0), np.sin(z) / np.where(y == 0.0, 1.0, y))
    return float(out) if out.ndim == 0 else out


def _adaptive_payoff(u, sigma0, s_minus, unit, quad_spec: QuadSpec):
    """Payoff values and error estimates with per-point refinement."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    mp = quad_spec.min_panels
    osc = quad_spec.osc_split

    threshold = kernels.OSC_THRESHOLD if osc else math.inf

    def run(points, refine):
        return kernels.g_values(points, sigma0, s_minus, unit, refine=refine, min_panels=mp, osc_threshold=threshold)

    coarse = run(u, 1)
    fine = run(u, 2)
    err = np.abs(fine - coarse)
    val = fine
    todo = err > np.maximum(quad_spec.abs_tol, quad_spec.rel_tol * np.abs(fine))
    refine = 2
    level = 1
    while np.any(todo) and level < quad_spec.max_subdiv:
        refine *= 2
        level += 1
        idx = np.flatnonzero(todo)
        nxt = run(u[idx], refine)
        err[idx] = np.abs(nxt - val[idx])
        val[idx] = nxt
        todo[idx] = err[idx] > np.maximum(quad_spec.abs_tol, quad_spec.rel_tol * np.abs(nxt))
    if np.any(todo):
        raise ConvergenceError(
            f"payoff quadrature not converged at {int(todo.sum())} points", estimate=val, error=err
        )
    return val, err


def eval_g_with_error(u, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD, s_minus: float | None = None):
    """``(g, error_estimate)`` arrays for the payoff ``g(u, s_minus)``."""
    sm = params.s_minus if s_minus is None else s_minus
    return _adaptive_payoff(u, params.sigma0, sm, False, quad_spec)


def eval_g(u, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD, s_minus: float | None = None):
    """Payoff ``g(u)`` at the ATM point, or ``g(u, s_minus)`` when given.

    ``s_minus`` defaults to the value implied by ``params.K``; pass ``0`` to
    force the ATM payoff.  Scalars in, scalar out.
    """
    scalar = np.ndim(u) == 0
    if np.any(np.asarray(u) <= 0):
        raise DomainError("u must be positive")
    val, _ = eval_g_with_error(u, params, quad_spec, s_minus)
    return float(val[0]) if scalar else val


def eval_g_unit(u, quad_spec: QuadSpec = DEFAULT_QUAD):
    """Payoff with ``h = 1`` by the same quadrature used for ``g``."""
    scalar = np.ndim(u) == 0
    val, _ = _adaptive_payoff(u, 1.0, 0.0, True, quad_spec)
    return float(val[0]) if scalar else val


# g0(u) / u = (pi/sqrt2) (1 + G0_C1 u^2 + ...), from the exact series
G0_C1 = 5.0 / 48.0


def eval_g0(u):
    """Closed form of the ``h = 1`` payoff.

    ``g0(u) = sqrt2 * sinh(u) * R_F(0, cosh^2(u/2), 1)``: the incomplete
    first-kind integral at imaginary amplitude reduces to a complete one of
    negative parameter ``-sinh^2(u/2)``, which the Carlson form evaluates in
    real arithmetic.
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(u < 0):
        raise DomainError("u must be nonnegative")
    with np.errstate(over="ignore"):
        out = SQRT2 * np.sinh(u) * elliprf(0.0, np.cosh(0.5 * u) ** 2, 1.0)
    small = u < 1e-6
    out = np.where(small, G_INF_SCALE * u * (1.0 + G0_C1 * u * u), out)
    return float(out[0]) if scalar else out


def eval_g_inf(u):
    """Large-sigma0 limit ``(pi/sqrt2) cosh(u/2)``."""
    if np.any(np.asarray(u) < 0):
        raise DomainError("u must be nonnegative")
    out = G_INF_SCALE * np.cosh(0.5 * np.asarray(u, dtype=float))
    return float(out) if out.ndim == 0 else out


def payoff_bound(u, sigma0: float):
    """Upper bound ``sqrt2 * sigma0 * u * cosh(u/2)`` on ``g(u)``."""
    return SQRT2 * sigma0 * np.asarray(u) * np.cosh(0.5 * np.asarray(u))


def g0_bound(u):
    """Upper bound ``2 sqrt2 * u * cosh(u/2)`` on ``g0(u)``."""
    return 2.0 * SQRT2 * np.asarray(u) * np.cosh(0.5 * np.asarray(u))


# --------------------------------------------------------------------------
# complex continuation
# --------------------------------------------------------------------------


def sqrt_plus(z: complex) -> complex:
    """Square root with its cut along the positive real axis."""
    z = complex(z)
    if z.imag == 0.0:
        z = complex(z.real, 0.0)  # drop a negative zero
    r = cmath.sqrt(z)
    return r if z.imag >= 0.0 else -r


def quadrant(u: complex) -> Quadrant:
    """Quadrant label; the positive imaginary axis is Q1, the negative one Q4."""
    u = complex(u)
    if abs(u.imag) >= math.pi:
        raise DomainError(f"|Im u| must be < pi, got {u.imag!r}")
    x, y = u.real, u.imag
    if y >= 0:
        return "Q1" if x >= 0 else "Q2"
    return "Q4" if x >= 0 else "Q3"


def _h_complex(s: complex, c: float) -> complex:
    y = cmath.sinh(s)
    z = c * y
    if abs(z) < 1e-3:
        return c * (1.0 - z * z / 6.0 + z**4 / 120.0)
    return cmath.sin(z) / y


def _shc_complex(x: complex) -> complex:
    if abs(x) < 1e-4:
        return 1.0 + x * x / 6.0
    return cmath.sinh(x) / x


def _g_q1(u: complex, sigma0: float, quad_spec: QuadSpec, unit: bool = False) -> complex:
    """Direct integral along ``s = u sin^2(theta)`` for ``u`` in the first quadrant."""
    if u == 0:
        return 0j
    c = 0.5 * sigma0
    interior = u.imag > 1e-8 * abs(u)

    def integrand(theta: float) -> complex:
        st, ct = math.sin(theta), math.cos(theta)
        s = u * st * st
        # (cosh u - cosh s) / cos^2(theta), regular at theta = pi/2
        q = u * cmath.sinh(0.5 * (u + s)) * _shc_complex(0.5 * u * ct * ct)
        if interior and q.real > 0 and abs(q.imag) <= 1e-14 * abs(q):
            raise BranchError(f"square-root argument on the cut at u={u!r}, theta={theta!r}")
        hv = 1.0 if unit else _h_complex(s, c)
        return 2.0 * u * st * hv / sqrt_plus(q)

    opts = dict(epsabs=quad_spec.abs_tol, epsrel=max(quad_spec.rel_tol, 1e-13), limit=400)
    re, e1 = quad(lambda t: integrand(t).real, 0.0, 0.5 * math.pi, **opts)
    im, e2 = quad(lambda t: integrand(t).imag, 0.0, 0.5 * math.pi, **opts)
    tol = 1e3 * max(quad_spec.abs_tol, quad_spec.rel_tol * math.hypot(re, im))
    if math.hypot(e1, e2) > tol:
        raise ConvergenceError(f"complex payoff not converged at u={u!r}", estimate=complex(re, im), error=math.hypot(e1, e2))
    return cmath.sinh(u) * complex(re, im)


def eval_G_complex(u: complex, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD, unit: bool = False) -> ComplexEval:
    """Analytic continuation of the ATM payoff into ``|Im u| < pi``.

    The first quadrant is integrated directly; the other three follow from
    oddness and conjugation symmetry.
    """
    u = complex(u)
    q = quadrant(u)
    sig = params.sigma0
    if q == "Q1":
        v = _g_q1(u, sig, quad_spec, unit)
    elif q == "Q2":
        v = -_g_q1(-u.conjugate(), sig, quad_spec, unit).conjugate()
    elif q == "Q3":
        v = -_g_q1(-u, sig, quad_spec, unit)
    else:
        v = _g_q1(u.conjugate(), sig, quad_spec, unit).conjugate()
    return ComplexEval(u=u, quadrant=q, value=v)


def imaginary_axis_integral(y: float, params: ModelParams, quad_spec: QuadSpec = DEFAULT_QUAD) -> float:
    """``G(iy) / (i sin y)``, i.e. ``int_0^y h(it) / sqrt(cos t - cos y) dt``."""
    if not 0 < y < math.pi:
        raise DomainError("y must lie in (0, pi)")
    v = eval_G_complex(1j * y, params, quad_spec).value
    return (v / (1j * math.sin(y))).real


def check_lemma1(w: float, U: float = 5.0, n: int = 200, tol: float = 1e-12) -> bool:
    """True when ``cosh u - cosh(w u)`` avoids the positive real axis on a grid.

    The grid covers ``Re u`` in ``[0, U]`` and ``Im u`` in the open interval
    ``(0, pi)`` with ``n`` points per direction.
    """
    if not 0.0 <= w <= 1.0:
        raise DomainError("w must lie in [0, 1]")
    x = np.linspace(0.0, U, n)
    y = np.linspace(0.0, math.pi, n + 2)[1:-1]
    u = x[None, :] + 1j * y[:, None]
    z = np.cosh(u) - np.cosh(w * u)
    scale = np.maximum(1.0, np.abs(z))
    on_axis = (np.abs(z.imag) <= tol * scale) & (z.real > tol * scale)
    return not bool(np.any(on_axis))


# --------------------------------------------------------------------------
# McKean kernel tail
# --------------------------------------------------------------------------


def _log_sinh(x: float) -> float:
    if x > 20.0:
        return x - math.log(2.0) + math.log1p(-math.exp(-2.0 * x))
    return math.log(math.sinh(x))


def mckean_tail(t: float, s: float, quad_spec: QuadSpec = DEFAULT_QUAD) -> float:
    """Tail integral of the hyperbolic heat kernel.

    ``G(t, s) = e^(-t/8) / sqrt(pi t) * int_s^inf e^(-u^2/2t) sinh u / sqrt(cosh u - cosh s) du``

    computed with ``u = s + v^2``, which removes the endpoint singularity, in
    log space so that large ``s`` does not overflow.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if s < 0:
        raise DomainError("s must be nonnegative")
    peak = max(s, 0.5 * t)
    u_max = peak + math.sqrt(80.0 * t) + 1.0
    v_max = math.sqrt(u_max - s)
    # normalize by the integrand scale at the peak to keep values O(1)
    log_ref = -peak * peak / (2 * t) + 0.5 * peak

    def integrand(v: float) -> float:
        u = s + v * v
        if u == 0.0:
            return 0.0
        x = 0.5 * v * v
        shc = 1.0 + x * x / 6.0 if x < 1e-4 else math.sinh(x) / x
        logf = -u * u / (2 * t) + _log_sinh(u) - 0.5 * _log_sinh(0.5 * (u + s)) - log_ref
        return 2.0 * math.exp(logf) / math.sqrt(shc)

    val, err = quad(integrand, 0.0, v_max, epsabs=0.0, epsrel=1e-13, limit=200)
    if err > 1e-9 * abs(val) + 1e-300:
        raise ConvergenceError(f"kernel tail not converged at t={t}, s={s}", estimate=val, error=err)
    log_pref = -t / 8 - 0.5 * math.log(math.pi * t) + log_ref
    return math.exp(log_pref + math.log(val)) if val > 0 else 0.0
