"""Short-maturity series for the ATM SABR value and implied variance.

Everything here is exact: the payoff coefficients ``a_k`` are derived from
the integral definition of the payoff by expanding in ``u`` after the
substitution ``s = w u`` and integrating each ``w**(2j)/sqrt(1-w**2)`` moment
in closed form.  The results are rational polynomials in ``sigma0**2`` times
``pi/sqrt(2)``.  The divergence diagnostics (root test, optimal truncation,
error bound) work on float views of those coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.special import ndtr

from .series_core import (
    MAX_ORDER,
    Poly,
    PowerSeries,
    RationalScalar,
    SeriesError,
    exp_series,
    ps_compose,
    ps_mul,
    ps_pow_neg_half,
    ps_reversion,
    wallis_ratio,
)

DEFAULT_ORDER = 24
MAX_PAYOFF_ORDER = 40

Kernel = Literal["sabr", "unit"]

# a_k = PAYOFF_PREFACTOR * r_k(sigma0^2)
PAYOFF_PREFACTOR = RationalScalar(Fraction(1), pi_pow=1, sqrt2_pow=-1)


def _as_poly(c) -> Poly:
    return c if isinstance(c, Poly) else Poly.const(c)


@dataclass(frozen=True)
class PayoffSeries:
    """Odd payoff series ``G(u) = sigma0 * sum_k a_k u^(2k+1)``.

    ``a_k = prefactor * r_k(s)`` with ``s = sigma0**2`` and ``r_k`` an exact
    rational polynomial of degree at most ``k``.  For the unit kernel
    (``h = 1``) the series is that of ``g0(u)`` itself, without the sigma0
    prefactor, and the ``r_k`` are constants.
    """

    r: tuple[Poly, ...]
    kernel: Kernel = "sabr"
    prefactor: RationalScalar = PAYOFF_PREFACTOR

    @property
    def order(self) -> int:
        return len(self.r) - 1

    def exact(self, k: int, sigma0: Fraction | int | None = None) -> RationalScalar:
        """``a_k`` as an exact scalar; ``sigma0`` must be rational."""
        val = self.r[k](Fraction(sigma0) ** 2) if sigma0 is not None else self.r[k](Fraction(0))
        return self.prefactor * val

    def coefficients(self, sigma0: float = 0.0) -> np.ndarray:
        """Float values of ``a_0 .. a_N`` at the given sigma0."""
        s = float(sigma0) ** 2
        pre = float(self.prefactor)
        return np.array([pre * float(p(Fraction(0))) if p.degree < 1 else pre * _poly_float(p, s) for p in self.r])

    def evaluate(self, u: float, sigma0: float = 0.0) -> float:
        """Partial sum of the payoff series at ``u`` (including the sigma0 factor)."""
        a = self.coefficients(sigma0)
        u2 = u * u
        acc = 0.0
        for c in a[::-1]:
            acc = acc * u2 + c
        lead = sigma0 if self.kernel == "sabr" else 1.0
        return lead * u * acc

    def as_power_series(self, sigma0: float) -> PowerSeries:
        """Float series in ``u`` with the sigma0 factor included."""
        a = self.coefficients(sigma0)
        lead = sigma0 if self.kernel == "sabr" else 1.0
        c = [0.0] * (2 * self.order + 2)
        for k, v in enumerate(a):
            c[2 * k + 1] = lead * v
        return PowerSeries(c, parity="odd")


def _poly_float(p: Poly, x: float) -> float:
    acc = 0.0
    for c in reversed(p.c):
        acc = acc * x + float(c)
    return acc


@dataclass(frozen=True)
class ValueSeries:
    """``b_k = a_k 2^k k!``; the normalized value is ``sqrt(T/2pi) sum b_k T^k``."""

    payoff: PayoffSeries
    factor: tuple[int, ...]

    @property
    def order(self) -> int:
        return self.payoff.order

    def exact(self, k: int, sigma0: Fraction | int | None = None) -> RationalScalar:
        return self.payoff.exact(k, sigma0) * self.factor[k]

    def coefficients(self, sigma0: float = 0.0) -> np.ndarray:
        return self.payoff.coefficients(sigma0) * np.array(self.factor, dtype=float)


@dataclass
class TruncationReport:
    T: float
    N_star: int
    eps_star: float
    bound: float
    partial_sums: list[float]
    terms: list[float]
    n_star_estimate: float
    n_star_analytic: float
    reference: float | None = None
    errors: list[float] = field(default_factory=list)


# --------------------------------------------------------------------------
# derivation
# --------------------------------------------------------------------------


def _cosh_difference_series(N: int) -> PowerSeries:
    """``2 (cosh u - cosh wu) / (u^2 (1 - w^2))`` as a series in ``t = u^2``.

    Coefficient of ``t^(m-1)`` is ``2 (1 + w^2 + ... + w^(2m-2)) / (2m)!``,
    stored as a polynomial in ``w^2``.
    """
    return PowerSeries(
        [Poly([Fraction(2, math.factorial(2 * m))] * m) for m in range(1, N + 2)]
    )


def _h_series(N: int) -> PowerSeries:
    """``h(x)/sigma0`` as a series in ``x^2`` with coefficients in ``Q[s]``.

    ``h(x)/sigma0 = (1/2) sum_n (-s/4)^n sinh(x)^(2n) / (2n+1)!``.
    """
    sinh2 = PowerSeries(
        [Fraction(0)] + [Fraction(2 ** (2 * m - 1), math.factorial(2 * m)) for m in range(1, N + 1)]
    )
    out = [Poly(()) for _ in range(N + 1)]
    power = PowerSeries([Fraction(1)] + [Fraction(0)] * N)
    for n in range(N + 1):
        if n > 0:
            power = ps_mul(power, sinh2)
        coef = Poly.monomial(n, Fraction((-1) ** n, 2 * 4**n * math.factorial(2 * n + 1)))
        for j in range(n, N + 1):
            c = power.coeffs[j]
            if c != 0:
                out[j] = out[j] + coef * c
    return PowerSeries(out)


@lru_cache(maxsize=None)
def _derive(N: int, kernel: Kernel) -> tuple[Poly, ...]:
    # Y(t, w) = A^(-1/2), A from the cosh difference
    Y = ps_pow_neg_half(_cosh_difference_series(N))
    W = [wallis_ratio(i) for i in range(2 * N + 2)]

    def moment(j: int, poly_w: Poly) -> Fraction:
        # L(w^(2j) * poly) in units of pi/2
        return sum((c * W[i + j] for i, c in enumerate(poly_w.c)), Fraction(0))

    if kernel == "unit":
        inner = [Poly.const(moment(0, Y.coeffs[n])) for n in range(N + 1)]
    else:
        H = _h_series(N)
        inner = []
        for n in range(N + 1):
            acc = Poly(())
            for j in range(n + 1):
                acc = acc + H.coeffs[j] * moment(j, Y.coeffs[n - j])
            inner.append(acc)
    # G = sqrt2 * sinh(u) * (pi/2) * sum_n inner_n u^(2n) = (pi/sqrt2) * u * (S * inner)
    S = PowerSeries([Poly.const(Fraction(1, math.factorial(2 * m + 1))) for m in range(N + 1)])
    prod = ps_mul(S, PowerSeries(inner))
    return tuple(_as_poly(c) for c in prod.coeffs)


def derive_payoff_series(N: int = DEFAULT_ORDER, kernel: Kernel = "sabr") -> PayoffSeries:
    """Exact ``a_0 .. a_N`` of the odd payoff series.

    ``kernel="sabr"`` gives ``G(u)/sigma0`` coefficients as polynomials in
    ``sigma0**2``.  ``kernel="unit"`` replaces ``h`` by 1 and gives the series
    of ``g0(u)``.
    """
    if N < 0 or N > MAX_PAYOFF_ORDER:
        raise SeriesError(f"order must be in [0, {MAX_PAYOFF_ORDER}]")
    return PayoffSeries(_derive(N, kernel), kernel=kernel)


def value_series(ps: PayoffSeries) -> ValueSeries:
    """Term-by-term Gaussian integration: ``b_k = a_k 2^k k!``."""
    return ValueSeries(ps, tuple(2**k * math.factorial(k) for k in range(ps.order + 1)))


# --------------------------------------------------------------------------
# implied variance
# --------------------------------------------------------------------------


def _erf_kernel_series(N: int) -> PowerSeries:
    """``F(q) = sum (-1)^n q^n / ((2n+1) n!)`` so that ``erf(z) = (2/sqrt pi) z F(z^2)``."""
    return PowerSeries.from_function(lambda n: Fraction((-1) ** n, (2 * n + 1) * math.factorial(n)), N)


@lru_cache(maxsize=None)
def _implied_variance(N: int) -> tuple[Poly, ...]:
    ps = derive_payoff_series(N, "sabr")
    vs = value_series(ps)
    # C/S0 = sqrt(T) * sqrt(2/pi) * sigma0 * e^(-T/8) * R(T),  R = sum r_k 2^k k! T^k
    R = PowerSeries([ps.r[k] * vs.factor[k] for k in range(N + 1)])
    # erf(sigma0 Sigma sqrt(T)/(2 sqrt2)) = sqrt(T) sigma0 Sigma F(sigma0^2 Sigma^2 T/8) / sqrt(2 pi)
    # => Sigma F(s Sigma^2 T / 8) = 2 e^(-T/8) R(T).  Squaring with q = s Sigma^2 T/8:
    # psi(q) = q F(q)^2 = (s T / 2) e^(-T/4) R^2  =: x,   Sigma^2 = 8 q / (s T) = 4 W D(x)
    F = _erf_kernel_series(N + 1)
    psi = ps_mul(F, F).shift_up(1).truncate(N + 1)
    psi_inv = ps_reversion(psi)
    D = psi_inv.shift_down(1)  # psi^-1(x)/x, constant term 1
    W = ps_mul(exp_series(N, Fraction(-1, 4)).map(Poly.const), ps_mul(R, R))
    s_poly = Poly.monomial(1, 1)
    inner = W.map(lambda c: c * s_poly / 2).shift_up(1).truncate(N)
    Dx = ps_compose(D.truncate(N).map(Poly.const), inner)
    sigma2 = ps_mul(W, Dx).map(lambda c: _as_poly(c) * 4)
    return tuple(_as_poly(c) for c in sigma2.coeffs)


def implied_variance_series(ps: PayoffSeries | None = None, N: int = 12) -> PowerSeries:
    """``Sigma_BS^2(T, sigma0) = sum_k c_k(sigma0^2) T^k`` with exact Poly coefficients.

    ``Sigma_BS = sigma_BS / sigma0`` at omega = 1.  The optional payoff series
    only fixes the maximal order available; coefficients are always derived
    from the sabr kernel.
    """
    if ps is not None:
        if ps.kernel != "sabr":
            raise SeriesError("implied variance needs the sabr payoff series")
        N = min(N, ps.order)
    if N < 0 or N > MAX_PAYOFF_ORDER:
        raise SeriesError(f"order must be in [0, {MAX_PAYOFF_ORDER}]")
    return PowerSeries(_implied_variance(N))


def implied_variance_value(T: float, sigma0: float, N: int = 4) -> float:
    """Float partial sum of the implied-variance series."""
    c = implied_variance_series(N=N)
    s = sigma0 * sigma0
    return float(sum(_poly_float(p, s) * T**k for k, p in enumerate(c.coeffs)))


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def coeff_asymptotics(k: int) -> float:
    """Leading large-k behavior of ``a_k``: ``(-1)^k sqrt2 / (pi^(2k) (2k)(2k+1))``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (-1) ** k * math.sqrt(2.0) / (math.pi ** (2 * k) * (2 * k) * (2 * k + 1))


def root_test(coeffs: Sequence[float], mode: Literal["payoff", "value"] = "payoff") -> list[tuple[float, float]]:
    """Reduced coefficients ``(1/n, |c_n|^(-1/(2n)))`` for ``n >= 1``.

    In payoff mode ``c_n`` are the odd-series coefficients ``a_n`` of
    ``u^(2n+1)`` and the reduced sequence tends to the radius in ``u``.  In
    value mode ``c_n = b_n`` multiply ``T^n`` and the reduced sequence tends
    to the square root of the ``T``-radius.  Zero coefficients are skipped.
    """
    if mode not in ("payoff", "value"):
        raise ValueError(f"unknown mode {mode!r}")
    out = []
    for n, c in enumerate(coeffs):
        if n == 0:
            continue
        c = abs(float(c))
        if c == 0.0 or not math.isfinite(c):
            continue
        out.append((1.0 / n, c ** (-1.0 / (2 * n))))
    return out


def extrapolate_root_test(points: Sequence[tuple[float, float]], last: int = 8) -> float:
    """Least-squares line in ``1/n`` through the last points, evaluated at ``1/n = 0``."""
    pts = sorted(points, key=lambda p: p[0])[:last]
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return float(intercept)


def extrapolate_radius_algebraic(
    indices: Sequence[int], coeffs: Sequence[float], step: int = 1, last: int = 8
) -> float:
    """Radius from ``log|c_n| = -n log R + alpha log n + const`` fitted by least squares.

    ``step`` is the power of the variable carried per index (2 for a series in
    ``u^2``), so the returned radius is in the original variable.  This
    accounts for the algebraic prefactor that makes the plain root test
    converge like ``log(n)/n``.
    """
    idx = np.asarray(indices, dtype=float)[-last:]
    c = np.abs(np.asarray(coeffs, dtype=float))[-last:]
    A = np.column_stack([idx, np.log(idx), np.ones_like(idx)])
    sol, *_ = np.linalg.lstsq(A, np.log(c), rcond=None)
    return float(math.exp(-sol[0] / step))


def vexp_terms(ps: PayoffSeries, T: float, sigma0: float = 0.0) -> np.ndarray:
    """Terms ``sqrt(T/2pi) a_k (2T)^k k!`` of the normalized value series."""
    b = value_series(ps).coefficients(sigma0)
    k = np.arange(len(b))
    lead = sigma0 if ps.kernel == "sabr" else 1.0
    return lead * math.sqrt(T / (2 * math.pi)) * b * T**k


def growth_terms(ps: PayoffSeries, T: float, sigma0: float = 0.0) -> np.ndarray:
    """``|a_k (2T)^k k!|`` (no T-independent prefactors)."""
    b = np.abs(value_series(ps).coefficients(sigma0))
    return b * T ** np.arange(len(b))


def optimal_truncation(
    T: float,
    ps: PayoffSeries,
    sigma0: float = 0.0,
    reference: float | None = None,
) -> TruncationReport:
    """Optimal truncation of the normalized value series at maturity ``T``.

    ``N_star`` minimizes the magnitude of the first neglected term.  The
    analytic estimates ``pi^2/(2T)`` (minimum of the asymptotic term size) and
    ``e pi^2/(2T)`` are reported alongside.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    terms = vexp_terms(ps, T, sigma0)
    partial = np.cumsum(terms)
    # last neglected term for truncation order N is terms[N+1]
    neglected = np.abs(terms[1:])
    N_star = int(np.argmin(neglected))
    eps = float(neglected[N_star])
    eff_sigma = sigma0 if ps.kernel == "sabr" else 2.0
    errors = [] if reference is None else [float(abs(p - reference)) for p in partial]
    return TruncationReport(
        T=T,
        N_star=N_star,
        eps_star=eps,
        bound=error_bound(T, eff_sigma),
        partial_sums=[float(p) for p in partial],
        terms=[float(t) for t in terms],
        n_star_estimate=math.pi**2 / (2 * T),
        n_star_analytic=math.e * math.pi**2 / (2 * T),
        reference=reference,
        errors=errors,
    )


def error_bound(T: float, sigma0: float) -> float:
    """Upper bound on the ``u > pi`` contribution to the normalized value.

    Follows from ``g(u) <= sqrt2 sigma0 u e^(u/2)``.  For the unit kernel
    ``g0`` pass ``sigma0 = 2``.
    """
    if T <= 0 or sigma0 <= 0:
        raise ValueError("T and sigma0 must be positive")
    return math.sqrt(2.0) * sigma0 * (
        math.sqrt(T / (2 * math.pi)) * math.exp(-math.pi * (math.pi - T) / (2 * T))
        + 0.5 * math.exp(T / 8) * T * float(ndtr((0.5 * T - math.pi) / math.sqrt(T)))
    )


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def coefficient_rows(
    ps: PayoffSeries, sigma0: Fraction, which: Literal["payoff", "value"] = "payoff"
) -> list[tuple]:
    """Rows ``(k, numerator, denominator, pi_pow, sqrt2_pow, float)`` at rational sigma0."""
    vs = value_series(ps)
    rows = []
    for k in range(ps.order + 1):
        x = ps.exact(k, sigma0) if which == "payoff" else vs.exact(k, sigma0)
        rows.append((k, x.numerator, x.denominator, x.pi_pow, x.sqrt2_pow, float(x)))
    return rows


def implied_variance_rows(N: int, sigma0: Fraction) -> list[tuple]:
    c = implied_variance_series(N=N)
    rows = []
    for k, p in enumerate(c.coeffs):
        x = RationalScalar(p(Fraction(sigma0) ** 2))
        rows.append((k, x.numerator, x.denominator, 0, 0, float(x)))
    return rows


def payoff_control_series(kind: Literal["bs", "gaussian"], N: int, k: Fraction = Fraction(1, 2)) -> list[Fraction]:
    """Exact ``a_n`` of the control payoffs.

    ``bs``: ``sinh(u/2)``, entire of exponential type 1/2.
    ``gaussian``: ``u exp(-k u^2)``, entire of order 2 and type ``k``.
    """
    if kind == "bs":
        return [Fraction(1, 2 ** (2 * n + 1) * math.factorial(2 * n + 1)) for n in range(N + 1)]
    if kind == "gaussian":
        k = Fraction(k)
        return [(-k) ** n / math.factorial(n) for n in range(N + 1)]
    raise ValueError(f"unknown control payoff {kind!r}")


def control_value_series(a: Iterable[Fraction]) -> list[Fraction]:
    """``b_n = 2^n n! a_n`` for an arbitrary odd payoff series."""
    return [Fraction(2**n * math.factorial(n)) * Fraction(c) for n, c in enumerate(a)]
