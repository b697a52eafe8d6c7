"""Truncated power series with exact or floating-point coefficients.

The coefficient ring is whatever supports ``+``, ``-``, ``*`` and division by
Python integers: :class:`fractions.Fraction`, ``float``, or :class:`Poly`
(polynomials in a model parameter, themselves with Fraction coefficients).
Truncation follows the usual convention: combining two series keeps the
smaller order, and coefficients beyond the order are unknown rather than zero.

Parity is tracked as a flag and enforced structurally: an odd series never
stores a nonzero even-index coefficient, and operations on series of known
parity only ever compute the indices that can be nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Literal, Sequence

Parity = Literal["even", "odd", "none"]

MAX_ORDER = 80


class SeriesError(ValueError):
    """Raised when a series operation is undefined for its input."""


def _is_zero(c: Any) -> bool:
    return c == 0


def _zero_like(c: Any) -> Any:
    if isinstance(c, float):
        return 0.0
    if isinstance(c, Poly):
        return Poly(())
    return Fraction(0)


# --------------------------------------------------------------------------
# Polynomials (used for coefficients depending on sigma0**2 and for the
# auxiliary w**2 variable of the payoff derivation)
# --------------------------------------------------------------------------


class Poly:
    """Univariate polynomial ``c[0] + c[1]*x + ...`` with exact coefficients."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable[Any] = ()):
        c = list(coeffs)
        while c and _is_zero(c[-1]):
            c.pop()
        self.c: tuple = tuple(c)

    @classmethod
    def const(cls, value: Any) -> "Poly":
        return cls((Fraction(value) if isinstance(value, int) else value,))

    @classmethod
    def monomial(cls, degree: int, value: Any = 1) -> "Poly":
        return cls([Fraction(0)] * degree + [Fraction(value)])

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def __iter__(self):
        return iter(self.c)

    def __getitem__(self, i: int) -> Any:
        return self.c[i] if 0 <= i < len(self.c) else Fraction(0)

    def _coerce(self, other: Any) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly((other,))

    def __add__(self, other: Any) -> "Poly":
        o = self._coerce(other)
        n = max(len(self.c), len(o.c))
        return Poly(self[i] + o[i] for i in range(n))

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(-x for x in self.c)

    def __sub__(self, other: Any) -> "Poly":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "Poly":
        return self._coerce(other) - self

    def __mul__(self, other: Any) -> "Poly":
        if not isinstance(other, Poly):
            if _is_zero(other):
                return Poly(())
            return Poly(x * other for x in self.c)
        if not self.c or not other.c:
            return Poly(())
        out = [Fraction(0)] * (len(self.c) + len(other.c) - 1)
        for i, x in enumerate(self.c):
            if _is_zero(x):
                continue
            for j, y in enumerate(other.c):
                out[i + j] += x * y
        return Poly(out)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "Poly":
        if isinstance(other, Poly):
            raise TypeError("polynomial division is not supported")
        if isinstance(other, int):
            other = Fraction(other)
        return Poly(x / other for x in self.c)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Poly):
            return self.c == other.c
        if isinstance(other, (int, Fraction, float)):
            if other == 0:
                return not self.c
            return len(self.c) == 1 and self.c[0] == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.c)

    def __call__(self, x: Any) -> Any:
        acc: Any = 0
        for coef in reversed(self.c):
            acc = acc * x + coef
        return acc

    def shift(self, k: int) -> "Poly":
        """Multiply by ``x**k``."""
        return Poly([Fraction(0)] * k + list(self.c)) if self.c else Poly(())

    def to_str(self, var: str = "s") -> str:
        if not self.c:
            return "0"
        parts = []
        for i, coef in enumerate(self.c):
            if _is_zero(coef):
                continue
            mono = "" if i == 0 else (var if i == 1 else f"{var}^{i}")
            parts.append(f"({coef})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Poly({self.to_str('x')})"


# --------------------------------------------------------------------------
# Exact scalars of the form q * pi**p * 2**(r/2)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalScalar:
    """Exact number ``value * pi**pi_pow * sqrt(2)**sqrt2_pow``.

    Stored in canonical form with ``sqrt2_pow`` in ``{0, 1}`` so that equality
    is structural.
    """

    value: Fraction
    pi_pow: int = 0
    sqrt2_pow: int = 0

    def __post_init__(self):
        v = Fraction(self.value)
        q = self.sqrt2_pow
        if v == 0:
            object.__setattr__(self, "value", Fraction(0))
            object.__setattr__(self, "pi_pow", 0)
            object.__setattr__(self, "sqrt2_pow", 0)
            return
        half, rem = divmod(q, 2)
        v = v * Fraction(2) ** half
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "sqrt2_pow", rem)

    @property
    def numerator(self) -> int:
        return self.value.numerator

    @property
    def denominator(self) -> int:
        return self.value.denominator

    def __mul__(self, other: Any) -> "RationalScalar":
        if isinstance(other, RationalScalar):
            return RationalScalar(
                self.value * other.value,
                self.pi_pow + other.pi_pow,
                self.sqrt2_pow + other.sqrt2_pow,
            )
        return RationalScalar(self.value * Fraction(other), self.pi_pow, self.sqrt2_pow)

    __rmul__ = __mul__

    def __float__(self) -> float:
        return float(self.value) * math.pi**self.pi_pow * math.sqrt(2.0) ** self.sqrt2_pow

    def __str__(self) -> str:
        s = str(self.value)
        if self.pi_pow:
            s += "*pi" + (f"^{self.pi_pow}" if self.pi_pow != 1 else "")
        if self.sqrt2_pow:
            s += "*sqrt(2)"
        return s


def wallis_moment(j: int) -> RationalScalar:
    """``int_0^1 w^(2j) / sqrt(1 - w^2) dw = (pi/2) (2j-1)!!/(2j)!!``."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    return RationalScalar(wallis_ratio(j) / 2, pi_pow=1)


def wallis_ratio(j: int) -> Fraction:
    """``(2j-1)!!/(2j)!!`` as an exact fraction."""
    r = Fraction(1)
    for i in range(1, j + 1):
        r *= Fraction(2 * i - 1, 2 * i)
    return r


# --------------------------------------------------------------------------
# Power series
# --------------------------------------------------------------------------


def _combine_parity(pa: Parity, pb: Parity) -> Parity:
    if pa == "none" or pb == "none":
        return "none"
    return "even" if pa == pb else "odd"


def _allowed(parity: Parity, k: int) -> bool:
    if parity == "even":
        return k % 2 == 0
    if parity == "odd":
        return k % 2 == 1
    return True


def detect_parity(coeffs: Sequence[Any]) -> Parity:
    """Exact parity of a coefficient list (``none`` when mixed)."""
    even = all(_is_zero(c) for c in coeffs[1::2])
    odd = all(_is_zero(c) for c in coeffs[0::2])
    if odd and not even:
        return "odd"
    if even:
        return "even"
    return "none"


class PowerSeries:
    """Truncated series ``c_0 + c_1 x + ... + c_N x^N + O(x^(N+1))``."""

    __slots__ = ("coeffs", "parity")

    def __init__(self, coeffs: Iterable[Any], parity: Parity | None = None):
        c = tuple(coeffs)
        if not c:
            raise SeriesError("a series needs at least one coefficient")
        if len(c) - 1 > MAX_ORDER:
            raise SeriesError(f"order {len(c) - 1} exceeds maximum {MAX_ORDER}")
        if parity is None:
            parity = detect_parity(c)
        elif parity != "none":
            for k, v in enumerate(c):
                if not _allowed(parity, k) and not _is_zero(v):
                    raise SeriesError(f"{parity} series has nonzero coefficient at index {k}")
        self.coeffs = c
        self.parity: Parity = parity

    # construction helpers -------------------------------------------------
    @classmethod
    def from_function(cls, f: Callable[[int], Any], order: int, parity: Parity = "none") -> "PowerSeries":
        zero = _zero_like(f(0)) if parity != "odd" else Fraction(0)
        return cls(
            (f(k) if _allowed(parity, k) else zero for k in range(order + 1)),
            parity=parity,
        )

    @classmethod
    def identity(cls, order: int, one: Any = Fraction(1)) -> "PowerSeries":
        zero = one - one
        return cls([zero, one] + [zero] * (order - 1), parity="odd")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, k: int) -> Any:
        return self.coeffs[k]

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self) -> str:
        return f"PowerSeries({list(self.coeffs)!r}, parity={self.parity!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def truncate(self, order: int) -> "PowerSeries":
        return PowerSeries(self.coeffs[: order + 1], parity=self.parity)

    def map(self, f: Callable[[Any], Any]) -> "PowerSeries":
        """Apply ``f`` to every coefficient (e.g. ``float`` or a Poly evaluation)."""
        return PowerSeries((f(c) for c in self.coeffs), parity=self.parity)

    def to_float(self) -> "PowerSeries":
        return self.map(float)

    def __call__(self, x: Any) -> Any:
        acc: Any = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def partial_sums(self, x: Any) -> list:
        out, acc, p = [], 0, 1
        for c in self.coeffs:
            acc = acc + c * p
            out.append(acc)
            p = p * x
        return out

    # arithmetic -----------------------------------------------------------
    def __add__(self, other: Any) -> "PowerSeries":
        if not isinstance(other, PowerSeries):
            c = list(self.coeffs)
            c[0] = c[0] + other
            return PowerSeries(c, parity="even" if self.parity == "even" else None)
        n = min(self.order, other.order) + 1
        par: Parity = self.parity if self.parity == other.parity else "none"
        return PowerSeries((self.coeffs[k] + other.coeffs[k] for k in range(n)), parity=par if par != "none" else None)

    __radd__ = __add__

    def __neg__(self) -> "PowerSeries":
        return PowerSeries((-c for c in self.coeffs), parity=self.parity)

    def __sub__(self, other: Any) -> "PowerSeries":
        return self + (-other)

    def __rsub__(self, other: Any) -> "PowerSeries":
        return (-self) + other

    def __mul__(self, other: Any) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            return ps_mul(self, other)
        return PowerSeries((c * other for c in self.coeffs), parity=self.parity)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            return ps_mul(self, ps_reciprocal(other))
        if isinstance(other, int):
            other = Fraction(other)
        return PowerSeries((c / other for c in self.coeffs), parity=self.parity)

    def __pow__(self, n: int) -> "PowerSeries":
        if n < 0:
            return ps_reciprocal(self) ** (-n)
        c0 = self.coeffs[0]
        zero = c0 * 0
        result = PowerSeries([zero + 1] + [zero] * self.order, parity="even")
        base = self
        while n:
            if n & 1:
                result = ps_mul(result, base)
            n >>= 1
            if n:
                base = ps_mul(base, base)
        return result

    def shift_down(self, k: int = 1) -> "PowerSeries":
        """Divide by ``x**k``; the first ``k`` coefficients must vanish."""
        for i in range(k):
            if not _is_zero(self.coeffs[i]):
                raise SeriesError("series is not divisible by x^k")
        par: Parity = self.parity
        if par != "none" and k % 2 == 1:
            par = "odd" if par == "even" else "even"
        return PowerSeries(self.coeffs[k:], parity=par)

    def shift_up(self, k: int = 1) -> "PowerSeries":
        """Multiply by ``x**k`` (order grows by ``k``)."""
        zero = _zero_like(self.coeffs[0])
        par: Parity = self.parity
        if par != "none" and k % 2 == 1:
            par = "odd" if par == "even" else "even"
        return PowerSeries([zero] * k + list(self.coeffs), parity=par)

    def substitute_power(self, p: int) -> "PowerSeries":
        """Series in ``x**p``: coefficient ``c_k`` moves to index ``p*k``."""
        zero = _zero_like(self.coeffs[0])
        out = [zero] * (p * self.order + 1)
        for k, c in enumerate(self.coeffs):
            out[p * k] = c
        return PowerSeries(out)

    def scale_argument(self, a: Any) -> "PowerSeries":
        """``f(a*x)``."""
        out, p = [], 1
        for c in self.coeffs:
            out.append(c * p)
            p = p * a
        return PowerSeries(out, parity=self.parity)


def ps_mul(a: PowerSeries, b: PowerSeries) -> PowerSeries:
    """Cauchy product truncated to the smaller order."""
    n = min(a.order, b.order)
    par = _combine_parity(a.parity, b.parity)
    ac, bc = a.coeffs, b.coeffs
    nz_a = [i for i in range(n + 1) if not _is_zero(ac[i])]
    zero = ac[0] * 0 + bc[0] * 0
    out = []
    for k in range(n + 1):
        if not _allowed(par, k):
            out.append(zero)
            continue
        acc: Any = zero
        for i in nz_a:
            if i > k:
                break
            y = bc[k - i]
            if not _is_zero(y):
                acc = acc + ac[i] * y
        out.append(acc)
    return PowerSeries(out, parity=par)


def ps_reciprocal(a: PowerSeries) -> PowerSeries:
    """``1/a`` for a series with invertible constant term."""
    a0 = a.coeffs[0]
    if _is_zero(a0):
        raise SeriesError("reciprocal needs a nonzero constant term")
    inv0 = 1 / a0 if not isinstance(a0, int) else Fraction(1, a0)
    n = a.order
    par: Parity = "even" if a.parity == "even" else "none"
    out = [inv0]
    for k in range(1, n + 1):
        if not _allowed(par, k):
            out.append(inv0 * 0)
            continue
        acc = inv0 * 0
        for i in range(1, k + 1):
            if not _is_zero(a.coeffs[i]):
                acc = acc + a.coeffs[i] * out[k - i]
        out.append(-acc * inv0)
    return PowerSeries(out, parity=par)


def ps_power(a: PowerSeries, alpha: Fraction | float) -> PowerSeries:
    """``a**alpha`` for a series whose constant term is exactly 1.

    Uses the J.C.P. Miller recurrence, which only divides by integers and so
    works over any coefficient ring (including polynomial coefficients).
    """
    if a.coeffs[0] != 1:
        raise SeriesError("power series exponentiation needs constant term 1")
    n = a.order
    ac = a.coeffs
    one = ac[0]
    par: Parity = "even" if a.parity == "even" else "none"
    out = [one]
    for k in range(1, n + 1):
        if not _allowed(par, k):
            out.append(one * 0)
            continue
        acc = one * 0
        for j in range(1, k + 1):
            if _is_zero(ac[j]):
                continue
            w = (alpha + 1) * j - k
            if w == 0:
                continue
            acc = acc + ac[j] * out[k - j] * w
        out.append(acc / k)
    return PowerSeries(out, parity=par)


def ps_pow_neg_half(a: PowerSeries) -> PowerSeries:
    """``a**(-1/2)``: the binomial series ``(1+x)^(-1/2)`` composed with ``a-1``."""
    half = -0.5 if isinstance(a.coeffs[0], float) else Fraction(-1, 2)
    return ps_power(a, half)


def ps_compose(outer: PowerSeries, inner: PowerSeries) -> PowerSeries:
    """``outer(inner(x))``; ``inner`` must have zero constant term."""
    if not _is_zero(inner.coeffs[0]):
        raise SeriesError("composition needs an inner series with zero constant term")
    n = min(outer.order, inner.order)
    inner = inner.truncate(n)
    if inner.parity == "odd" and outer.parity in ("even", "odd"):
        par: Parity = outer.parity
    elif inner.parity == "even":
        par = "even"
    else:
        par = "none"
    # Horner: c_n, then (acc * inner + c_k)
    acc = PowerSeries([outer.coeffs[n]] + [_zero_like(outer.coeffs[n])] * n)
    for k in range(n - 1, -1, -1):
        acc = ps_mul(acc, inner) + outer.coeffs[k]
    coeffs = list(acc.coeffs)
    if par != "none":
        zero = _zero_like(coeffs[0])
        coeffs = [c if _allowed(par, k) else zero for k, c in enumerate(coeffs)]
    return PowerSeries(coeffs, parity=par)


def ps_reversion(a: PowerSeries) -> PowerSeries:
    """Compositional inverse ``b`` with ``a(b(x)) = x`` via Lagrange inversion."""
    if not _is_zero(a.coeffs[0]):
        raise SeriesError("reversion needs a(0) = 0")
    if a.order < 1 or _is_zero(a.coeffs[1]):
        raise SeriesError("reversion needs a'(0) != 0")
    n = a.order
    # phi = x / a(x); b_k = [x^(k-1)] phi^k / k
    phi = ps_reciprocal(a.shift_down(1))
    zero = _zero_like(a.coeffs[1])
    out = [zero]
    power = phi
    for k in range(1, n + 1):
        if k > 1:
            power = ps_mul(power, phi)
        c = power.coeffs[k - 1] if k - 1 <= power.order else zero
        out.append(c / k)
    par: Parity = "odd" if a.parity == "odd" else "none"
    if par == "odd":
        out = [c if k % 2 == 1 else zero for k, c in enumerate(out)]
    return PowerSeries(out, parity=par)


# --------------------------------------------------------------------------
# Elementary series (exact)
# --------------------------------------------------------------------------


def exp_series(order: int, scale: Fraction = Fraction(1)) -> PowerSeries:
    """``exp(scale*x)``."""
    return PowerSeries.from_function(lambda k: scale**k / math.factorial(k), order)


def sinh_series(order: int) -> PowerSeries:
    return PowerSeries.from_function(lambda k: Fraction(1, math.factorial(k)), order, parity="odd")


def cosh_series(order: int) -> PowerSeries:
    return PowerSeries.from_function(lambda k: Fraction(1, math.factorial(k)), order, parity="even")


def sin_series(order: int) -> PowerSeries:
    return PowerSeries.from_function(
        lambda k: Fraction((-1) ** ((k - 1) // 2), math.factorial(k)), order, parity="odd"
    )


def cos_series(order: int) -> PowerSeries:
    return PowerSeries.from_function(
        lambda k: Fraction((-1) ** (k // 2), math.factorial(k)), order, parity="even"
    )


def erf_series(order: int) -> RationalScalarSeries:
    """``erf(x) = (2/sqrt(pi)) * sum (-1)^n x^(2n+1) / ((2n+1) n!)``.

    Returned as a rational series together with its ``2/sqrt(pi)`` prefactor.
    """
    rational = PowerSeries.from_function(
        lambda k: Fraction((-1) ** ((k - 1) // 2), k * math.factorial((k - 1) // 2)),
        order,
        parity="odd",
    )
    return RationalScalarSeries(RationalScalar(Fraction(2), pi_pow=0), rational, sqrt_pi_pow=-1)


@dataclass(frozen=True)
class RationalScalarSeries:
    """A rational series times ``prefactor * sqrt(pi)**sqrt_pi_pow``.

    Only used where half-integer powers of pi appear (the error function
    and its inverse); everything else in the package stays in
    :class:`RationalScalar`.
    """

    prefactor: RationalScalar
    series: PowerSeries
    sqrt_pi_pow: int = 0

    def scale(self) -> float:
        return float(self.prefactor) * math.pi ** (self.sqrt_pi_pow / 2)

    def to_float(self) -> PowerSeries:
        s = self.scale()
        return self.series.map(lambda c: float(c) * s)


def erfinv_series(order: int) -> PowerSeries:
    """Float coefficients of ``erf^-1``, obtained by reverting the erf series."""
    return ps_reversion(erf_series(order).to_float())
