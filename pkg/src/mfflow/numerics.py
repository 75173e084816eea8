"""Exact and high-precision scalars, Taylor jets, truncated power series and
the log-Laurent ring used for the perturbative amplitudes.

Exact scalars are ``gmpy2.mpq`` values; precision reals are ``mpmath.mpf``
values evaluated in the ambient mpmath context (see :func:`working_precision`).
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

import gmpy2
import mpmath

mpq = gmpy2.mpq
ExactScalar = type(mpq(0))
PrecisionReal = mpmath.mpf

DEFAULT_PRECISION_BITS = 256


class DomainError(ValueError):
    """Raised when an operation is applied outside its domain."""


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------

def exact(x) -> ExactScalar:
    """Convert ints, ``"p/q"`` strings, decimal strings, Fractions or floats
    to an exact rational (floats convert to their exact binary value)."""
    if isinstance(x, ExactScalar):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(x, (int, Fraction, float)):
        return mpq(x)
    if isinstance(x, mpmath.mpf):
        if not mpmath.isfinite(x):
            raise DomainError("non-finite value has no exact form")
        man, exp = x.man_exp  # man is unsigned
        value = mpq(int(man)) * mpq(2) ** int(exp)
        return -value if x < 0 else value
    if isinstance(x, str):
        s = x.strip()
        try:
            return mpq(s)
        except ValueError:
            return mpq(Fraction(s))
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return mpq(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact scalar")


def is_exact(x) -> bool:
    return isinstance(x, (int, ExactScalar)) and not isinstance(x, bool)


def to_real(x):
    """Lift a scalar to the mpmath world at the current working precision."""
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return x
    if isinstance(x, ExactScalar):
        return mpmath.mpf(int(x.numerator)) / int(x.denominator)
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, complex):
        return mpmath.mpc(x)
    return mpmath.mpf(x)


def coerce_like(c, like):
    """Return ``c`` in the arithmetic world of ``like`` (exact stays exact)."""
    if is_exact(like) and is_exact(c):
        return c
    return to_real(c)


def less_equal(a, b) -> bool:
    """Comparison that works across mpq and mpf."""
    if is_exact(a) and is_exact(b):
        return a <= b
    return to_real(a) <= to_real(b)


def format_exact(x: ExactScalar) -> str:
    x = exact(x)
    if x.denominator == 1:
        return str(int(x.numerator))
    return f"{int(x.numerator)}/{int(x.denominator)}"


@contextlib.contextmanager
def working_precision(bits: int | None) -> Iterator[int]:
    """Temporarily set the mpmath binary precision."""
    bits = DEFAULT_PRECISION_BITS if bits is None else int(bits)
    if bits < 2:
        raise DomainError("precision_bits must be positive")
    with mpmath.workprec(bits):
        yield bits


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet:
    """Derivative tower ``derivs[l] = d^l/dmu^l value`` at ``point``."""

    point: object
    derivs: tuple

    def __post_init__(self):
        object.__setattr__(self, "derivs", tuple(self.derivs))
        if not self.derivs:
            raise DomainError("a jet needs at least the value")

    @property
    def order(self) -> int:
        return len(self.derivs) - 1

    @property
    def value(self):
        return self.derivs[0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise DomainError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.point, self.derivs[: order + 1])

    def derivative(self) -> "Jet":
        """Jet of the derivative; order drops by one."""
        if self.order < 1:
            raise DomainError("order-0 jet has no derivative information")
        return Jet(self.point, self.derivs[1:])

    def __add__(self, other: "Jet") -> "Jet":
        _same_point(self, other)
        L = min(self.order, other.order)
        return Jet(self.point, [self.derivs[i] + other.derivs[i] for i in range(L + 1)])

    def __sub__(self, other: "Jet") -> "Jet":
        _same_point(self, other)
        L = min(self.order, other.order)
        return Jet(self.point, [self.derivs[i] - other.derivs[i] for i in range(L + 1)])

    def __neg__(self) -> "Jet":
        return Jet(self.point, [-d for d in self.derivs])

    def scale(self, c) -> "Jet":
        return Jet(self.point, [coerce_like(c, d) * d for d in self.derivs])

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return self.scale(other)

    __rmul__ = scale


def _same_point(a: Jet, b: Jet) -> None:
    pa, pb = a.point, b.point
    if pa is pb:
        return
    try:
        same = pa == pb
    except TypeError:
        same = to_real(pa) == to_real(pb)
    if not same:
        raise DomainError(f"jets at different base points {pa!r} and {pb!r}")


def constant_jet(point, value, order: int) -> Jet:
    zero = value * 0
    return Jet(point, [value] + [zero] * order)


def identity_jet(point, order: int) -> Jet:
    one = coerce_like(1, point)
    zero = one * 0
    derivs = [point, one] + [zero] * (order - 1)
    return Jet(point, derivs[: order + 1])


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Leibniz rule; result order is the smaller of the two."""
    _same_point(a, b)
    L = min(a.order, b.order)
    out = []
    for l in range(L + 1):
        s = a.derivs[0] * b.derivs[l]
        for i in range(1, l + 1):
            s += math.comb(l, i) * a.derivs[i] * b.derivs[l - i]
        out.append(s)
    return Jet(a.point, out)


def quotient_jet(f: Jet, g: Jet) -> Jet:
    """Jet of f/g by the recursive quotient formula

    (f/g)^(l) = (1/g) [f^(l) - l! sum_{j=1}^{l} g^(l+1-j) / ((l+1-j)! (j-1)!) (f/g)^(j-1)].
    """
    _same_point(f, g)
    g0 = g.derivs[0]
    if g0 == 0:
        raise ZeroDivisionError("quotient jet with vanishing denominator")
    L = min(f.order, g.order)
    h = []
    for l in range(L + 1):
        s = f.derivs[l]
        for j in range(1, l + 1):
            c = mpq(math.factorial(l), math.factorial(l + 1 - j) * math.factorial(j - 1))
            s -= coerce_like(c, g.derivs[l + 1 - j]) * g.derivs[l + 1 - j] * h[j - 1]
        h.append(s / g0)
    return Jet(f.point, h)


def polynomial_jet(point, coeffs: Sequence, order: int) -> Jet:
    """Jet of the polynomial sum_k coeffs[k] x^k at ``point``."""
    derivs = []
    n = len(coeffs)
    for l in range(order + 1):
        s = coerce_like(0, point)
        for k in range(l, n):
            s += math.perm(k, l) * coeffs[k] * point ** (k - l)
        derivs.append(s)
    return Jet(point, derivs)


# ---------------------------------------------------------------------------
# truncated power series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerSeries:
    """Truncated Taylor series at 0: ``coeffs[k]`` multiplies mu^k."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @property
    def truncation_order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, k: int):
        return self.coeffs[k]

    def __len__(self) -> int:
        return len(self.coeffs)

    def __mul__(self, other: "PowerSeries") -> "PowerSeries":
        K = min(self.truncation_order, other.truncation_order)
        a, b = self.coeffs, other.coeffs
        return PowerSeries(
            [sum((a[i] * b[k - i] for i in range(1, k + 1)), a[0] * b[k]) for k in range(K + 1)]
        )

    def __call__(self, x):
        s = coerce_like(0, x) * 0
        for c in reversed(self.coeffs):
            s = s * x + c
        return s

    def to_jet(self, order: int | None = None) -> Jet:
        """Jet at 0: derivs[l] = l! coeffs[l]."""
        L = self.truncation_order if order is None else order
        return Jet(mpq(0), [math.factorial(l) * self.coeffs[l] for l in range(L + 1)])


# ---------------------------------------------------------------------------
# log-Laurent ring
# ---------------------------------------------------------------------------

Key = tuple  # (p, q, r, s): alpha^p ln^q(alpha) alpha0^r ln^s(alpha0)


def _norm_key(key) -> Key:
    if len(key) == 2:
        p, q = key
        r = s = 0
    elif len(key) == 4:
        p, q, r, s = key
    else:
        raise DomainError(f"log-Laurent key must have 2 or 4 entries, got {key!r}")
    if int(p) != p or int(r) != r:
        raise DomainError(f"non-integer power in log-Laurent key {key!r}")
    if q < 0 or s < 0 or int(q) != q or int(s) != s:
        raise DomainError(f"log powers must be non-negative integers: {key!r}")
    return (int(p), int(q), int(r), int(s))


class LogLaurentPoly:
    """Finite sum of c * alpha^p ln^q(alpha) * alpha0^r ln^s(alpha0) with exact c.

    ``alpha`` is the variable; ``alpha0`` is a symbolic constant. Zero
    coefficients are never stored.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | None = None):
        acc: dict = {}
        for key, c in (terms or {}).items():
            k = _norm_key(key)
            acc[k] = acc.get(k, mpq(0)) + exact(c)
        self._terms = {k: v for k, v in acc.items() if v != 0}

    @classmethod
    def constant(cls, c) -> "LogLaurentPoly":
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, p: int, q: int = 0, c=1) -> "LogLaurentPoly":
        return cls({(p, q): c})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, LogLaurentPoly):
            return self._terms == other._terms
        if is_exact(other):
            return self._terms == LogLaurentPoly.constant(other)._terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        return f"LogLaurentPoly({ {k: format_exact(v) for k, v in self.items()} })"

    def _combine(self, other, sign: int) -> "LogLaurentPoly":
        other = _as_llp(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            out[k] = out.get(k, mpq(0)) + sign * v
        return LogLaurentPoly(out)

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        return _as_llp(other)._combine(self, -1)

    def __neg__(self):
        return LogLaurentPoly({k: -v for k, v in self._terms.items()})

    def __mul__(self, other):
        if is_exact(other) or isinstance(other, Fraction):
            c = exact(other)
            return LogLaurentPoly({k: c * v for k, v in self._terms.items()})
        other = _as_llp(other)
        out: dict = {}
        for (p1, q1, r1, s1), c1 in self._terms.items():
            for (p2, q2, r2, s2), c2 in other._terms.items():
                k = (p1 + p2, q1 + q2, r1 + r2, s1 + s2)
                out[k] = out.get(k, mpq(0)) + c1 * c2
        return LogLaurentPoly(out)

    __rmul__ = __mul__

    def shift_alpha_power(self, dp: int) -> "LogLaurentPoly":
        """Multiply by alpha^dp."""
        return LogLaurentPoly({(p + dp, q, r, s): c for (p, q, r, s), c in self._terms.items()})

    def derivative(self) -> "LogLaurentPoly":
        """d/dalpha, term by term."""
        out: dict = {}
        for (p, q, r, s), c in self._terms.items():
            if p != 0:
                k = (p - 1, q, r, s)
                out[k] = out.get(k, mpq(0)) + p * c
            if q > 0:
                k = (p - 1, q - 1, r, s)
                out[k] = out.get(k, mpq(0)) + q * c
        return LogLaurentPoly(out)

    def substitute_alpha(self, which: str) -> "LogLaurentPoly":
        """Evaluate the alpha-dependence at alpha = 1 (``"one"``) or at
        alpha = alpha0 (``"alpha0"``), returning an alpha-free element."""
        out: dict = {}
        for (p, q, r, s), c in self._terms.items():
            if which == "one":
                if q:
                    continue
                k = (0, 0, r, s)
            elif which == "alpha0":
                k = (0, 0, r + p, s + q)
            else:
                raise DomainError(f"unknown substitution {which!r}")
            out[k] = out.get(k, mpq(0)) + c
        return LogLaurentPoly(out)

    def max_log_power(self) -> int:
        return max((q for (_, q, _, _) in self._terms), default=0)

    def evaluate(self, alpha, alpha0=None):
        """Evaluate at alpha (and alpha0 if the element depends on it).

        Exact when alpha is rational and no logarithm survives; otherwise an
        mpmath real at the working precision.
        """
        needs_alpha0 = any(r or s for (_, _, r, s) in self._terms)
        if needs_alpha0 and alpha0 is None:
            raise DomainError("element depends on alpha0; supply its value")
        if less_equal(alpha, 0) or (alpha0 is not None and less_equal(alpha0, 0)):
            raise DomainError("log-Laurent evaluation needs positive arguments")
        exact_ok = is_exact(alpha) and (alpha0 is None or is_exact(alpha0))
        la = _log_or_zero(alpha)
        l0 = _log_or_zero(alpha0) if alpha0 is not None else 0
        total = mpq(0) if exact_ok else mpmath.mpf(0)
        for (p, q, r, s), c in self._terms.items():
            if (q and la != 0) or (s and l0 != 0):
                exact_ok = False
                total = to_real(total)
            term = c * _pow(alpha, p)
            if r:
                term = term * _pow(alpha0, r)
            if q:
                term = term * la ** q if la != 0 else term * 0
            if s:
                term = term * l0 ** s if l0 != 0 else term * 0
            total = total + term
        return total


def _pow(x, p: int):
    if is_exact(x):
        return mpq(x) ** p
    return x ** p


def _log_or_zero(x):
    if x is None:
        return 0
    if is_exact(x) and x == 1:
        return 0
    return mpmath.log(to_real(x))


def _as_llp(x) -> LogLaurentPoly:
    if isinstance(x, LogLaurentPoly):
        return x
    return LogLaurentPoly.constant(exact(x))


def antiderivative(P: LogLaurentPoly) -> LogLaurentPoly:
    """Antiderivative in alpha, term by term, with zero constant.

    alpha^p ln^q: for p != -1 repeated integration by parts gives
    sum_i (-1)^i q!/(q-i)! alpha^{p+1} ln^{q-i} / (p+1)^{i+1};
    for p = -1 the result is ln^{q+1}/(q+1).
    """
    out: dict = {}
    for (p, q, r, s), c in P.terms.items():
        if p == -1:
            k = (0, q + 1, r, s)
            out[k] = out.get(k, mpq(0)) + c / (q + 1)
            continue
        a = p + 1
        coef = c / a
        for i in range(q + 1):
            k = (a, q - i, r, s)
            out[k] = out.get(k, mpq(0)) + coef
            coef = -coef * (q - i) / a
    return LogLaurentPoly(out)


def loglaurent_integrate(P: LogLaurentPoly, a, b, alpha0=None):
    """Definite integral of P over [a, b]; exact when no logarithm survives."""
    if less_equal(a, 0):
        raise DomainError("integration interval must lie in alpha > 0")
    if not less_equal(a, b):
        raise DomainError("need a <= b")
    F = antiderivative(P)
    return F.evaluate(b, alpha0) - F.evaluate(a, alpha0)


def llp_sum(items: Iterable[LogLaurentPoly]) -> LogLaurentPoly:
    acc: dict = {}
    for P in items:
        for k, v in P.terms.items():
            acc[k] = acc.get(k, mpq(0)) + v
    return LogLaurentPoly(acc)
