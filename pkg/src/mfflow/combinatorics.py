"""Exact combinatorial primitives: Fuss-Catalan numbers, Bell polynomials,
Faà di Bruno composition of jets, Stirling and ordered Bell numbers, and the
exact inequality suites that the coefficient bounds rely on.

Everything returns Python ints or exact rationals.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

from .numerics import DomainError, Jet, coerce_like, mpq, _same_point


@dataclass
class IntegerSequenceCache:
    """Memo table for one integer sequence; safe for concurrent use."""

    kind: str
    table: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def get(self, key, compute):
        with self._lock:
            if key in self.table:
                return self.table[key]
        value = compute()
        if not isinstance(value, int) or value < 0:
            raise AssertionError(f"{self.kind}{key}: expected a non-negative integer, got {value!r}")
        with self._lock:
            self.table.setdefault(key, value)
        return value


_STIRLING = IntegerSequenceCache("stirling2")
_ORDERED_BELL = IntegerSequenceCache("ordered_bell")


def binomial(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)


def fuss_catalan(s: int, n: int) -> int:
    """C_s(n) = C((s+1) n, n) / (s n + 1)."""
    if s < 1 or n < 0:
        raise DomainError("fuss_catalan needs s >= 1 and n >= 0")
    num = math.comb((s + 1) * n, n)
    q, r = divmod(num, s * n + 1)
    if r:
        raise AssertionError(f"C_{s}({n}) is not an integer")
    return q


def fuss_convolution(s: int, m: int) -> int:
    """sum_{i=0}^{m} C_s(i) C_s(m-i), checked against 2/((s+1)m+2) C((s+1)m+2, m)."""
    if s < 1 or m < 0:
        raise DomainError("fuss_convolution needs s >= 1 and m >= 0")
    lhs = sum(fuss_catalan(s, i) * fuss_catalan(s, m - i) for i in range(m + 1))
    rhs = mpq(2, (s + 1) * m + 2) * math.comb((s + 1) * m + 2, m)
    if rhs != lhs:
        raise AssertionError(f"convolution identity fails at s={s}, m={m}: {lhs} != {rhs}")
    return lhs


def fuss_identity_weighted(n: int) -> tuple:
    """Both sides of sum_{n1+n2=n+2, ni>=4 even} n2 C_2(n1/2-1) C_2(n2/2-1)
    = ((n-4)(n+2)/(2n)) C_2(n/2-1), for even n >= 6."""
    if n < 6 or n % 2:
        raise DomainError("identity needs even n >= 6")
    lhs = sum(
        (n + 2 - n1) * fuss_catalan(2, n1 // 2 - 1) * fuss_catalan(2, (n + 2 - n1) // 2 - 1)
        for n1 in range(4, n - 1, 2)
    )
    rhs = mpq((n - 4) * (n + 2), 2 * n) * fuss_catalan(2, n // 2 - 1)
    return mpq(lhs), rhs


def partitions_pnk(n: int, k: int) -> Iterator[tuple]:
    """Enumerate p(n,k): tuples (l_1..l_{n-k+1}) with sum l_j = k, sum j l_j = n."""
    if k < 1 or n < k:
        return
    width = n - k + 1
    lam = [0] * width

    def rec(j: int, parts_left: int, weight_left: int):
        if j == 0:
            if parts_left == 0 and weight_left == 0:
                yield tuple(lam)
            return
        # j is the current part size (descending), slot j-1
        top = min(parts_left, weight_left // j)
        for c in range(top, -1, -1):
            lam[j - 1] = c
            rest_parts = parts_left - c
            rest_weight = weight_left - c * j
            # remaining sizes are < j: need rest_parts <= rest_weight <= rest_parts*(j-1)
            if rest_parts <= rest_weight <= rest_parts * (j - 1):
                yield from rec(j - 1, rest_parts, rest_weight)
        lam[j - 1] = 0

    yield from rec(width, k, n)


@lru_cache(maxsize=None)
def _bell_terms(n: int, k: int) -> tuple:
    out = []
    for lam in partitions_pnk(n, k):
        den = 1
        for j, l in enumerate(lam, start=1):
            den *= math.factorial(l) * math.factorial(j) ** l
        out.append((lam, mpq(math.factorial(n), den)))
    return tuple(out)


def bell_polynomial(n: int, k: int, x: Sequence):
    """Partial Bell polynomial B_{n,k}(x_1..x_{n-k+1}) summed literally over p(n,k)."""
    if not 1 <= k <= n:
        raise DomainError("bell_polynomial needs 1 <= k <= n")
    if len(x) != n - k + 1:
        raise DomainError(f"B_{{{n},{k}}} needs {n - k + 1} arguments, got {len(x)}")
    total = coerce_like(0, x[0])
    for lam, coef in _bell_terms(n, k):
        term = coerce_like(coef, x[0])
        for j, l in enumerate(lam):
            if l:
                term = term * x[j] ** l
        total = total + term
    return total


def stirling2(m: int, k: int) -> int:
    """Stirling number of the second kind via the triangle recurrence."""
    if m < 0 or k < 0:
        raise DomainError("stirling2 needs non-negative arguments")
    if k > m:
        return 0

    def compute():
        if m == k:
            return 1
        if k == 0:
            return 0
        return k * stirling2(m - 1, k) + stirling2(m - 1, k - 1)

    return _STIRLING.get((m, k), compute)


def stirling2_partition_sum(m: int, k: int) -> int:
    """S_m^k as the literal sum over p(m,k) of m! prod 1/(l_j! (j!)^l_j)."""
    if k == 0:
        return 1 if m == 0 else 0
    if k > m:
        return 0
    total = sum(coef for _, coef in _bell_terms(m, k))
    if total.denominator != 1:
        raise AssertionError("partition sum is not an integer")
    return int(total)


def ordered_bell(n: int) -> int:
    """a(n) = sum_k k! S_n^k; cross-checked against a(n) = sum_i C(n,i) a(n-i)."""
    if n < 0:
        raise DomainError("ordered_bell needs n >= 0")

    def compute():
        direct = sum(math.factorial(k) * stirling2(n, k) for k in range(n + 1))
        if n > 0:
            rec = sum(math.comb(n, i) * ordered_bell(n - i) for i in range(1, n + 1))
            if rec != direct:
                raise AssertionError(f"ordered Bell recursion fails at n={n}")
        return direct

    return _ORDERED_BELL.get(n, compute)


def e_lower_bound(terms: int = 40) -> mpq:
    """Rational lower bound for e from its partial exponential series."""
    return sum((mpq(1, math.factorial(k)) for k in range(terms)), mpq(0))


def ordered_bell_bound_holds(n: int) -> bool:
    """Exact check of a(n) <= e^n n! using a rational lower bound of e."""
    return ordered_bell(n) <= e_lower_bound() ** n * math.factorial(n)


def faa_di_bruno_jet(outer: Jet, inner: Jet) -> Jet:
    """Jet of outer∘inner at inner.point from (f∘g)^(n) = sum_k f^(k) B_{n,k}(g', g'', ...)."""
    y0 = inner.derivs[0]
    _same_point(outer, Jet(y0, (y0,)))  # outer must sit at inner's value
    L = min(outer.order, inner.order)
    derivs = [outer.derivs[0]]
    for n in range(1, L + 1):
        s = coerce_like(0, outer.derivs[0]) * 0
        for k in range(1, n + 1):
            s = s + outer.derivs[k] * bell_polynomial(n, k, inner.derivs[1 : n - k + 2])
        derivs.append(s)
    return Jet(inner.point, derivs)


# ---------------------------------------------------------------------------
# exact inequality suites
# ---------------------------------------------------------------------------

def inverse_square_convolution_sides(n: int) -> tuple:
    """(lhs, rhs) of (n/(n-2)) sum_{n1+n2=n+2, ni>=4 even} 1/(n1^2 n2^2) <= 1/n^2."""
    if n < 12 or n % 2:
        raise DomainError("needs even n >= 12")
    s = sum((mpq(1, n1 * n1 * (n + 2 - n1) ** 2) for n1 in range(4, n - 1, 2)), mpq(0))
    return mpq(n, n - 2) * s, mpq(1, n * n)


def squared_convolution_sides(l: int) -> list:
    """The three (lhs, rhs) pairs of the convolution inequalities at index l (>= 1 for the last)."""
    full = sum((mpq(1, (a + 1) ** 2 * (l - a + 1) ** 2) for a in range(l + 1)), mpq(0))
    inner = sum((mpq(1, (a + 1) ** 2 * (l - a + 1) ** 2) for a in range(1, l)), mpq(0))
    out = [(full, mpq(5, (l + 1) ** 2)), (inner, mpq(3, (l + 1) ** 2))]
    n = l
    if n >= 1:
        cubic = sum((mpq(1, a ** 3 * (n + 1 - a) ** 3) for a in range(1, n + 1)), mpq(0))
        out.append((cubic, mpq(4, n ** 3)))
    return out


def mixed_factorial_sides(n: int, l: int, lam: int) -> tuple:
    """(lhs, rhs) of the first mixed-sum inequality with K_0 = 20 (n >= 3)."""
    tot = mpq(0)
    for n1 in range(1, n + 1):
        n2 = n + 1 - n1
        for l1 in range(l + 1):
            l2 = l - l1
            for la1 in range(max(0, lam - l2), min(l1, lam) + 1):
                la2 = lam - la1
                num = (
                    math.factorial(n) * math.factorial(lam)
                    * math.factorial(n1 + l1 - 1) * math.factorial(n2 + l2 - 1)
                )
                den = (
                    (l1 + 1) ** 2 * (l2 + 1) ** 2 * n1 ** 2 * n2 ** 2
                    * math.factorial(n1) * math.factorial(n2)
                    * math.factorial(la1) * math.factorial(la2) * math.factorial(n + l - 1)
                )
                tot += mpq(num, den)
    return tot, mpq(20, (l + 1) ** 2 * n ** 2)


def mixed_factorial_edge_sides(n: int, l: int, lam: int) -> tuple:
    """(lhs, rhs) of the n1 = 1, n2 = n specialisation with K_0' = 5."""
    tot = mpq(0)
    for l1 in range(l + 1):
        l2 = l - l1
        for la1 in range(max(0, lam - l2), min(l1, lam) + 1):
            la2 = lam - la1
            num = math.factorial(n) * math.factorial(lam) * math.factorial(l1) * math.factorial(n + l2 - 1)
            den = (
                (l1 + 1) ** 2 * (l2 + 1) ** 2 * n ** 2 * math.factorial(n)
                * math.factorial(la1) * math.factorial(la2) * math.factorial(n + l - 1)
            )
            tot += mpq(num, den)
    return tot, mpq(5, (l + 1) ** 2 * n ** 2)


def vandermonde_sides(a: int, b: int, nu: int) -> tuple:
    """(sum_{nu'} C(a,nu') C(b,nu-nu'), C(a+b,nu))."""
    return sum(binomial(a, v) * binomial(b, nu - v) for v in range(nu + 1)), binomial(a + b, nu)


def binomial_product_bound_holds(a: int, b: int, c: int, d: int) -> bool:
    """C(a,b) C(c,d) <= C(a+c, b+d)."""
    return binomial(a, b) * binomial(c, d) <= binomial(a + c, b + d)
