"""Independent reference implementations used only by the tests.

None of these import the library's recursions. They work on Python
Fractions and plain lists so that agreement with the library is a genuine
two-route check.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath


def frac(x):
    """Any exact rational as a Fraction."""
    return Fraction(int(x.numerator), int(x.denominator))


# ---------------------------------------------------------------------------
# truncated power series on Fractions
# ---------------------------------------------------------------------------

def series_mul(a, b, length):
    out = [Fraction(0)] * length
    for i, x in enumerate(a[:length]):
        if x == 0:
            continue
        for k, y in enumerate(b[: length - i]):
            out[i + k] += x * y
    return out


def series_derivative(a):
    return [k * a[k] for k in range(1, len(a))]


def hierarchy_from_two_point(f2, n_top):
    """All f_n series from f_2 through the algebraic form of the flow.

    f_{n+2} = [sum_{n1+n2=n+2} f_{n1} f_{n2} + (n-4)/n f_n + 2/n f_n'] / (n+1).
    Each step up in n loses one series order.
    """
    f = {2: list(f2)}
    for n in range(2, n_top, 2):
        length = len(f[n]) - 1
        acc = [Fraction(0)] * length
        for n1 in range(2, n + 1, 2):
            prod = series_mul(f[n1], f[n + 2 - n1], length)
            acc = [x + y for x, y in zip(acc, prod)]
        lin = [Fraction(n - 4, n) * v for v in f[n][:length]]
        der = [Fraction(2, n) * v for v in series_derivative(f[n])[:length]]
        f[n + 2] = [(x + y + z) / (n + 1) for x, y, z in zip(acc, lin, der)]
    return f


def two_point_taylor_by_flatness(b1, g40, k_top):
    """f_{2,0..k_top} from f_4(0) = g40 and f_{2k+2}(0) = 0 for k >= 2.

    The coefficient f_{2,k} enters f_{2k+2}(0) linearly (through k
    derivatives), so each new coefficient is fixed by one linear condition.
    """
    b1, g40 = frac(b1), frac(g40)
    f2 = [b1, 3 * g40 + b1 - b1 * b1]
    for k in range(2, k_top + 1):
        def value_at_zero(x):
            trial = f2 + [Fraction(x)]
            return hierarchy_from_two_point(trial, 2 * k + 2)[2 * k + 2][0]

        r0, r1 = value_at_zero(0), value_at_zero(1)
        f2.append(-r0 / (r1 - r0))
    return f2


# ---------------------------------------------------------------------------
# polynomials and composition
# ---------------------------------------------------------------------------

def poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for k, y in enumerate(b):
            out[i + k] += x * y
    return out


def poly_compose(outer, inner):
    """outer(inner(x)) by Horner on coefficient lists."""
    inner = [frac(c) for c in inner]
    acc = [Fraction(0)]
    for c in reversed(outer):
        acc = poly_mul(acc, inner)
        acc[0] += frac(c)
    return acc


def poly_taylor_at(coeffs, x0, order):
    """Derivatives d^l p(x0) for l <= order."""
    out = []
    p = [frac(c) for c in coeffs]
    x0 = frac(x0)
    for _ in range(order + 1):
        out.append(sum((c * x0 ** k for k, c in enumerate(p)), Fraction(0)))
        p = [k * p[k] for k in range(1, len(p))] or [Fraction(0)]
    return out


def chain_rule_jet(outer_derivs, inner_derivs):
    """Derivatives of outer(inner(x)) by repeated differentiation of a
    formal expression in the symbols D_k outer and d_k inner.

    An expression is a dict mapping (k, (e_1, ..., e_L)) to a coefficient:
    outer^{(k)} times prod_i (inner^{(i)})^{e_i}.
    """
    outer_derivs = [frac(v) for v in outer_derivs]
    inner_derivs = [frac(v) for v in inner_derivs]
    L = min(len(outer_derivs), len(inner_derivs)) - 1
    expr = {(0, (0,) * L): Fraction(1)}
    results = []
    for level in range(L + 1):
        total = Fraction(0)
        for (k, exps), coef in expr.items():
            term = coef * outer_derivs[k]
            for i, e in enumerate(exps):
                if e:
                    term *= inner_derivs[i + 1] ** e
            total += term
        results.append(total)
        if level == L:
            break
        new = {}
        for (k, exps), coef in expr.items():
            # d/dx outer^{(k)}(g) = outer^{(k+1)} g'
            e = list(exps)
            e[0] += 1
            key = (k + 1, tuple(e))
            new[key] = new.get(key, 0) + coef
            for i, ei in enumerate(exps):
                if ei and i + 1 < L:
                    e = list(exps)
                    e[i] -= 1
                    e[i + 1] += 1
                    key = (k, tuple(e))
                    new[key] = new.get(key, 0) + coef * ei
        expr = new
    return results


# ---------------------------------------------------------------------------
# combinatorics by enumeration
# ---------------------------------------------------------------------------

def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def stirling_by_enumeration(m, k):
    return sum(1 for p in set_partitions(range(m)) if len(p) == k)


def ordered_set_partitions(m):
    """Number of ordered set partitions (weak orderings) by enumeration."""
    return sum(math.factorial(len(p)) for p in set_partitions(range(m)))


def dyck_paths(n):
    count = 0
    for steps in itertools.product((1, -1), repeat=2 * n):
        h = 0
        ok = True
        for s in steps:
            h += s
            if h < 0:
                ok = False
                break
        if ok and h == 0:
            count += 1
    return count


def bell_by_partitions(n, k, x):
    """Partial Bell polynomial from set partitions of {1..n} into k blocks."""
    x = [frac(v) for v in x]
    total = Fraction(0)
    for p in set_partitions(range(n)):
        if len(p) != k:
            continue
        term = Fraction(1)
        for block in p:
            term *= x[len(block) - 1]
        total += term
    return total


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def logistic(b1, mu):
    """Solution of y' = y - y^2 with y(0) = b1."""
    e = mpmath.exp(mu)
    return b1 * e / (1 - b1 + b1 * e)


def euler_borel_sum(z):
    """(1/z) int_0^inf e^{-t/z} / (1 + t) dt = e^{1/z} E_1(1/z) / z."""
    s = 1 / mpmath.mpmathify(z)
    return mpmath.exp(s) * mpmath.e1(s) * s
