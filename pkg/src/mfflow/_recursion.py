"""Ring-agnostic Taylor recursion at mu = 0.

The same code runs on exact rationals (certificates) and on mpmath reals
(the pure-Python fallback of the compiled kernel). Coefficients are produced
level by level, N = n + 2k ascending; within a level the two-point
coefficient is updated after the g's it depends on.

Conventions: ``g[n][k]`` is the mu^k coefficient of g_n, where
f_n = mu^{n/2-2} g_n for even n >= 4, and ``f2[k]`` that of f_2.
"""
from __future__ import annotations

from typing import Callable


def taylor_levels(b1, g40, level_max: int, frac: Callable[[int, int], object]):
    """All g_{n,k} with n + 2k <= level_max and f_{2,k} with 2 + 2k <= level_max."""
    zero = b1 * 0
    kf = (level_max - 2) // 2
    f2 = [zero] * (kf + 1)
    f2[0] = b1
    g: dict = {}
    for L in range(4, level_max + 1, 2):
        for k in range(0, (L - 4) // 2 + 1):
            n = L - 2 * k
            row = g.setdefault(n, [])
            row.append(_g_entry(n, k, g, f2, g40, frac, zero))
        kk = (L - 2) // 2 - 1
        conv = zero
        for nu in range(kk + 1):
            conv = conv + f2[nu] * f2[kk - nu]
        f2[kk + 1] = (3 * g[4][kk] + f2[kk] - conv) * frac(1, kk + 1)
    return f2, g


def _pair_sum(n: int, k: int, g: dict, zero):
    """sum over n1 + n2 = n + 2 (ni >= 4) and rho of g_{n1,rho} g_{n2,k-rho}."""
    s = zero
    for n1 in range(4, n - 1, 2):
        n2 = n + 2 - n1
        if n2 < n1:
            break
        a, b = g[n1], g[n2]
        part = zero
        for rho in range(k + 1):
            part = part + a[rho] * b[k - rho]
        s = s + (part if n1 == n2 else 2 * part)
    return s


def _g_entry(n, k, g, f2, g40, frac, zero):
    if k == 0:
        if n == 4:
            return g40
        return -_pair_sum(n, 0, g, zero) * frac(n, n - 4)
    if k == 1:
        mixed = zero
        for n1 in range(4, n - 1, 2):
            mixed = mixed + g[n1][0] * g[n + 2 - n1][1]
        return -(2 * mixed + g[n][0] * (2 * f2[0] + 1 - frac(4, n))) * frac(n, n - 2)
    kk = k - 2
    row = g[n]
    d = n + 2 * kk
    lin = zero
    for nu in range(kk + 2):
        lin = lin + row[nu] * f2[kk + 1 - nu]
    return (
        -frac(n - 4, d) * row[kk + 1]
        - frac(2 * n, d) * lin
        - frac(n, d) * _pair_sum(n, kk + 2, g, zero)
        + frac(n * (n + 1), d) * g[n + 2][kk]
    )


# ---------------------------------------------------------------------------
# polynomial (in b1) version
# ---------------------------------------------------------------------------

def _padd(a, b):
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, v in enumerate(b):
        out[i] = out[i] + v
    return out


def _pscale(a, c):
    return [c * v for v in a]


def _pmul(a, b, zero):
    if not a or not b:
        return []
    out = [zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def poly_taylor_levels(g40, level_max: int, frac: Callable[[int, int], object]):
    """Coefficient lists in b1: g[n][k][nu] (nu <= k) and f2[k][nu] (nu <= k+1)."""
    zero = g40 * 0
    one = zero + 1
    kf = (level_max - 2) // 2
    f2 = [[] for _ in range(kf + 1)]
    f2[0] = [zero, one]
    g: dict = {}

    def pair_sum(n, k):
        s = []
        for n1 in range(4, n - 1, 2):
            n2 = n + 2 - n1
            if n2 < n1:
                break
            a, b = g[n1], g[n2]
            part = []
            for rho in range(k + 1):
                part = _padd(part, _pmul(a[rho], b[k - rho], zero))
            s = _padd(s, part if n1 == n2 else _pscale(part, 2))
        return s

    for L in range(4, level_max + 1, 2):
        for k in range(0, (L - 4) // 2 + 1):
            n = L - 2 * k
            row = g.setdefault(n, [])
            if k == 0:
                v = [g40] if n == 4 else _pscale(pair_sum(n, 0), -frac(n, n - 4))
            elif k == 1:
                mixed = []
                for n1 in range(4, n - 1, 2):
                    mixed = _padd(mixed, _pmul(g[n1][0], g[n + 2 - n1][1], zero))
                lin = _pmul(row[0], [1 - frac(4, n), 2 * one], zero)
                v = _pscale(_padd(_pscale(mixed, 2), lin), -frac(n, n - 2))
            else:
                kk = k - 2
                d = n + 2 * kk
                lin = []
                for nu in range(kk + 2):
                    lin = _padd(lin, _pmul(row[nu], f2[kk + 1 - nu], zero))
                v = _padd(
                    _padd(_pscale(row[kk + 1], -frac(n - 4, d)), _pscale(lin, -frac(2 * n, d))),
                    _padd(_pscale(pair_sum(n, kk + 2), -frac(n, d)),
                          _pscale(g[n + 2][kk], frac(n * (n + 1), d))),
                )
            row.append(_trim(v, k + 1, zero))
        kk = (L - 2) // 2 - 1
        conv = []
        for nu in range(kk + 1):
            conv = _padd(conv, _pmul(f2[nu], f2[kk - nu], zero))
        v = _padd(_padd(_pscale(g[4][kk], 3), f2[kk]), _pscale(conv, -1))
        f2[kk + 1] = _trim(_pscale(v, frac(1, kk + 1)), kk + 3, zero)
    return f2, g


def _trim(p, length, zero):
    """Pad or cut to ``length`` coefficients; cut entries must vanish."""
    p = list(p) + [zero] * max(0, length - len(p))
    return p[:length]
