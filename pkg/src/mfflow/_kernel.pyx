# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Quad-precision (113-bit) Taylor recursion at mu = 0.

Same level ordering as the pure-Python recursion. Values cross the boundary
as decimal strings so no precision is lost in either direction.
"""
from libc.stdlib cimport malloc, free

cdef extern from *:
    ctypedef double f128 "__float128"

cdef extern from "quadmath.h":
    f128 strtoflt128(const char *s, char **sp)
    int quadmath_snprintf(char *s, size_t size, const char *fmt, ...)

cdef inline f128 _parse(str s):
    b = s.encode("ascii")
    return strtoflt128(b, NULL)

cdef inline str _show(f128 x):
    cdef char buf[64]
    quadmath_snprintf(buf, 64, "%.36Qe", x)
    return buf.decode("ascii")


def f2_coefficients(str b1, str g40, int k_count):
    """f_{2,0..k_count-1} as decimal strings for the given b1 and g40."""
    if k_count < 1:
        return []
    cdef int level_max = 2 * k_count
    cdef int H = level_max // 2 + 1
    cdef f128 *g = <f128 *> malloc(H * H * sizeof(f128))
    cdef f128 *f2 = <f128 *> malloc(H * sizeof(f128))
    if g == NULL or f2 == NULL:
        free(g); free(f2)
        raise MemoryError()
    cdef int L, k, n, h, n1, n2, h1, h2, rho, kk, nu, d, kmax
    cdef f128 s, part, lin, mixed, g0 = _parse(g40)
    cdef f128 one = 1
    try:
        f2[0] = _parse(b1)
        # g stored at g[(n/2) * H + k]
        for L in range(4, level_max + 1, 2):
            for k in range(0, (L - 4) // 2 + 1):
                n = L - 2 * k
                h = n // 2
                if k == 0:
                    if n == 4:
                        g[h * H] = g0
                        continue
                    s = 0
                    for n1 in range(4, n - 1, 2):
                        n2 = n + 2 - n1
                        if n2 < n1:
                            break
                        part = g[(n1 // 2) * H] * g[(n2 // 2) * H]
                        s += part if n1 == n2 else 2 * part
                    g[h * H] = -s * (<f128> n) / (<f128> (n - 4))
                elif k == 1:
                    mixed = 0
                    for n1 in range(4, n - 1, 2):
                        mixed += g[(n1 // 2) * H] * g[((n + 2 - n1) // 2) * H + 1]
                    g[h * H + 1] = -(2 * mixed + g[h * H] * (2 * f2[0] + one - (<f128> 4) / n)) \
                        * (<f128> n) / (<f128> (n - 2))
                else:
                    kk = k - 2
                    d = n + 2 * kk
                    lin = 0
                    for nu in range(kk + 2):
                        lin += g[h * H + nu] * f2[kk + 1 - nu]
                    s = 0
                    kmax = kk + 2
                    for n1 in range(4, n - 1, 2):
                        n2 = n + 2 - n1
                        if n2 < n1:
                            break
                        h1 = (n1 // 2) * H
                        h2 = (n2 // 2) * H
                        part = 0
                        if n1 == n2:
                            for rho in range(kmax // 2 + 1):
                                if 2 * rho == kmax:
                                    part += g[h1 + rho] * g[h2 + kmax - rho]
                                elif 2 * rho < kmax:
                                    part += 2 * g[h1 + rho] * g[h2 + kmax - rho]
                            s += part
                        else:
                            for rho in range(kmax + 1):
                                part += g[h1 + rho] * g[h2 + kmax - rho]
                            s += 2 * part
                    g[h * H + k] = (
                        -(<f128> (n - 4)) * g[h * H + kk + 1]
                        - (<f128> (2 * n)) * lin
                        - (<f128> n) * s
                        + (<f128> (n * (n + 1))) * g[(h + 1) * H + kk]
                    ) / (<f128> d)
            kk = (L - 2) // 2 - 1
            s = 0
            for nu in range((kk + 1) // 2):
                s += 2 * f2[nu] * f2[kk - nu]
            if kk % 2 == 0:
                s += f2[kk // 2] * f2[kk // 2]
            f2[kk + 1] = (3 * g[2 * H + kk] + f2[kk] - s) / (<f128> (kk + 1))
        return [_show(f2[i]) for i in range(k_count)]
    finally:
        free(g)
        free(f2)
