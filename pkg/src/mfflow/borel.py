"""Borel transform, Laplace resummation, factorial-remainder certificates and
asymptoticity tables for the gt-expansion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath

from .numerics import DomainError, exact, is_exact, mpq, to_real


class PoleOnAxis(DomainError):
    """A rational continuation has a pole on the Laplace integration ray."""

    def __init__(self, message, pole):
        super().__init__(message)
        self.pole = pole


@dataclass(frozen=True)
class FormalSeries:
    coefficients: tuple
    variable_name: str = "z"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(self.coefficients))

    def __len__(self) -> int:
        return len(self.coefficients)

    def __getitem__(self, k: int):
        return self.coefficients[k]

    def partial_sum(self, z, N: int | None = None):
        """sum_{k<N} a_k z^k (all stored terms when N is None)."""
        N = len(self) if N is None else N
        if isinstance(z, ComplexCoupling):
            z = z.value
        if N > len(self):
            raise DomainError(f"partial sum of {N} terms needs {N} coefficients; {len(self)} stored")
        acc = 0
        for a in reversed(self.coefficients[:N]):
            acc = acc * z + (to_real(a) if not is_exact(z) else a)
        return acc


@dataclass(frozen=True)
class ComplexCoupling:
    real: object
    imaginary: object = 0

    @property
    def value(self):
        return mpmath.mpc(to_real(self.real), to_real(self.imaginary))

    def inside_circle(self, R) -> bool:
        """Re(1/z) > 1/R, the Sokal circle of diameter R tangent to the imaginary axis."""
        z = self.value
        return z != 0 and mpmath.re(1 / z) > 1 / to_real(R)


def _as_number(z):
    if isinstance(z, ComplexCoupling):
        return z.value
    if is_exact(z):
        return to_real(z)
    return z


def borel_transform(F: FormalSeries) -> FormalSeries:
    """a_n -> a_n / n!; exact on exact input."""
    out = []
    for n, a in enumerate(F.coefficients):
        f = math.factorial(n)
        out.append(a * mpq(1, f) if is_exact(a) else a / f)
    return FormalSeries(tuple(out), "t")


def inverse_borel_transform(B: FormalSeries, variable_name: str = "z") -> FormalSeries:
    return FormalSeries(tuple(b * math.factorial(n) for n, b in enumerate(B.coefficients)), variable_name)


def estimated_radius(B: FormalSeries):
    """Root-test radius from the upper half of the stored coefficients (inf if they vanish)."""
    N = len(B)
    vals = [abs(to_real(B[n])) ** (mpmath.mpf(1) / n) for n in range(max(1, N // 2), N) if B[n] != 0]
    if not vals:
        return mpmath.inf
    m = max(vals)
    return mpmath.inf if m == 0 else 1 / m


@dataclass(frozen=True)
class BorelSum:
    value: object
    error: object
    strategy: str
    split: object


def _laplace_polynomial_exact(coeffs, z, upper=None):
    """(1/z) int_0^upper e^{-t/z} sum_n b_n t^n dt, term by term in closed form."""
    if upper is None:
        # int_0^inf e^{-t/z} t^n dt / z = n! z^n
        return sum((to_real(b) * math.factorial(n) * z ** n for n, b in enumerate(coeffs)), mpmath.mpf(0))
    s = 1 / z
    total = mpmath.mpf(0)
    for n, b in enumerate(coeffs):
        # lower incomplete gamma: int_0^U t^n e^{-s t} dt = gammainc(n+1, 0, sU) / s^{n+1}
        total += to_real(b) * mpmath.gammainc(n + 1, 0, s * upper) / s ** (n + 1)
    return total / z


def _pade(coeffs, order):
    p, q = mpmath.pade([to_real(c) for c in coeffs[: 2 * order + 1]], order, order)
    return p, q


def _screen_poles(q, lo):
    roots = mpmath.polyroots(list(reversed(q)), maxsteps=200, extraprec=200) if len(q) > 1 else []
    for r in roots:
        r = mpmath.mpc(r)
        if abs(mpmath.im(r)) <= mpmath.mpf(10) ** -12 * (1 + abs(r)) and mpmath.re(r) >= lo:
            return mpmath.re(r)
    return None


def borel_sum(B: FormalSeries, z, strategy: str = "split", pade_order: int | None = None,
              split=None) -> BorelSum:
    """g(z) = (1/z) int_0^inf e^{-t/z} B(t) dt with B continued beyond its disc.

    strategy "polynomial": the truncated polynomial on the whole ray (exact
    closed form); "pade": a diagonal rational approximant on the whole ray;
    "split": the polynomial on [0, rho/2] and the rational approximant beyond,
    rho the estimated radius of B. Poles on the ray raise :class:`PoleOnAxis`
    after lower approximant orders have been screened.
    """
    zz = _as_number(z)
    if not mpmath.re(1 / zz) > 0:
        raise DomainError("Laplace integral needs Re(1/z) > 0")
    coeffs = list(B.coefficients)
    if strategy == "polynomial":
        return BorelSum(_laplace_polynomial_exact(coeffs, zz), mpmath.mpf(0), strategy, None)
    if strategy not in ("pade", "split"):
        raise DomainError(f"unknown continuation strategy {strategy!r}")
    rho = estimated_radius(B)
    cut = mpmath.mpf(0) if strategy == "pade" else (to_real(split) if split is not None else rho / 2)
    s_re = mpmath.re(1 / zz)
    if strategy == "split" and (cut == mpmath.inf or s_re * cut > mpmath.mp.prec * mpmath.log(2) + 10):
        head = _laplace_polynomial_exact(coeffs, zz, None if cut == mpmath.inf else cut)
        return BorelSum(head, mpmath.mpf(0), "polynomial", cut)
    order = pade_order or (len(coeffs) - 1) // 2
    if order < 1:
        # too short for a rational approximant: the polynomial is its own continuation
        return BorelSum(_laplace_polynomial_exact(coeffs, zz), mpmath.mpf(0), "polynomial", None)
    last_pole = None
    while order >= 1:
        try:
            p, q = _pade(coeffs, order)
        except ZeroDivisionError:
            # degenerate table entry: the series is rational of lower degree
            order -= 1
            continue
        pole = _screen_poles(q, cut)
        if pole is None:
            break
        last_pole = pole
        order -= 1
    else:
        if last_pole is None:
            # every table entry degenerate: the stored polynomial is its own continuation
            return BorelSum(_laplace_polynomial_exact(coeffs, zz), mpmath.mpf(0), "polynomial", None)
        raise PoleOnAxis(f"rational continuation has a pole on the ray at t = {mpmath.nstr(last_pole, 8)}", last_pole)

    def integrand(t):
        return mpmath.exp(-t / zz) * mpmath.polyval(list(reversed(p)), t) / mpmath.polyval(list(reversed(q)), t)

    head = _laplace_polynomial_exact(coeffs, zz, cut) if cut > 0 else mpmath.mpf(0)
    tail, err = mpmath.quad(integrand, [cut, cut + 1 / s_re, mpmath.inf], error=True)
    return BorelSum(head + tail / zz, abs(err / zz), strategy, cut)


# ---------------------------------------------------------------------------
# factorial remainder certificates
# ---------------------------------------------------------------------------

def sigma_grid(per_decade: int = 32, lo_exp: int = -3, hi_exp: int = 3) -> list:
    steps = per_decade * (hi_exp - lo_exp)
    return [mpmath.mpf(10) ** (lo_exp + mpmath.mpf(i) / per_decade) for i in range(steps + 1)]


@dataclass
class SokalCertificate:
    R: object
    A: object
    sigma: object
    samples: list
    verdict: str
    growth_exponent: object = None
    flags: list = field(default_factory=list)

    def bound_holds(self) -> bool:
        """|R_N(z)| <= A sigma^N N! |z|^N on every sample."""
        slack = 1 + mpmath.mpf(2) ** (20 - mpmath.mp.prec)
        return all(r <= self.A * self.sigma ** N * math.factorial(N) * abs(z) ** N * slack for z, N, r in self.samples)


def remainders_from_function(series: FormalSeries, f: Callable) -> Callable:
    """R_N(z) = f(z) - sum_{k<N} a_k z^k."""
    cache = {}

    def source(z, N):
        zz = _as_number(z)
        key = (mpmath.re(zz), mpmath.im(zz))
        if key not in cache:
            cache[key] = f(zz)
        return cache[key] - series.partial_sum(zz, N)

    return source


def _growth_exponent(points):
    """Least-squares gamma in ln r_N = a + b N + gamma ln N!."""
    if len(points) < 4:
        return None
    X = mpmath.matrix([[1, N, mpmath.log(mpmath.factorial(N))] for N, _ in points])
    Y = mpmath.matrix([y for _, y in points])
    sol, _ = mpmath.qr_solve(X, Y)
    return sol[2]


def sokal_certificate(series: FormalSeries, remainder_source: Callable, R, N_max: int,
                      samples: Sequence, sigmas: Sequence | None = None, A_ceiling=mpmath.mpf(10) ** 6,
                      growth_limit=mpmath.mpf(1) / 2) -> SokalCertificate:
    """Fit |R_N(z)| <= A sigma^N N! |z|^N over the samples and 0 <= N <= N_max.

    A finite sample always admits some (A, sigma), so the verdict also asks that
    the normalized remainders r_N = |R_N|/(N! |z|^N) show no surplus factorial
    growth (fitted exponent of ln N! at most ``growth_limit``) and that the
    fitted sigma is not pinned to the top of the grid.
    """
    sigmas = list(sigmas) if sigmas is not None else sigma_grid()
    flags = []
    rows = []
    for z in samples:
        zz = _as_number(z)
        if isinstance(z, ComplexCoupling) and not z.inside_circle(R):
            raise DomainError(f"sample {z} lies outside the circle of diameter {R}")
        if not isinstance(z, ComplexCoupling) and not mpmath.re(1 / zz) > 1 / to_real(R):
            raise DomainError(f"sample {z} lies outside the circle of diameter {R}")
        for N in range(0, N_max + 1):
            rows.append((zz, N, abs(remainder_source(z, N))))
    best = None
    for s in sigmas:
        A = max((r / (s ** N * math.factorial(N) * abs(zz) ** N) for zz, N, r in rows), default=mpmath.mpf(0))
        if best is None or A < best[0] * (1 - mpmath.mpf(10) ** -12):
            best = (A, s)
    A, sigma = best
    gamma = None
    for zz in {row[0] for row in rows}:
        pts = [(N, mpmath.log(r / (math.factorial(N) * abs(zz) ** N))) for z2, N, r in rows if z2 == zz and N >= 1 and r > 0]
        g = _growth_exponent(pts)
        if g is not None:
            gamma = g if gamma is None else max(gamma, g)
    consistent = A <= to_real(A_ceiling)
    if not consistent:
        flags.append("A above ceiling")
    if gamma is not None and gamma > to_real(growth_limit):
        consistent = False
        flags.append("super-factorial remainder growth")
    if sigma == sigmas[-1] and len(sigmas) > 1:
        consistent = False
        flags.append("sigma at grid edge")
    return SokalCertificate(R, A, sigma, rows, "consistent" if consistent else "inconclusive", gamma, flags)


# ---------------------------------------------------------------------------
# the gt two-point function and asymptoticity
# ---------------------------------------------------------------------------

def two_point_series(gexp) -> FormalSeries:
    """sum_m c_m gt^m at eps = 0 as a formal series (a_0 = 0)."""
    return FormalSeries((gexp.c[0] * 0,) + tuple(gexp.c), "gt")


def two_point_of_coupling(coeffs) -> Callable:
    """F_2(mu_max, gt) at fixed b: gt sum_q (b_q/q) / (1 + (gt/q)^q), gt real or complex."""
    b = [to_real(coeffs[q]) for q in range(1, coeffs.q_max + 1)]

    def f(z):
        zz = _as_number(z)
        return zz * mpmath.fsum(bq / q / (1 + (zz / q) ** q) for q, bq in enumerate(b, start=1))

    return f


@dataclass
class AsymptoticityRow:
    gtilde: object
    K: int
    error: object
    scaled: object
    normalized: object


@dataclass
class AsymptoticityTable:
    n: int
    rows: list
    slopes: dict
    constant: object

    def column_names(self) -> list:
        return ["gtilde", "K", "error", "scaled", "normalized"]


def asymptoticity_check(n: int, K_range: Sequence, gtilde_list: Sequence, coeffs, gexp) -> AsymptoticityTable:
    """E_K(gt) = |f_n(1/gt) - sum_{j<=K} gt^j f_{n,j}(eps = 0)| with b held fixed.

    Reports E_K, E_K / gt^{K+1}, the factorial-normalized ratio and, per K,
    the log-log slope of E_K against gt.
    """
    from .flow import loglog_slope, propagate_jets

    if min(K_range) < 1:
        raise DomainError("the expansion starts at order 1; K must be >= 1")
    rows = []
    for g in gtilde_list:
        gr = to_real(g)
        mu = 1 / gr
        sol = propagate_jets(coeffs, mu, n, n // 2)
        fn = sol.value(n, mu)
        for K in K_range:
            partial = sum((gr ** j * to_real(gexp.f_poly(n, j)[0]) for j in range(1, K + 1)), mpmath.mpf(0))
            E = abs(fn - partial)
            scaled = E / gr ** (K + 1)
            norm = (scaled * math.factorial(n - 1) / math.factorial(n + K)) ** (mpmath.mpf(1) / (K + n))
            rows.append(AsymptoticityRow(g, K, E, scaled, norm))
    slopes = {}
    for K in K_range:
        sel = [r for r in rows if r.K == K]
        if len(sel) >= 2 and all(r.error > 0 for r in sel):
            slopes[K] = loglog_slope([r.gtilde for r in sel], [r.error for r in sel])
    constant = max(r.normalized for r in rows)
    return AsymptoticityTable(n, rows, slopes, constant)
