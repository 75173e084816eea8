"""Renormalized perturbation theory for the mean-field hierarchy.

Two expansions live here:

* the alpha-space amplitudes A_{n,j}(alpha), computed exactly in the
  log-Laurent ring with alpha0 kept symbolic;
* the expansion of the non-perturbative solution in gt = 1/mu_max, whose
  coefficients f_{n,j} are polynomials in eps = mu_max - mu.

Remainders Delta f_n^{K+1} are obtained by subtraction and, independently,
by the remainder flow that starts from the two-point remainders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import mpmath

from .combinatorics import binomial, faa_di_bruno_jet
from .numerics import (
    DomainError,
    Jet,
    LogLaurentPoly,
    antiderivative,
    exact,
    is_exact,
    less_equal,
    llp_sum,
    mpq,
    polynomial_jet,
    to_real,
)

# ---------------------------------------------------------------------------
# renormalization constants and alpha-space amplitudes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RenormalizationConstants:
    """Values of A_{2,j} and A_{4,j} at alpha_max = 1, for j = 1, 2, ..."""

    two_point: tuple
    four_point: tuple

    def __post_init__(self):
        object.__setattr__(self, "two_point", tuple(exact(v) for v in self.two_point))
        object.__setattr__(self, "four_point", tuple(exact(v) for v in self.four_point))

    @classmethod
    def bphz(cls, j_max: int) -> "RenormalizationConstants":
        return cls((0,) * j_max, (1,) + (0,) * (j_max - 1))

    @property
    def is_bphz(self) -> bool:
        return all(v == 0 for v in self.two_point) and all(
            v == (1 if j == 0 else 0) for j, v in enumerate(self.four_point)
        )

    def value(self, n: int, j: int):
        seq = self.two_point if n == 2 else self.four_point
        if j > len(seq):
            raise DomainError(f"no renormalization constant for n={n} at order {j}")
        return seq[j - 1]


@dataclass
class PerturbativeAmplitudes:
    """A_{n,j}(alpha) for j <= j_max, keyed (n, j) with n even, 2 <= n <= 2j + 2."""

    table: dict
    j_max: int
    renorm_constants: RenormalizationConstants
    alpha0: object = None

    def amplitude(self, n: int, j: int) -> LogLaurentPoly:
        if n % 2 or n < 2 or j < 1 or n > 2 * j + 2:
            return LogLaurentPoly()
        if j > self.j_max:
            raise DomainError(f"order {j} exceeds j_max = {self.j_max}")
        return self.table[(n, j)]

    def flow_rhs(self, n: int, j: int) -> LogLaurentPoly:
        """n(n+1)/(2 alpha^2) A_{n+2,j} - (n/2) sum A_{n1,j1} A_{n2,j2}."""
        lin = self.amplitude(n + 2, j).shift_alpha_power(-2) * mpq(n * (n + 1), 2)
        quad = []
        for j1 in range(1, j):
            j2 = j - j1
            for n1 in range(2, n + 1, 2):
                n2 = n + 2 - n1
                if n1 > 2 * j1 + 2 or n2 > 2 * j2 + 2:
                    continue
                quad.append(self.amplitude(n1, j1) * self.amplitude(n2, j2))
        return lin - llp_sum(quad) * mpq(n, 2)

    def flow_residual(self, n: int, j: int) -> LogLaurentPoly:
        """d/dalpha A_{n,j} minus the right side of the flow; the zero element when consistent."""
        return self.amplitude(n, j).derivative() - self.flow_rhs(n, j)

    def boundary_residuals(self) -> dict:
        """Boundary values minus their prescribed data, all exact."""
        out = {}
        for (n, j), amp in self.table.items():
            if n in (2, 4):
                out[(n, j)] = amp.substitute_alpha("one") - self.renorm_constants.value(n, j)
            else:
                out[(n, j)] = amp.substitute_alpha("alpha0")
        return out

    def evaluate(self, n: int, j: int, alpha, derivative: int = 0):
        amp = self.amplitude(n, j)
        for _ in range(derivative):
            amp = amp.derivative()
        return amp.evaluate(alpha, self.alpha0)


def _check_ring(P: LogLaurentPoly, where) -> None:
    for key in P.terms:
        if not all(isinstance(v, int) for v in key) or key[1] < 0 or key[3] < 0:
            raise AssertionError(f"ring closure violated in {where}: key {key}")


def alpha_flow(j_max: int, renorm_constants: RenormalizationConstants | None = None,
               alpha0=None) -> PerturbativeAmplitudes:
    """Integrate the perturbative flow order by order in j.

    For n >= 6 the amplitude vanishes at alpha0 and is integrated upward; for
    n in {2, 4} it is fixed at alpha = 1 and integrated downward as
    A(alpha) = constant - [P(1) - P(alpha)] with P an antiderivative.
    """
    if j_max < 1:
        raise DomainError("j_max must be at least 1")
    consts = renorm_constants or RenormalizationConstants.bphz(j_max)
    if len(consts.two_point) < j_max or len(consts.four_point) < j_max:
        raise DomainError("renormalization constants are shorter than j_max")
    if alpha0 is not None and not (less_equal(0, alpha0) and alpha0 != 0 and less_equal(alpha0, 1) and alpha0 != 1):
        raise DomainError("alpha0 must lie in (0, 1)")
    amps = PerturbativeAmplitudes({}, j_max, consts, alpha0)
    for j in range(1, j_max + 1):
        for n in range(2 * j + 2, 0, -2):
            P = antiderivative(amps.flow_rhs(n, j))
            if n >= 6:
                A = P - P.substitute_alpha("alpha0")
            else:
                A = LogLaurentPoly.constant(consts.value(n, j)) - (P.substitute_alpha("one") - P)
            _check_ring(A, (n, j))
            amps.table[(n, j)] = A
    return amps


def _alpha_at(alpha0, mu):
    if is_exact(alpha0) and is_exact(mu) and mu == 0:
        return exact(alpha0)
    return to_real(alpha0) * mpmath.exp(to_real(mu))


def to_mu(amps: PerturbativeAmplitudes, n: int, j: int, mu, order: int = 0) -> Jet:
    """Jet in mu of f_{n,j} = alpha^{2-n/2} A_{n,j} with alpha = alpha0 e^mu."""
    if (n, j) not in amps.table and not (n > 2 * j + 2 or n % 2):
        raise DomainError(f"amplitude ({n}, {j}) not in the table")
    if amps.alpha0 is None:
        raise DomainError("evaluation in mu needs a numeric alpha0")
    outer = amps.amplitude(n, j).shift_alpha_power(2 - n // 2)
    alpha = _alpha_at(amps.alpha0, mu)
    derivs = []
    P = outer
    for _ in range(order + 1):
        derivs.append(P.evaluate(alpha, amps.alpha0) if P else alpha * 0)
        P = P.derivative()
    inner = Jet(mu, [alpha] * (order + 1))
    return faa_di_bruno_jet(Jet(alpha, derivs), inner)


def log_integral_sides(s: int, l: int, alpha, alpha0) -> tuple:
    """(lhs, rhs) of sum_lambda 2^-lambda/lambda! int_{alpha0}^{alpha} a^{s-1}(1 - ln a)^lambda da
    <= (2 alpha^s / s) sum_lambda (1 - ln alpha)^lambda / (2^lambda lambda!), with the
    integrals done exactly in the log-Laurent ring."""
    if s < 1 or l < 0:
        raise DomainError("needs s >= 1 and l >= 0")
    lhs_poly = LogLaurentPoly()
    for lam in range(l + 1):
        # (1 - ln a)^lam = sum_i C(lam, i) (-ln a)^i
        integrand = LogLaurentPoly({(s - 1, i): mpq((-1) ** i * math.comb(lam, i)) for i in range(lam + 1)})
        P = antiderivative(integrand)
        lhs_poly = lhs_poly + (P - P.substitute_alpha("alpha0")) * mpq(1, 2 ** lam * math.factorial(lam))
    lhs = to_real(lhs_poly.evaluate(alpha, alpha0))
    log_term = 1 - mpmath.log(to_real(alpha))
    rhs = 2 * to_real(alpha) ** s / s * sum(log_term ** lam / (2 ** lam * math.factorial(lam)) for lam in range(l + 1))
    return lhs, rhs


# ---------------------------------------------------------------------------
# expansion in gt = 1 / mu_max
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


def _pmul(a, b):
    if not a or not b:
        return []
    out = [a[0] * 0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for k, y in enumerate(b):
            out[i + k] = out[i + k] + x * y
    return out


def _pderiv(a):
    return [i * a[i] for i in range(1, len(a))]


@dataclass
class GTildeExpansion:
    """f_2(mu) = sum_m c_m mu^{-m} re-expanded in gt at fixed mu_max.

    a_m(eps) = sum_{a=1}^{m} c_a C(m-1, a-1) eps^{m-a}, eps = mu_max - mu.
    ``c[m-1]`` holds c_m; c_1 carries a tail bound, the others are finite sums.
    """

    c: tuple
    mu_max: object
    c1_tail_bound: object = 0
    certified: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m_max(self) -> int:
        return len(self.c)

    @property
    def gtilde(self):
        return 1 / to_real(self.mu_max) if not is_exact(self.mu_max) else mpq(1) / self.mu_max

    def a_poly(self, m: int) -> list:
        """Coefficients of a_m in powers of eps."""
        if not 1 <= m <= self.m_max:
            raise DomainError(f"a_{m} needs c_1..c_{m}; only {self.m_max} available")
        out = [self.c[0] * 0] * m
        for a in range(1, m + 1):
            out[m - a] = self.c[a - 1] * binomial(m - 1, a - 1)
        return out

    def a(self, m: int, mu):
        eps = _eps(self.mu_max, mu)
        return _peval(self.a_poly(m), eps)

    def gt_envelope_constant(self):
        """C_3 = max_m |c_m| over the computed range."""
        return max(abs(to_real(v)) for v in self.c)

    def gt_envelope_violations(self, mu_points: Sequence) -> list:
        """(m, mu) where |a_m| > C_3 (1 + eps)^{m-1} or |d a_m/dmu| > C_3 (m-1)(1+eps)^{m-2}."""
        C3 = self.gt_envelope_constant()
        bad = []
        for mu in mu_points:
            eps = to_real(_eps(self.mu_max, mu))
            for m in range(1, self.m_max + 1):
                p = [to_real(v) for v in self.a_poly(m)]
                val = abs(_peval(p, eps))
                der = abs(_peval(_pderiv(p), eps)) if m > 1 else mpmath.mpf(0)
                slack = 1 + mpmath.mpf(2) ** (20 - mpmath.mp.prec)
                if val > C3 * (1 + eps) ** (m - 1) * slack:
                    bad.append((m, mu, "value"))
                if m > 1 and der > C3 * (m - 1) * (1 + eps) ** (m - 2) * slack:
                    bad.append((m, mu, "derivative"))
        return bad

    def f_poly(self, n: int, j: int) -> list:
        """f_{n,j} as a polynomial in eps, from the flow applied order by order."""
        if n % 2 or n < 2:
            raise DomainError("n must be even and >= 2")
        if not 1 <= j <= self.m_max:
            raise DomainError(f"order {j} outside 1..{self.m_max}")
        key = (n, j)
        if key in self._cache:
            return self._cache[key]
        if n == 2:
            out = self.a_poly(j)
        else:
            m = n - 2
            quad = []
            for j1 in range(1, j):
                for n1 in range(2, m + 1, 2):
                    quad = _padd(quad, _pmul(self.f_poly(n1, j1), self.f_poly(m + 2 - n1, j - j1)))
            fm = self.f_poly(m, j)
            out = _padd(_pscale(quad, mpq(1, m + 1)), _pscale(fm, mpq(m - 4, m * (m + 1))))
            out = _padd(out, _pscale(_pderiv(fm), -mpq(2, m * (m + 1))))
        self._cache[key] = out
        return out

    def z_series(self, n: int) -> list:
        """phi_{n,m}, m = 1..m_max: the power series of f_n in z = 1/mu."""
        key = ("z", n)
        if key in self._cache:
            return self._cache[key]
        if n == 2:
            out = list(self.c)
        else:
            m0 = n - 2
            zero = self.c[0] * 0
            prev = {k: self.z_series(k) for k in range(2, m0 + 1, 2)}
            out = []
            for m in range(1, self.m_max + 1):
                s = zero
                for n1 in range(2, m0 + 1, 2):
                    a, b = prev[n1], prev[m0 + 2 - n1]
                    for m1 in range(1, m):
                        s = s + a[m1 - 1] * b[m - m1 - 1]
                v = s * mpq(1, m0 + 1) + prev[m0][m - 1] * mpq(m0 - 4, m0 * (m0 + 1))
                if m >= 2:
                    v = v - prev[m0][m - 2] * mpq(2 * (m - 1), m0 * (m0 + 1))
                out.append(v)
        self._cache[key] = out
        return out

    def f_poly_from_z(self, n: int, j: int) -> list:
        """f_{n,j}(eps) = sum_a phi_{n,a} C(j-1, a-1) eps^{j-a}."""
        phi = self.z_series(n)
        out = [phi[0] * 0] * j
        for a in range(1, j + 1):
            out[j - a] = phi[a - 1] * binomial(j - 1, a - 1)
        return out

    def f_jet(self, n: int, j: int, mu, order: int = 0) -> Jet:
        """Jet in mu of f_{n,j}; d/dmu = -d/deps."""
        eps = _eps(self.mu_max, mu)
        pj = polynomial_jet(eps, self.f_poly(n, j), order)
        return Jet(mu, [d if l % 2 == 0 else -d for l, d in enumerate(pj.derivs)])

    def partial_sum(self, n: int, K: int, mu, gtilde=None):
        g = self.gtilde if gtilde is None else gtilde
        eps = _eps(self.mu_max, mu)
        return sum((g ** j * _peval(self.f_poly(n, j), eps) for j in range(1, K + 1)), to_real(0) * 0)

    def four_point_constants(self, j_max: int) -> tuple:
        """f_{4,j}(mu_max), the four-point renormalization constants this expansion implies."""
        return tuple(self.f_poly(4, j)[0] for j in range(1, j_max + 1))


def _eps(mu_max, mu):
    if is_exact(mu_max) and is_exact(mu):
        return exact(mu_max) - exact(mu)
    return to_real(mu_max) - to_real(mu)


def _peval(p, x):
    acc = p[-1] * 0 if p else 0
    for v in reversed(p):
        acc = acc * x + v
    return acc


def gtilde_coefficients(coeffs, mu_max, m_max: int) -> GTildeExpansion:
    """c_m for m <= m_max from b_1..b_Q.

    c_1 = sum_q b_q / q with the tail beyond Q bounded by the coefficient
    envelope; for m >= 2, c_m = sum_{q k = m-1, k >= 1} (-1)^k b_q / q^m.
    """
    Q = coeffs.q_max
    if Q < max(1, m_max - 1):
        raise DomainError(f"c_{m_max} needs b_1..b_{m_max - 1}; only {Q} available")
    b = [coeffs[q] for q in range(1, Q + 1)]
    c1 = sum((b[q - 1] / q if not is_exact(b[q - 1]) else b[q - 1] * mpq(1, q) for q in range(1, Q + 1)), b[0] * 0)
    env, certified = coeffs.envelope()
    rho = to_real(env.ratio)
    if rho >= 1:
        raise DomainError("coefficient envelope ratio is not below 1")
    qn = Q + 1
    tail = to_real(env.amplitude) * rho ** Q / mpmath.mpf(qn) ** (env.power + 1) / (1 - rho)
    tail += to_real(coeffs.rounding) * sum(abs(to_real(v)) / q for q, v in enumerate(b, start=1))
    cs = [c1]
    for m in range(2, m_max + 1):
        s = b[0] * 0
        for q in range(1, m):
            if (m - 1) % q:
                continue
            k = (m - 1) // q
            term = b[q - 1] / mpq(q) ** m if is_exact(b[q - 1]) else b[q - 1] / mpmath.mpf(q) ** m
            s = s + (term if k % 2 == 0 else -term)
        cs.append(s)
    return GTildeExpansion(tuple(cs), exact(mu_max), tail, certified)


def cross_framework_constants(gexp: GTildeExpansion, c, j_max: int) -> RenormalizationConstants:
    """A_j = c delta_{j,1} together with the four-point values f_{4,j}(mu_max) of the gt-expansion."""
    c = exact(c)
    two = (c,) + (0,) * (j_max - 1)
    four = tuple(exact(v) for v in gexp.four_point_constants(j_max))
    return RenormalizationConstants(two, four)


# ---------------------------------------------------------------------------
# remainders
# ---------------------------------------------------------------------------

@dataclass
class RemainderTable:
    """Jets of Delta f_n^{K+1} keyed (n, K, mu)."""

    delta: dict
    coupling: object
    provenance: str

    def __post_init__(self):
        if self.provenance not in ("subtraction", "remainder_flow"):
            raise DomainError(f"unknown provenance {self.provenance!r}")


def remainder_by_subtraction(n: int, K: int, mu, gtilde, solution, gexp: GTildeExpansion,
                             order: int | None = None) -> Jet:
    """(f_n - sum_{j<=K} gt^j f_{n,j}) / gt^{K+1} as a jet at mu."""
    if not gtilde > 0:
        raise DomainError("the coupling must be positive")
    fn = solution.jets[(n, mu)]
    L = fn.order if order is None else min(order, fn.order)
    acc = fn.truncate(L)
    g = to_real(gtilde) if not is_exact(gtilde) else gtilde
    for j in range(1, K + 1):
        acc = acc - gexp.f_jet(n, j, mu, L).scale(g ** j)
    return acc.scale(1 / g ** (K + 1))


def subtraction_table(solution, gexp: GTildeExpansion, mu, gtilde, n_max: int, K_max: int) -> RemainderTable:
    rows = {}
    for n in range(2, n_max + 1, 2):
        for K in range(0, K_max + 1):
            rows[(n, K, mu)] = remainder_by_subtraction(n, K, mu, gtilde, solution, gexp)
    return RemainderTable(rows, gtilde, "subtraction")


def remainder_flow(delta_f2: Mapping, gexp: GTildeExpansion, solution, mu, n_max: int, K: int,
                   gtilde=None) -> RemainderTable:
    """Delta f_n^{S} for 4 <= n <= n_max and S <= K + 1 from the two-point tower.

    Delta f_{n+2}^{S} = 2/(n(n+1)) d Delta f_n^S + (n-4)/(n(n+1)) Delta f_n^S
      + 1/(n+1) sum_{n1+n2=n+2} [sum_{s<S} f_{n2,S-s} Delta f_{n1}^s + f_{n1} Delta f_{n2}^S].
    ``delta_f2`` maps S = 1..K+1 to jets of Delta f_2^S at mu.
    """
    for S in range(1, K + 2):
        if S not in delta_f2:
            raise DomainError(f"remainder flow needs the two-point remainder of order {S}")
    delta = {2: {S: delta_f2[S] for S in range(1, K + 2)}}
    full = {m: solution.jets[(m, mu)] for m in range(2, n_max + 1, 2) if (m, mu) in solution.jets}
    for m in range(2, n_max, 2):
        if m not in full:
            raise DomainError(f"remainder flow needs the full jet of f_{m}")
    L = min(j.order for j in delta[2].values())
    pert = {}

    def fj(m, j, order):
        key = (m, j)
        if key not in pert:
            pert[key] = gexp.f_jet(m, j, mu, L)
        return pert[key].truncate(order)

    for m in range(2, n_max, 2):
        nxt = {}
        order = min(d.order for d in delta[m].values()) - 1
        if order < 0:
            raise DomainError(f"jet order exhausted before n = {m + 2}; raise the two-point jet order")
        for S in range(1, K + 2):
            d = delta[m][S]
            acc = d.derivative().truncate(order).scale(mpq(2, m * (m + 1)))
            acc = acc + d.truncate(order).scale(mpq(m - 4, m * (m + 1)))
            quad = None
            for n1 in range(2, m + 1, 2):
                n2 = m + 2 - n1
                t = full[n1].truncate(order) * delta[n2][S].truncate(order)
                for s in range(1, S):
                    t = t + fj(n2, S - s, order) * delta[n1][s].truncate(order)
                quad = t if quad is None else quad + t
            nxt[S] = acc + quad.scale(mpq(1, m + 1))
        delta[m + 2] = nxt
    g = gexp.gtilde if gtilde is None else gtilde
    rows = {(m, S - 1, mu): jet for m, tower in delta.items() if m >= 4 for S, jet in tower.items()}
    return RemainderTable(rows, g, "remainder_flow")


def telescoping_defect(n: int, K: int, mu, gtilde, table: RemainderTable, gexp: GTildeExpansion):
    """|gt^{K+1} D^{K+1} - gt^{K+2} D^{K+2} - gt^{K+1} f_{n,K+1}| at mu (value level)."""
    g = to_real(gtilde)
    d1 = to_real(table.delta[(n, K, mu)].value)
    d2 = to_real(table.delta[(n, K + 1, mu)].value)
    f = to_real(gexp.f_jet(n, K + 1, mu, 0).value)
    return abs(g ** (K + 1) * d1 - g ** (K + 2) * d2 - g ** (K + 1) * f)


def normalized_remainder_ratio(value, n: int, K: int):
    """(|Delta f_n^{K+1}| (n-1)! / (n+K)!)^{1/(K+n)}."""
    r = abs(to_real(value)) * math.factorial(n - 1) / math.factorial(n + K)
    return r ** (mpmath.mpf(1) / (K + n))


# ---------------------------------------------------------------------------
# bound certificates
# ---------------------------------------------------------------------------

@dataclass
class BoundFit:
    """Minimal constant C >= 1 with |value| <= C^exponent * shape over the sampled range."""

    family: str
    constant: object
    samples: int
    worst: tuple | None
    growing_at_edge: bool
    zero_exponent_ok: bool = True

    @property
    def finite(self) -> bool:
        return bool(mpmath.isfinite(self.constant))


class _Fit:
    def __init__(self, family):
        self.family = family
        self.best = mpmath.mpf(1)
        self.worst = None
        self.count = 0
        self.by_order: dict = {}
        self.zero_ok = True

    def add(self, order_index, key, value, shape, exponent):
        self.count += 1
        value = abs(to_real(value))
        shape = to_real(shape)
        if value == 0:
            C = mpmath.mpf(0)
        elif exponent == 0:
            if value > shape * (1 + mpmath.mpf(2) ** (30 - mpmath.mp.prec)):
                self.zero_ok = False
            C = mpmath.mpf(0)
        else:
            C = (value / shape) ** (mpmath.mpf(1) / exponent)
        self.by_order[order_index] = max(self.by_order.get(order_index, mpmath.mpf(0)), C)
        if C > self.best:
            self.best = C
            self.worst = key

    def result(self) -> BoundFit:
        growing = False
        if len(self.by_order) >= 2:
            orders = sorted(self.by_order)
            last, prev = self.by_order[orders[-1]], max(self.by_order[o] for o in orders[:-1])
            growing = bool(last > prev)
        if not mpmath.isfinite(self.best):
            raise AssertionError(f"{self.family}: fitted constant is not finite")
        return BoundFit(self.family, self.best, self.count, self.worst, growing, self.zero_ok)


def certificate_grid(mu_max, points: int = 9, width=mpq(1, 2)) -> list:
    """Equispaced rational points of [mu_max - width, mu_max]."""
    mu_max = exact(mu_max)
    return [mu_max - width + width * mpq(i, points - 1) for i in range(points)]


def _lambda_sum(top: int, x):
    return sum((x ** lam / (2 ** lam * math.factorial(lam)) for lam in range(top + 1)), mpmath.mpf(0))


def bound_certificates(amps: PerturbativeAmplitudes | None = None,
                       remainders: RemainderTable | None = None,
                       window=None, mu_max=None, n_top: int = 10, j_top: int | None = None,
                       k_top: int = 3) -> dict:
    """Minimal constants for the amplitude, coefficient and remainder bounds.

    ``window`` is a list of mu points inside [mu_max - 1/2, mu_max]; alpha = e^{mu - mu_max}.
    Families: "alpha_window" (derivative bounds on the alpha window), "alpha_log"
    (bounds carrying the (1 - ln alpha) sums), "mu_window" (mu-derivatives of f_{n,j}),
    "mu_log" (the same with the log sums), "remainder" (Delta f_n^{K+1}).
    """
    report = {}
    if amps is not None:
        if mu_max is None:
            if amps.alpha0 is None:
                raise DomainError("certificates need mu_max or a numeric alpha0")
            mu_max = -mpmath.log(to_real(amps.alpha0))
        window = window if window is not None else certificate_grid(mu_max)
        lo = to_real(mu_max) - mpmath.mpf(1) / 2
        for mu in window:
            if to_real(mu) < lo - mpmath.mpf(10) ** -30 or to_real(mu) > to_real(mu_max) + mpmath.mpf(10) ** -30:
                raise DomainError("certificate window must lie in [mu_max - 1/2, mu_max]")
        report.update(_amplitude_fits(amps, window, mu_max, n_top, j_top or amps.j_max, k_top))
    if remainders is not None:
        fit = _Fit("remainder")
        for (n, K, mu), jet in remainders.delta.items():
            for l, v in enumerate(jet.derivs):
                shape = mpmath.mpf(math.factorial(n + K + l)) / math.factorial(n - 1)
                fit.add(K, (n, K, l, mu), v, shape, K + n + l - 1)
        report["remainder"] = fit.result()
    return report


def _amplitude_fits(amps, window, mu_max, n_top, j_top, k_top) -> dict:
    fits = {name: _Fit(name) for name in ("alpha_window", "alpha_log", "mu_window", "mu_log")}
    mu_max_r = to_real(mu_max)
    for mu in window:
        alpha = mpmath.exp(to_real(mu) - mu_max_r)
        log_term = 1 - mpmath.log(alpha)
        for j in range(1, j_top + 1):
            for n in range(2, min(n_top, 2 * j + 2) + 1, 2):
                h = n // 2
                amp = amps.amplitude(n, j)
                base = mpmath.mpf(h * h * math.factorial(h))
                derivs = []
                P = amp
                for k in range(k_top + 1):
                    derivs.append(P.evaluate(alpha, amps.alpha0) if P else mpmath.mpf(0))
                    P = P.derivative()
                # window bounds in alpha
                for k, v in enumerate(derivs):
                    if k == 0:
                        shape = alpha ** (mpmath.mpf(n) / 2 - 2) * math.factorial(j) / base
                        expo = mpmath.mpf(j) - mpmath.mpf(n) / 4
                    else:
                        shape = (alpha ** (mpmath.mpf(n) / 2 - 2 - k) * math.factorial(j + k + 1)
                                 / ((k + 1) ** 2 * base))
                        expo = mpmath.mpf(j) - mpmath.mpf(n) / 4 + k
                    fits["alpha_window"].add(j, (n, j, k, mu), v, shape, expo)
                # log-sum bounds in alpha
                for k, v in enumerate(derivs):
                    fact = math.factorial(j) if k == 0 else math.factorial(j + k + 1)
                    kk = 1 if k == 0 else (k + 1) ** 2
                    if n == 2:
                        shape = fact / (alpha ** (k + 1) * (j + 1) ** 2 * kk) * _lambda_sum(j - 1, log_term)
                        expo = mpmath.mpf(j) - mpmath.mpf(1) / 2 + k
                    else:
                        top = j - h + 1
                        shape = (alpha ** (mpmath.mpf(n) / 2 - 2 - k) * fact
                                 / ((j - h + 2) ** 2 * kk * base) * _lambda_sum(top, log_term))
                        expo = mpmath.mpf(j) - mpmath.mpf(n) / 4 + k
                    fits["alpha_log"].add(j, (n, j, k, mu), v, shape, expo)
                # mu-derivatives of f_{n,j}
                jet = to_mu(amps, n, j, mu, k_top)
                theta = 1 if n >= 4 else 0
                F = _lambda_sum(j - h + theta, 1 + mu_max_r - to_real(mu))
                for m, v in enumerate(jet.derivs):
                    expo = j + h + m
                    shape = mpmath.mpf(math.factorial(j + m + 1)) / base
                    fits["mu_window"].add(j, (n, j, m, mu), v, shape, expo)
                    fits["mu_log"].add(j, (n, j, m, mu), v, shape / (j - h + 2) ** 2 * F, expo)
    return {name: fit.result() for name, fit in fits.items()}
