"""Two-point function built from the rational basis p_q, its Taylor
coefficients, certified tails, and the renormalization fixed point for b_1.

p_q(mu) = x^{q-1} / (1 + x^q) with x = q mu, f_2 = sum_q b_q p_q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import mpmath

from .numerics import (
    DomainError,
    Jet,
    PowerSeries,
    coerce_like,
    exact,
    is_exact,
    less_equal,
    mpq,
    polynomial_jet,
    quotient_jet,
    to_real,
    working_precision,
)

POLY_CONTRACTION_Q = 30


class TailToleranceError(DomainError):
    """The dropped tail cannot be pushed below the tolerance at this q_max."""


class CertificateUnavailable(DomainError):
    """No bound on the coefficients is available for the requested data."""


class NonConvergence(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class ContractionViolation(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


# ---------------------------------------------------------------------------
# coefficient envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailCertificate:
    """Proven bound |b_q| <= amplitude * ratio^{q-1} / q^power for all q.

    kind "uniform": small-data regime |b_1| <= K, 0 < g40 <= K/10, K <= 1/30,
    giving (5/2)(7/10)^{q-1} K.
    kind "binomial": g40 <= 1/300 and any b_1 with (3/4)(1 + |b_1|) < 1, giving
    (1/q)(3/4)^{q-2}(1+|b_1|)^q from the b_1-polynomial coefficient bound.
    """

    kind: str
    K: object

    @property
    def amplitude(self):
        if self.kind == "uniform":
            return mpq(5, 2) * self.K
        return mpq(4, 3) * (1 + self.K)

    @property
    def ratio(self):
        if self.kind == "uniform":
            return mpq(7, 10)
        return mpq(3, 4) * (1 + self.K)

    @property
    def power(self) -> int:
        return 0 if self.kind == "uniform" else 1

    def envelope(self, q: int):
        return self.amplitude * self.ratio ** (q - 1) / mpq(q) ** self.power

    def envelope_real(self, q: int):
        return to_real(self.amplitude) * to_real(self.ratio) ** (q - 1) / mpmath.mpf(q) ** self.power


def certify_tail(b1, g40) -> TailCertificate | None:
    """Strongest proven envelope for the coefficients generated from (b1, g40)."""
    b1, g40 = exact(b1), exact(g40)
    K = max(abs(b1), 10 * g40)
    if g40 > 0 and K <= mpq(1, 30):
        return TailCertificate("uniform", K)
    if 0 <= g40 <= mpq(1, 300) and mpq(3, 4) * (1 + abs(b1)) < 1:
        return TailCertificate("binomial", abs(b1))
    return None


@dataclass(frozen=True)
class FittedTail:
    """Empirical geometric envelope |b_q| ~ amplitude * ratio^{q-1}; not a proof."""

    amplitude: object
    ratio: object
    power: int = 0

    def envelope(self, q: int):
        return self.amplitude * self.ratio ** (q - 1)


def fit_geometric_tail(b: Sequence) -> FittedTail:
    """ratio = max over the upper half of |b_q|^{1/(q-1)}, amplitude 1."""
    Q = len(b)
    if Q < 4:
        raise DomainError("need at least four coefficients to fit a tail")
    r = max(abs(to_real(b[q - 1])) ** (mpmath.mpf(1) / (q - 1)) for q in range(Q // 2, Q + 1))
    if r >= 1:
        raise CertificateUnavailable(f"fitted ratio {mpmath.nstr(r, 6)} is not below 1")
    return FittedTail(mpmath.mpf(1), r)


def quadratic_geometric_envelope(b: Sequence, ratio=mpq(7, 10)):
    """max_q |b_q| / (q^2 ratio^q): the finite constant of a q^2 r^q envelope."""
    vals = [abs(to_real(v)) / (q * q * to_real(ratio) ** q) for q, v in enumerate(b, start=1)]
    C = max(vals)
    if not mpmath.isfinite(C):
        raise AssertionError("envelope constant is not finite")
    return C


# ---------------------------------------------------------------------------
# coefficient container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnsatzCoefficients:
    """b_1..b_{q_max} with optional tail metadata.

    ``rounding`` is a relative accuracy of the stored values (0 when exact);
    it enters every error bound built from them.
    """

    b: tuple
    q_max: int = -1
    tail_certificate: TailCertificate | None = None
    fitted_tail: FittedTail | None = None
    rounding: object = 0

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))
        if self.q_max == -1:
            object.__setattr__(self, "q_max", len(self.b))
        if self.q_max != len(self.b):
            raise DomainError("q_max must equal the number of stored coefficients")
        cert = self.tail_certificate
        if cert is not None:
            for q, v in enumerate(self.b, start=1):
                if is_exact(v):
                    ok = abs(v) <= cert.envelope(q)
                else:
                    ok = abs(v) <= cert.envelope_real(q) * (1 + to_real(self.rounding))
                if not ok:
                    raise AssertionError(f"|b_{q}| exceeds the {cert.kind} envelope")

    def __getitem__(self, q: int):
        """1-based access; b_q = 0 beyond q_max is not assumed."""
        if not 1 <= q <= self.q_max:
            raise IndexError(f"b_{q} not available (q_max = {self.q_max})")
        return self.b[q - 1]

    @property
    def certified(self) -> bool:
        return self.tail_certificate is not None

    def envelope(self):
        if self.tail_certificate is not None:
            return self.tail_certificate, True
        if self.fitted_tail is not None:
            return self.fitted_tail, False
        return fit_geometric_tail(self.b), False

    def fitted(self) -> "AnsatzCoefficients":
        """Copy carrying only the empirical tail, marked uncertified."""
        return AnsatzCoefficients(self.b, self.q_max, None, self.fitted_tail or fit_geometric_tail(self.b), self.rounding)

    def with_tail(self, b1=None, g40=None) -> "AnsatzCoefficients":
        """Attach the proven envelope for (b1, g40) when one applies."""
        cert = certify_tail(b1, g40) if b1 is not None else None
        fitted = None if cert else fit_geometric_tail(self.b)
        return AnsatzCoefficients(self.b, self.q_max, cert, fitted, self.rounding)


# ---------------------------------------------------------------------------
# basis and evaluation
# ---------------------------------------------------------------------------

def basis_jet(q: int, mu, order: int = 0) -> Jet:
    """Jet of p_q(mu) = (q mu)^{q-1} / (1 + (q mu)^q)."""
    if q < 1:
        raise DomainError("basis index q must be positive")
    if less_equal(mu, 0) and mu != 0:
        raise DomainError("basis is evaluated at mu >= 0")
    num = [0] * (q - 1) + [mpq(q) ** (q - 1)]
    den = [1] + [0] * (q - 1) + [mpq(q) ** q]
    if not is_exact(mu):
        num = [to_real(c) for c in num]
        den = [to_real(c) for c in den]
    return quotient_jet(polynomial_jet(mu, num, order), polynomial_jet(mu, den, order))


def basis_value(q: int, mu):
    """p_q(mu) written as 1/(x + x^{1-q}) to stay finite for large q mu."""
    if q == 1:
        return 1 / (1 + mu)
    if mu == 0:
        return coerce_like(0, mu)
    x = q * mu
    return 1 / (x + x ** (1 - q))


def basis_derivative_bounds(q: int, mu, order: int) -> list:
    """Bounds on |d^l p_q(mu)| for l <= order, valid for q >= 2.

    Order 0 uses |p_q| <= min(1, 1/(q mu)). Higher orders use a Cauchy
    estimate on the disc of radius mu/2, where |p_q| <= (8/3)/(q mu) once
    q mu >= 4.
    """
    mu = to_real(mu)
    out = [min(mpmath.mpf(1), 1 / (q * mu)) if mu > 0 else mpmath.mpf(1)]
    if order == 0:
        return out
    if not q * mu >= 4:
        raise TailToleranceError("derivative tail needs q mu >= 4; increase q_max")
    C = mpmath.mpf(8) / 3 / (q * mu)
    for l in range(1, order + 1):
        out.append(math.factorial(l) * (2 / mu) ** l * C)
    return out


def tail_bounds(coeffs: AnsatzCoefficients, mu, order: int = 0):
    """Bounds on |d^l sum_{q > q_max} b_q p_q(mu)| for l <= order, and a certified flag."""
    env, certified = coeffs.envelope()
    Q = coeffs.q_max
    mu_r = to_real(mu)
    if mu_r == 0:
        # d^l p_q(0) = 0 for l < q - 1, so the tail of low derivatives vanishes
        zero = mpmath.mpf(0)
        if order < Q:
            return [zero] * (order + 1), certified
        raise TailToleranceError("derivative order at mu = 0 must stay below q_max")
    rho = to_real(env.ratio)
    if rho >= 1:
        raise CertificateUnavailable("envelope ratio is not below 1")
    qn = Q + 1
    lead = to_real(env.amplitude) * rho ** (qn - 1) / qn ** env.power / (1 - rho)
    per_q = basis_derivative_bounds(qn, mu_r, order)
    # each basis bound scales like 1/q, so the first term dominates the geometric sum
    return [lead * b for b in per_q], certified


@dataclass(frozen=True)
class F2Jet:
    """Jet of f_2 at a point, with a bound on |error| valid for every derivative."""

    jet: Jet
    error_bound: object
    certified: bool


def f2_jet(coeffs: AnsatzCoefficients, mu, order: int = 0, tol=None) -> F2Jet:
    """Jet of f_2 = sum_q b_q p_q at mu, with the dropped tail bounded."""
    terms = None
    absum = mpmath.mpf(0)
    for q in range(1, coeffs.q_max + 1):
        bq = coeffs[q]
        if bq == 0:
            continue
        t = basis_jet(q, mu, order).scale(bq)
        if coeffs.rounding:
            absum += max(abs(to_real(d)) for d in t.derivs)
        terms = t if terms is None else terms + t
    if terms is None:
        zero = coerce_like(0, mu) * 0
        terms = Jet(mu, [zero] * (order + 1))
    bounds, certified = tail_bounds(coeffs, mu, order)
    err = max(bounds) + to_real(coeffs.rounding) * absum
    if tol is not None and err > to_real(tol):
        raise TailToleranceError(
            f"tail bound {mpmath.nstr(err, 5)} exceeds tol {mpmath.nstr(to_real(tol), 5)}; increase q_max"
        )
    return F2Jet(terms, err, certified)


# ---------------------------------------------------------------------------
# Taylor coefficients <-> b
# ---------------------------------------------------------------------------

def _as_sequence(coeffs) -> tuple:
    return coeffs.b if isinstance(coeffs, AnsatzCoefficients) else tuple(coeffs)


def taylor_from_b(coeffs, k_max: int) -> PowerSeries:
    """f_{2,k} = sum_{q | k+1} b_q (-1)^{(k+1)/q - 1} q^k for k <= k_max."""
    b = _as_sequence(coeffs)
    if k_max + 1 > len(b):
        raise IndexError(f"f_(2,{k_max}) needs b_{k_max + 1}; only {len(b)} available")
    out = []
    for k in range(k_max + 1):
        m = k + 1
        s = b[0] * 0
        for q in _divisors(m):
            rho = m // q
            term = b[q - 1] * q ** k
            s = s + (term if rho % 2 else -term)
        out.append(s)
    return PowerSeries(out)


def b_from_taylor(f2k, **kwargs) -> AnsatzCoefficients:
    """Inverse of :func:`taylor_from_b`: b_q from f_{2,0..q-1}."""
    f = tuple(f2k.coeffs if isinstance(f2k, PowerSeries) else f2k)
    return AnsatzCoefficients(b_sequence_from_taylor(f), **kwargs)


def b_sequence_from_taylor(f: Sequence) -> list:
    b = []
    for m in range(1, len(f) + 1):
        s = f[m - 1]
        for q in _divisors(m):
            if q == m:
                continue
            rho = m // q
            term = b[q - 1] * q ** (m - 1)
            s = s - (term if rho % 2 else -term)
        b.append(s / m ** (m - 1) if not is_exact(s) else s * mpq(1, m ** (m - 1)))
    return b


def uniform_envelope_violations(b: Sequence, K) -> list:
    """Indices q with |b_q| > (5/2)(7/10)^{q-1} K (exact comparison)."""
    K = exact(K)
    return [q for q, v in enumerate(b, start=1) if not abs(exact(v)) <= mpq(5, 2) * mpq(7, 10) ** (q - 1) * K]


def polynomial_coefficient_violations(b_poly: dict, q_top: int) -> list:
    """Pairs (q, nu) with |b_{q,nu}| > (1/q)(3/4)^{q-2} C(q, nu), b_q = sum_nu b_{q,nu} b1^nu."""
    bad = []
    for q in range(1, q_top + 1):
        poly = b_poly[q]
        if len(poly) > q + 1 and any(v != 0 for v in poly[q + 1:]):
            bad.append((q, len(poly) - 1))
        for nu, v in enumerate(poly[: q + 1]):
            if not abs(v) <= mpq(1, q) * mpq(3, 4) ** (q - 2) * math.comb(q, nu):
                bad.append((q, nu))
    return bad


def _divisors(m: int) -> list:
    small = [d for d in range(1, math.isqrt(m) + 1) if m % d == 0]
    return sorted(set(small + [m // d for d in small]))


# ---------------------------------------------------------------------------
# renormalization fixed point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RenormalizationTarget:
    """Impose f_2(mu_max) = c / mu_max with bare quartic seed g40."""

    c: object
    mu_max: object
    g40: object
    contraction_domain_a: object = mpq(1, 30)

    def __post_init__(self):
        for name in ("c", "mu_max", "g40", "contraction_domain_a"):
            object.__setattr__(self, name, exact(getattr(self, name)))
        if abs(self.c) > mpq(1, 3):
            raise DomainError("renormalization constant must satisfy |c| <= 1/3")
        if not self.mu_max > 6:
            raise DomainError("mu_max must exceed 6")
        if not self.g40 > 0:
            raise DomainError("bare quartic seed must be positive")
        if not 0 < self.contraction_domain_a <= mpq(1, 30):
            raise DomainError("contraction domain a must lie in (0, 1/30]")

    @property
    def in_contraction_regime(self) -> bool:
        """The small-seed regime g40 <= a/30 where contraction is proven on [-a, a]."""
        return self.g40 <= self.contraction_domain_a / 30


def renormalization_prefactor(x):
    """F(x) = (1 + x)(1 + 4x^2) / (1 + 2x + 6x^2)."""
    return (1 + x) * (1 + 4 * x * x) / (1 + 2 * x + 6 * x * x)


def _default_pipeline():
    from .flow import CoefficientPipeline

    return CoefficientPipeline()


@dataclass
class GMapEvaluation:
    value: object
    coefficients: AnsatzCoefficients
    tail_bound: object
    certified: bool


def g_map_detail(b1, target: RenormalizationTarget, pipeline=None, q_max: int = 60,
                 tol=mpmath.mpf("1e-25"), q_cap: int = 200, certified_only: bool = False) -> GMapEvaluation:
    """G(b1) with the q_max adaptation loop; see :func:`g_map`."""
    pipeline = pipeline or _default_pipeline()
    with working_precision(getattr(pipeline, "precision_bits", None)):
        return _g_map_detail(b1, target, pipeline, q_max, tol, q_cap, certified_only)


def _g_map_detail(b1, target, pipeline, q_max, tol, q_cap, certified_only):
    mu = to_real(target.mu_max)
    goal = to_real(tol) / 10
    q = q_max
    use_fitted = False
    while True:
        coeffs = pipeline.coefficients(b1, target.g40, q)
        if coeffs.tail_certificate is not None and not use_fitted:
            if required_q(coeffs.tail_certificate, mu, goal, q, q_cap + 1) > q_cap:
                use_fitted = True
        elif certified_only:
            raise CertificateUnavailable("no proven coefficient envelope for this b1")
        if use_fitted:
            if certified_only:
                raise CertificateUnavailable(f"proven envelope needs q_max > {q_cap}")
            coeffs = coeffs.fitted()
        s = mpmath.mpf(0)
        absum = mpmath.mpf(0)
        for qq in range(3, q + 1):
            t = to_real(coeffs[qq]) * basis_value(qq, mu)
            s += t
            absum += abs(t)
        bounds, certified = tail_bounds(coeffs, mu, 0)
        tail = bounds[0] + to_real(coeffs.rounding) * absum
        if tail < goal or q >= q_cap:
            break
        q = min(q_cap, max(q + 10, required_q(coeffs.envelope()[0], mu, goal, q, q_cap)))
    b1r = to_real(b1)
    g40 = to_real(target.g40)
    F = renormalization_prefactor(mu)
    val = F * (to_real(target.c) / mu - (3 * g40 - b1r * b1r) * mu / (1 + 4 * mu * mu) - s)
    return GMapEvaluation(val, coeffs, F * tail, certified)


def required_q(env, mu, goal, q_from: int, q_cap: int) -> int:
    """Smallest Q >= q_from whose order-0 envelope tail at mu is below goal (or q_cap)."""
    rho = to_real(env.ratio)
    A = to_real(env.amplitude)
    mu = to_real(mu)
    for Q in range(q_from, q_cap + 1):
        qn = Q + 1
        if A * rho ** Q / qn ** env.power * min(1, 1 / (qn * mu)) / (1 - rho) < goal:
            return Q
    return q_cap


def g_map(b1, target: RenormalizationTarget, pipeline=None, **kwargs):
    """G(b1) = F(mu)[c/mu - (3 g40 - b1^2) mu/(1+4mu^2) - sum_{q>=3} b_q p_q(mu)] at mu = mu_max.

    Fixed points of G are exactly the b1 with f_2(mu_max) = c / mu_max. The
    b_q for q >= 3 are regenerated from b1 on every call.
    """
    return g_map_detail(b1, target, pipeline, **kwargs).value


@dataclass
class PicardTrace:
    iterates: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    residual: object = None
    coefficients: AnsatzCoefficients | None = None
    certified: bool = False
    in_contraction_regime: bool = False

    @property
    def ratios(self) -> list:
        return [self.deltas[i + 1] / self.deltas[i] for i in range(len(self.deltas) - 1) if self.deltas[i] != 0]


class PicardResult(NamedTuple):
    b1_star: object
    trace: PicardTrace


def picard_fixed_point(target: RenormalizationTarget, tol=mpmath.mpf("1e-25"), max_iter: int = 100,
                       u0=0, pipeline=None, q_max: int = 60) -> PicardResult:
    """Iterate u_{n+1} = G(u_n) until |u_{n+1} - u_n| < tol."""
    pipeline = pipeline or _default_pipeline()
    with working_precision(getattr(pipeline, "precision_bits", None)):
        return _picard(target, tol, max_iter, u0, pipeline, q_max)


def _picard(target, tol, max_iter, u0, pipeline, q_max):
    tol = to_real(tol)
    trace = PicardTrace(in_contraction_regime=target.in_contraction_regime)
    u = to_real(u0)
    trace.iterates.append(u)
    growing = 0
    for _ in range(max_iter):
        ev = g_map_detail(u, target, pipeline, q_max=q_max, tol=tol)
        q_max = ev.coefficients.q_max
        nxt = +ev.value
        delta = abs(nxt - u)
        if trace.deltas and delta > trace.deltas[-1]:
            growing += 1
        else:
            growing = 0
        trace.deltas.append(delta)
        trace.iterates.append(nxt)
        u = nxt
        if growing >= 3:
            raise ContractionViolation("Picard deltas grew for three consecutive steps", trace)
        if delta < tol:
            check = g_map_detail(u, target, pipeline, q_max=q_max, tol=tol)
            trace.residual = abs(check.value - u)
            trace.coefficients = check.coefficients
            trace.certified = check.certified
            if trace.residual >= tol:
                raise NonConvergence("post-check |G(b1*) - b1*| >= tol", trace)
            return PicardResult(u, trace)
    raise NonConvergence(f"no convergence in {max_iter} iterations", trace)


@dataclass(frozen=True)
class ContractionBound:
    """|dG/db1| from exact polynomial coefficients plus a proven tail bound."""

    value: object
    truncated_value: object
    tail_bound: object
    certified: bool

    def __lt__(self, other):
        return self.value < other

    def __float__(self):
        return float(self.value)


def contraction_certificate(b1, target: RenormalizationTarget, poly_system=None,
                            q_poly: int = POLY_CONTRACTION_Q) -> ContractionBound:
    """|dG/db1| = F |2 b1 mu/(1+4mu^2) - sum_{q>=3} (db_q/db1) p_q(mu)|.

    The sum runs over the exact b1-polynomials up to q_poly; beyond it
    |db_q/db1| <= (3/4)^{q-2} (1+|b1|)^{q-1} bounds the rest.
    """
    if poly_system is None:
        from .flow import polynomial_taylor_system

        poly_system = polynomial_taylor_system(target.g40, 4, q_poly - 2)
    mu = to_real(target.mu_max)
    b1r = to_real(b1)
    s = mpmath.mpf(0)
    q_top = min(q_poly, max(poly_system.b_poly))
    for q in range(3, q_top + 1):
        poly = poly_system.b_poly[q]
        d = mpmath.mpf(0)
        for nu in range(len(poly) - 1, 0, -1):
            d = d * b1r + nu * to_real(poly[nu])
        s += d * basis_jet(q, mu).value
    F = renormalization_prefactor(mu)
    truncated = abs(F * (2 * b1r * mu / (1 + 4 * mu * mu) - s))
    rho = mpmath.mpf(3) / 4 * (1 + abs(b1r))
    certified = target.g40 <= mpq(1, 300) and rho < 1
    if certified:
        qn = q_top + 1
        tail = F * mpmath.mpf(4) / 3 * rho ** (qn - 1) / (qn * mu) / (1 - rho)
    else:
        tail = mpmath.inf
    return ContractionBound(truncated + tail, truncated, tail, bool(certified))


def certified_fixed_point_evaluation(b1, target: RenormalizationTarget, pipeline=None,
                                     goal=mpmath.mpf("1e-19"), q_start: int = 60, q_cap: int = 400) -> dict:
    """|f_2(mu_max) - c/mu_max| at b1 with a proven tail, q_max chosen from the envelope."""
    pipeline = pipeline or _default_pipeline()
    with working_precision(getattr(pipeline, "precision_bits", None)):
        mu = to_real(target.mu_max)
        cert = certify_tail(b1, target.g40)
        if cert is None:
            raise CertificateUnavailable("no proven coefficient envelope for this b1")
        q = min(q_cap, max(q_start, required_q(cert, mu, to_real(goal) / 2, q_start, q_cap)))
        coeffs = pipeline.coefficients(b1, target.g40, q)
        ev = f2_jet(coeffs, mu, 0)
        target_value = to_real(target.c) / mu
        return {
            "f2": +ev.jet.value,
            "deviation": abs(ev.jet.value - target_value),
            "error_bound": +ev.error_bound,
            "q_max": q,
            "certificate": cert.kind,
            "certified": bool(ev.certified and ev.error_bound < to_real(goal)),
        }
