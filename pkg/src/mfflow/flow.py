"""Non-perturbative mean-field flow: exact Taylor data at mu = 0, the same
data as polynomials in b_1, pointwise jets of every f_n, an independent
integrator for the truncated hierarchy, and the triviality scan.

Only even n appear anywhere; odd moments vanish identically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

from . import kernel
from ._recursion import poly_taylor_levels, taylor_levels
from .ansatz import (
    AnsatzCoefficients,
    RenormalizationTarget,
    b_sequence_from_taylor,
    certify_tail,
    f2_jet,
    fit_geometric_tail,
    picard_fixed_point,
)
from .combinatorics import binomial, fuss_catalan
from .numerics import (
    DEFAULT_PRECISION_BITS,
    DomainError,
    Jet,
    PowerSeries,
    coerce_like,
    exact,
    less_equal,
    mpq,
    to_real,
    working_precision,
)


class TruncationError(DomainError):
    """A coefficient outside the computed depth budget was requested."""


class StiffnessError(RuntimeError):
    """The adaptive integrator's step size underflowed."""


def _frac(p: int, q: int):
    return mpq(p, q)


def _level(n_max: int, k_max: int) -> int:
    if n_max < 4 or n_max % 2:
        raise DomainError("n_max must be even and >= 4")
    if k_max < 0:
        raise DomainError("k_max must be non-negative")
    return n_max + 2 * k_max


# ---------------------------------------------------------------------------
# exact Taylor data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaylorSystem:
    """Taylor data at mu = 0 on the cone n + 2k <= n_max + 2 k_max.

    f_n = mu^{n/2-2} g_n for even n >= 4; ``g[n][k]`` is the mu^k coefficient.
    """

    f2: PowerSeries
    g: dict
    n_max: int
    k_max: int
    seeds: tuple

    @property
    def level(self) -> int:
        return self.n_max + 2 * self.k_max

    def coefficient(self, n: int, k: int):
        if n == 2:
            if k < len(self.f2):
                return self.f2[k]
        elif n in self.g and k < len(self.g[n]):
            return self.g[n][k]
        need = n + 2 * k
        raise TruncationError(f"coefficient ({n},{k}) needs level {need}; computed up to {self.level}")

    def f_coefficient(self, n: int, l: int):
        """mu^l Taylor coefficient of f_n itself (zero below the flatness order)."""
        if n == 2:
            return self.coefficient(2, l)
        shift = n // 2 - 2
        return self.f2[0] * 0 if l < shift else self.coefficient(n, l - shift)

    def seed_residuals(self) -> dict:
        """Residuals of the regularity constraints fixing g_{n,0} and g_{n,1} (zero when exact)."""
        out = {}
        b1, g0 = self.f2[0], self.g[4][0]
        for n in sorted(self.g):
            if n == 4 or len(self.g[n]) < 2:
                continue
            s0 = sum(self.g[a][0] * self.g[n + 2 - a][0] for a in range(4, n - 1, 2))
            r0 = (n - 4) * self.g[n][0] + n * s0
            s1 = sum(self.g[a][0] * self.g[n + 2 - a][1] for a in range(4, n - 1, 2))
            r1 = (n - 2) * self.g[n][1] + n * (2 * s1 + self.g[n][0] * (2 * b1 + 1 - mpq(4, n)))
            out[n] = (r0, r1)
        return out


def taylor_system(b1, g40, n_max: int, k_max: int) -> TaylorSystem:
    """Exact g_{n,k} and f_{2,k}, level by level in n + 2k."""
    level = _level(n_max, k_max)
    b1, g40 = exact(b1), exact(g40)
    f2, g = taylor_levels(b1, g40, level, _frac)
    return TaylorSystem(PowerSeries(f2), {n: PowerSeries(v) for n, v in g.items()}, n_max, k_max, (b1, g40))


def closed_form_seeds(n: int, g40, b1) -> tuple:
    """(g_{n,0}, g_{n,1}) from the Fuss-Catalan closed forms."""
    if n < 4 or n % 2:
        raise DomainError("n must be even and >= 4")
    g40, b1 = exact(g40), exact(b1)
    h = n // 2 - 1
    base = g40 ** h * fuss_catalan(2, h)
    sign = -1 if (n // 2) % 2 else 1
    g0 = sign * base
    g1 = -sign * base * (mpq(3 * n - 4, 2) * b1 + mpq(n - 4, 4))
    return g0, g1


@dataclass(frozen=True)
class PolynomialTaylorSystem:
    """Coefficients in b_1 of every Taylor datum: ``g_poly[(n,k)][nu]`` etc."""

    g_poly: dict
    f2_poly: dict
    b_poly: dict
    g40: object
    n_max: int
    k_max: int

    def evaluate(self, b1) -> dict:
        """Evaluate every polynomial at b1: keys ('g', n, k), ('f2', k), ('b', q)."""
        b1 = exact(b1)

        def ev(p):
            s = mpq(0)
            for c in reversed(p):
                s = s * b1 + c
            return s

        out = {("g",) + key: ev(p) for key, p in self.g_poly.items()}
        out.update({("f2", k): ev(p) for k, p in self.f2_poly.items()})
        out.update({("b", q): ev(p) for q, p in self.b_poly.items()})
        return out


def polynomial_taylor_system(g40, n_max: int, k_max: int) -> PolynomialTaylorSystem:
    """The Taylor recursion run on polynomials in b_1 (exact coefficients)."""
    level = _level(n_max, k_max)
    g40 = exact(g40)
    f2, g = poly_taylor_levels(g40, level, _frac)
    width = len(f2) + 1
    cols = [[f2[k][nu] if nu < len(f2[k]) else mpq(0) for k in range(len(f2))] for nu in range(width)]
    bcols = [b_sequence_from_taylor(col) for col in cols]
    b_poly = {}
    for q in range(1, len(f2) + 1):
        b_poly[q] = [bcols[nu][q - 1] for nu in range(q + 1)]
        if any(bcols[nu][q - 1] != 0 for nu in range(q + 1, width)):
            raise AssertionError(f"b_{q} has degree above {q}")
    g_poly = {(n, k): row[k] for n, row in g.items() for k in range(len(row))}
    return PolynomialTaylorSystem(g_poly, dict(enumerate(f2)), b_poly, g40, n_max, k_max)


# ---------------------------------------------------------------------------
# numeric coefficient pipeline used by the fixed-point map
# ---------------------------------------------------------------------------

QUAD_ROUNDING = mpmath.mpf(2) ** -90


class CoefficientPipeline:
    """b_1 -> (b_1, ..., b_Q) via the Taylor recursion and the divisor inversion.

    exact=True runs on rationals; otherwise the compiled quad-precision
    kernel is used when tol_bits allows it, else mpmath at precision_bits.
    Results are memoized on the exact value of b_1.
    """

    def __init__(self, precision_bits: int = DEFAULT_PRECISION_BITS, exact: bool = False,
                 backend: str | None = None, tol_bits: int = 96):
        self.precision_bits = precision_bits
        self.exact = exact
        if backend is None:
            backend = kernel.backend_name(tol_bits)
        self.backend = "exact" if exact else backend
        self._memo: dict = {}

    def coefficients(self, b1, g40, q_max: int) -> AnsatzCoefficients:
        key = (exact(b1), exact(g40), q_max)
        if key in self._memo:
            return self._memo[key]
        with working_precision(self.precision_bits):
            out = self._compute(key, b1, g40, q_max)
        self._memo[key] = out
        return out

    def _compute(self, key, b1, g40, q_max):
        if self.exact:
            ts = taylor_system(key[0], key[1], 4, max(0, q_max - 2))
            b = b_sequence_from_taylor(ts.f2.coeffs[:q_max])
            rounding = 0
        else:
            f = kernel.f2_coefficients(b1, g40, q_max, self.precision_bits, self.backend)
            b = b_sequence_from_taylor(f)
            rounding = QUAD_ROUNDING if self.backend == "cython-float128" else mpmath.mpf(2) ** (20 - self.precision_bits)
        cert = certify_tail(key[0], key[1])
        fitted = None if cert else fit_geometric_tail(b)
        return AnsatzCoefficients(tuple(b), q_max, cert, fitted, rounding)


# ---------------------------------------------------------------------------
# pointwise jets
# ---------------------------------------------------------------------------

@dataclass
class FlowSolution:
    coeffs: AnsatzCoefficients
    jets: dict
    mu_max: object
    n_max: int
    error_bounds: dict = field(default_factory=dict)
    certified: bool = False

    def value(self, n: int, mu):
        return self.jets[(n, mu)].value


def _pair_products(f: dict, n: int):
    """sum over n1 + n2 = n + 2 (even, >= 2) of jet_mul(f_{n1}, f_{n2})."""
    acc = None
    for n1 in range(2, n + 1, 2):
        n2 = n + 2 - n1
        if n2 < n1:
            break
        t = f[n1] * f[n2]
        if n1 != n2:
            t = t.scale(2)
        acc = t if acc is None else acc + t
    return acc


def propagate_jets(coeffs: AnsatzCoefficients, mu, n_max: int, top_order: int,
                   mu_max=None, f2=None) -> FlowSolution:
    """Jets of f_2, f_4, ..., f_{n_max} at mu from the algebraic form of the flow.

    f_{n+2} = (1/(n+1)) sum f_{n1} f_{n2} + (n-4)/(n(n+1)) f_n + 2/(n(n+1)) d f_n.
    ``f2`` may be given directly as an F2Jet-like (jet, error_bound) pair.
    """
    if n_max < 2 or n_max % 2:
        raise DomainError("n_max must be even")
    if top_order < n_max // 2:
        raise DomainError(f"top_order {top_order} < n_max/2 = {n_max // 2}; raise the jet order")
    ev = f2 if f2 is not None else f2_jet(coeffs, mu, top_order)
    f = {2: ev.jet}
    err = {2: to_real(ev.error_bound)}
    mag = lambda jet: max(abs(to_real(d)) for d in jet.derivs)
    for n in range(2, n_max, 2):
        fn = f[n]
        nxt = _pair_products(f, n).truncate(fn.order - 1).scale(mpq(1, n + 1))
        nxt = nxt + fn.truncate(fn.order - 1).scale(mpq(n - 4, n * (n + 1)))
        nxt = nxt + fn.derivative().scale(mpq(2, n * (n + 1)))
        f[n + 2] = nxt
        e = mpmath.mpf(0)
        for n1 in range(2, n + 1, 2):
            n2 = n + 2 - n1
            e += mag(f[n1]) * err[n2] + err[n1] * mag(f[n2]) + err[n1] * err[n2]
        e = e / (n + 1) + (abs(mpmath.mpf(n - 4)) / (n * (n + 1)) + mpmath.mpf(2) / (n * (n + 1))) * err[n]
        err[n + 2] = e
    return FlowSolution(
        coeffs,
        {(n, mu): jet for n, jet in f.items()},
        mu_max,
        n_max,
        {(n, mu): e for n, e in err.items()},
        getattr(ev, "certified", False),
    )


def flow_residual(solution: FlowSolution, n: int, mu) -> Jet:
    """d f_n - [n(n+1)/2 f_{n+2} - (n/2) sum f f - (n-4)/2 f_n] from stored jets."""
    f = {m: solution.jets[(m, mu)] for m in range(2, solution.n_max + 1, 2)}
    lhs = f[n].derivative()
    rhs = f[n + 2].scale(mpq(n * (n + 1), 2)) - _pair_products(f, n).scale(mpq(n, 2)) - f[n].scale(mpq(n - 4, 2))
    return lhs - rhs


def jet_growth_constant(solution: FlowSolution, points, n_top: int = 10, l_top: int = 6):
    """max of (|d^l f_n| n! (l+1)^2 / (n+l)!)^{1/(n+l-1)} over stored jets."""
    best = mpmath.mpf(0)
    for mu in points:
        for n in range(2, n_top + 1, 2):
            jet = solution.jets.get((n, mu))
            if jet is None:
                continue
            for l in range(0, min(l_top, jet.order) + 1):
                if n + l - 1 <= 0:
                    continue
                v = abs(to_real(jet.derivs[l])) * math.factorial(n) * (l + 1) ** 2 / math.factorial(n + l)
                if v > 0:
                    best = max(best, v ** (mpmath.mpf(1) / (n + l - 1)))
    if not mpmath.isfinite(best):
        raise AssertionError("jet growth constant is not finite")
    return best


# ---------------------------------------------------------------------------
# truncated hierarchy integrator
# ---------------------------------------------------------------------------

def _taylor_step_coefficients(state: dict, ns: list, order: int) -> dict:
    """Taylor coefficients in (mu - mu0) of the truncated evolution equations."""
    c = {n: [state[n]] for n in ns}
    top = ns[-1]
    for m in range(order):
        new = {}
        for n in ns:
            up = c[n + 2][m] if n + 2 <= top else 0
            conv = 0
            for n1 in range(2, n + 1, 2):
                a, b = c[n1], c[n + 2 - n1]
                conv += sum(a[i] * b[m - i] for i in range(m + 1))
            new[n] = (mpmath.mpf(n * (n + 1)) / 2 * up - mpmath.mpf(n) / 2 * conv
                      - mpmath.mpf(n - 4) / 2 * c[n][m]) / (m + 1)
        for n in ns:
            c[n].append(new[n])
    return c


def truncated_ode_oracle(b1, g40, n_max: int, mu_end, local_error=mpmath.mpf("1e-20"),
                         order: int = 24, precision_bits: int = DEFAULT_PRECISION_BITS,
                         min_step=mpmath.mpf("1e-30")) -> dict:
    """Integrate d f_n = n(n+1)/2 f_{n+2} - (n/2) sum f f - (n-4)/2 f_n with f_{n_max+2} = 0.

    Initial data f_2(0) = b1, f_4(0) = g40, f_n(0) = 0 for n >= 6. Explicit
    Taylor-series stepping; the step keeps the last two series terms below
    ``local_error``.
    """
    if n_max < 2 or n_max % 2:
        raise DomainError("n_max must be even")
    with working_precision(precision_bits):
        ns = list(range(2, n_max + 1, 2))
        state = {n: mpmath.mpf(0) for n in ns}
        state[2] = to_real(b1)
        if n_max >= 4:
            state[4] = to_real(g40)
        mu, end = mpmath.mpf(0), to_real(mu_end)
        tol = to_real(local_error)
        while mu < end:
            c = _taylor_step_coefficients(state, ns, order)
            h = end - mu
            for n in ns:
                for p in (order, order - 1):
                    a = abs(c[n][p])
                    if a > 0:
                        h = min(h, mpmath.mpf("0.5") * (tol / a) ** (mpmath.mpf(1) / p))
            if h < min_step:
                raise StiffnessError(f"step size {mpmath.nstr(h, 3)} underflowed at mu = {mpmath.nstr(mu, 8)}")
            for n in ns:
                s = mpmath.mpf(0)
                for a in reversed(c[n]):
                    s = s * h + a
                state[n] = s
            mu = end if end - mu - h < min_step else mu + h
        return {n: +state[n] for n in ns}


# ---------------------------------------------------------------------------
# triviality scan
# ---------------------------------------------------------------------------

@dataclass
class TrivialityRow:
    mu_max: object
    b1: object
    f2: object
    f4: object
    f6: object


@dataclass
class TrivialityTable:
    rows: list
    slopes: dict

    def columns(self) -> list:
        return ["mu_max", "f2", "f4", "f6", "slope2", "slope4", "slope6"]


def loglog_slope(xs, ys):
    """Least-squares slope of ln|y| against ln x."""
    X = [mpmath.log(to_real(x)) for x in xs]
    Y = [mpmath.log(abs(to_real(y))) for y in ys]
    m = len(X)
    if m < 2:
        raise DomainError("a slope needs at least two points")
    xb, yb = sum(X) / m, sum(Y) / m
    return sum((x - xb) * (y - yb) for x, y in zip(X, Y)) / sum((x - xb) ** 2 for x in X)


def solve_flow_at_mu_max(target: RenormalizationTarget, n_max: int = 6, tol=mpmath.mpf("1e-25"),
                         pipeline=None, max_iter: int = 100):
    """Fixed point b1* and jets of f_2..f_{n_max} at mu_max."""
    pipeline = pipeline or CoefficientPipeline()
    b1, trace = picard_fixed_point(target, tol=tol, max_iter=max_iter, pipeline=pipeline)
    coeffs = trace.coefficients
    mu = to_real(target.mu_max)
    sol = propagate_jets(coeffs, mu, n_max, n_max // 2, mu_max=target.mu_max)
    return b1, trace, sol


def triviality_scan(g40, c, mu_max_list, n_max: int = 6, tol=mpmath.mpf("1e-25"), pipeline=None) -> TrivialityTable:
    """f_2, f_4, f_6 at each mu_max (fixed point re-solved per point) and log-log slopes."""
    pipeline = pipeline or CoefficientPipeline()
    rows = []
    for mm in mu_max_list:
        target = RenormalizationTarget(c, mm, g40)
        b1, _, sol = solve_flow_at_mu_max(target, n_max, tol, pipeline)
        mu = to_real(target.mu_max)
        rows.append(TrivialityRow(target.mu_max, b1, sol.value(2, mu), sol.value(4, mu), sol.value(6, mu)))
    slopes = {}
    if len(rows) >= 2:
        xs = [r.mu_max for r in rows]
        for name in ("f2", "f4", "f6"):
            ys = [getattr(r, name) for r in rows]
            slopes[name] = loglog_slope(xs, ys) if all(y != 0 for y in ys) else None
    return TrivialityTable(rows, slopes)


# ---------------------------------------------------------------------------
# factorial growth bounds on Taylor data
# ---------------------------------------------------------------------------

def small_data_constant(b1, g40):
    """K = max(|b1|, 10 g40) when the small-data hypotheses hold, else None."""
    b1, g40 = exact(b1), exact(g40)
    K = max(abs(b1), 10 * g40)
    if g40 > 0 and K <= mpq(1, 30):
        return K
    return None


def taylor_bound_violations(system: TaylorSystem, K, n_top: int = 20, k_top: int = 20) -> list:
    """Entries breaking |g_{n,k}| <= (3/2)^{k-2} K^{n/2-1} ((n-4)/2+k)! or
    |f_{2,k}| <= (3/2)^k K |k-1|! (exact comparisons)."""
    bad = []
    K = exact(K)
    for k in range(min(k_top, len(system.f2) - 1) + 1):
        bound = mpq(3, 2) ** k * K * math.factorial(abs(k - 1))
        if not abs(system.f2[k]) <= bound:
            bad.append((2, k))
    for n in range(4, n_top + 1, 2):
        row = system.g.get(n)
        if row is None:
            continue
        for k in range(min(k_top, len(row) - 1) + 1):
            bound = mpq(3, 2) ** (k - 2) * K ** (n // 2 - 1) * math.factorial((n - 4) // 2 + k)
            if not abs(row[k]) <= bound:
                bad.append((n, k))
    return bad


def polynomial_bound_violations(system: PolynomialTaylorSystem, K, n_top: int = 16, k_top: int = 12) -> list:
    """Entries breaking |g_{n,k,nu}| <= (1/4) K^{n/2-1} ((n-4)/2+k)! C(k,nu) or
    |f_{2,k,nu}| <= |k-1|! C(k+1,nu)."""
    bad = []
    K = exact(K)
    for k, poly in system.f2_poly.items():
        if k > k_top:
            continue
        for nu, v in enumerate(poly):
            if not abs(v) <= math.factorial(abs(k - 1)) * binomial(k + 1, nu):
                bad.append((2, k, nu))
    for (n, k), poly in system.g_poly.items():
        if n > n_top or k > k_top:
            continue
        for nu, v in enumerate(poly):
            bound = mpq(1, 4) * K ** (n // 2 - 1) * math.factorial((n - 4) // 2 + k) * binomial(k, nu)
            if not abs(v) <= bound:
                bad.append((n, k, nu))
    return bad
