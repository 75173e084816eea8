"""Scalars, jets, truncated power series and the log-Laurent ring."""
from __future__ import annotations

import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfflow.numerics import (
    DomainError,
    Jet,
    LogLaurentPoly,
    PowerSeries,
    antiderivative,
    constant_jet,
    exact,
    format_exact,
    identity_jet,
    jet_mul,
    loglaurent_integrate,
    mpq,
    polynomial_jet,
    quotient_jet,
    to_real,
    working_precision,
)
from strategies import exact_jets, jet_pairs, log_laurent, positive_rationals, rationals


def _derive_terms(P: LogLaurentPoly) -> dict:
    """d/dalpha of alpha^p ln^q alpha, written out independently of the library."""
    out = {}
    for (p, q, r, s), c in P.terms.items():
        for key, coef in (((p - 1, q, r, s), p * c), ((p - 1, q - 1, r, s), q * c)):
            if coef != 0:
                out[key] = out.get(key, mpq(0)) + coef
    return {k: v for k, v in out.items() if v != 0}


class TestScalars:
    @given(st.integers(-10**6, 10**6), st.integers(1, 10**6))
    def test_exact_is_reduced_with_positive_denominator(self, p, q):
        x = exact(f"{p}/{q}")
        assert math.gcd(int(x.numerator), int(x.denominator)) == 1
        assert x.denominator > 0
        assert x * q == p

    def test_format_exact(self):
        assert format_exact(mpq(1, 3)) == "1/3"
        assert format_exact(mpq(-6, 3)) == "-2"

    @given(rationals(max_num=10**6, max_den=10**6))
    def test_conversion_within_one_ulp(self, x):
        with working_precision(128):
            r = to_real(x)
            err = abs(exact(r) - x)
            ulp = mpq(2) ** (int(mpmath.floor(mpmath.log(abs(r), 2))) - 127) if x != 0 else 0
            assert err <= ulp

    def test_float_and_mpf_convert_exactly(self):
        assert exact(0.5) == mpq(1, 2)
        assert exact(mpmath.mpf(3) / 4) == mpq(3, 4)
        with pytest.raises(DomainError):
            exact(mpmath.inf)


class TestJetProduct:
    def test_constant_one_is_identity(self):
        b = Jet(mpq(2), [mpq(3), mpq(-1), mpq(5), mpq(7)])
        assert jet_mul(constant_jet(mpq(2), mpq(1), 3), b).derivs == b.derivs

    def test_square_of_identity(self):
        mu = identity_jet(mpq(2), 2)
        assert jet_mul(mu, mu).derivs == (4, 4, 2)

    def test_mismatched_points_rejected(self):
        with pytest.raises(DomainError):
            jet_mul(constant_jet(mpq(1), mpq(1), 2), constant_jet(mpq(2), mpq(1), 2))

    def test_result_order_is_the_minimum(self):
        a = constant_jet(mpq(0), mpq(2), 5)
        b = constant_jet(mpq(0), mpq(3), 2)
        assert (a * b).order == 2

    @given(jet_pairs(max_order=4))
    def test_commutative(self, pair):
        a, b = pair
        assert jet_mul(a, b).derivs == jet_mul(b, a).derivs

    @given(st.data())
    def test_associative_and_distributive(self, data):
        point = data.draw(rationals())
        L = data.draw(st.integers(0, 5))
        a, b, c = (data.draw(exact_jets(point=point, order=L)) for _ in range(3))
        assert ((a * b) * c).derivs == (a * (b * c)).derivs
        assert (a * (b + c)).derivs == (a * b + a * c).derivs


class TestQuotient:
    def test_inverse_of_one_plus_x(self):
        one = constant_jet(mpq(0), mpq(1), 2)
        g = polynomial_jet(mpq(0), [mpq(1), mpq(1)], 2)
        assert quotient_jet(one, g).derivs == (1, -1, 2)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            quotient_jet(constant_jet(mpq(0), mpq(1), 1), constant_jet(mpq(0), mpq(0), 1))

    @given(jet_pairs(max_order=4, nonzero_denominator=True))
    def test_self_quotient_is_one(self, pair):
        _, g = pair
        assert quotient_jet(g, g).derivs == (1,) + (0,) * g.order

    @settings(max_examples=1000)
    @given(jet_pairs(max_order=6, nonzero_denominator=True))
    def test_roundtrip(self, pair):
        f, g = pair
        assert jet_mul(quotient_jet(f, g), g).derivs == f.derivs


class TestPowerSeries:
    @given(st.lists(rationals(), min_size=1, max_size=8), st.lists(rationals(), min_size=1, max_size=8))
    def test_cauchy_product_matches_jet_product(self, a, b):
        A, B = PowerSeries(a), PowerSeries(b)
        L = min(len(a), len(b)) - 1
        assert (A * B).to_jet(L).derivs == jet_mul(A.to_jet(L), B.to_jet(L)).derivs

    def test_evaluation_by_horner(self):
        p = PowerSeries([mpq(1), mpq(2), mpq(3)])
        assert p(mpq(1, 2)) == mpq(1) + 1 + mpq(3, 4)
        assert p.truncation_order == 2


class TestLogLaurent:
    def test_no_stored_zeros(self):
        P = LogLaurentPoly({(1, 0): 2, (0, 1): 0}) + LogLaurentPoly({(1, 0): -2})
        assert P.is_zero() and P.terms == {}

    def test_inverse_square_building_block(self):
        P = LogLaurentPoly({(-2, 0): 3})
        F = antiderivative(P)
        value = F.substitute_alpha("one") - F
        assert value == LogLaurentPoly({(-1, 0): 3, (0, 0): -3})
        assert loglaurent_integrate(P, mpq(1, 2), mpq(1)) == 3

    def test_log_over_alpha(self):
        assert antiderivative(LogLaurentPoly({(-1, 1): 1})) == LogLaurentPoly({(0, 2): mpq(1, 2)})

    @pytest.mark.parametrize("a,b", [(mpq(1, 3), mpq(2)), (mpq(1, 10), mpq(7, 5))])
    def test_integral_against_quadrature(self, a, b):
        P = LogLaurentPoly({(0, 2): 1})
        with working_precision(256):
            ref = mpmath.quad(lambda t: mpmath.log(t) ** 2, [to_real(a), to_real(b)])
            assert abs(loglaurent_integrate(P, a, b) - ref) < mpmath.mpf(10) ** -30

    def test_rejects_non_positive_interval(self):
        with pytest.raises(DomainError):
            loglaurent_integrate(LogLaurentPoly({(0, 0): 1}), mpq(0), mpq(1))

    @given(log_laurent(with_alpha0=True))
    def test_antiderivative_differentiates_back(self, P):
        assert _derive_terms(antiderivative(P)) == P.terms

    @given(log_laurent(), positive_rationals())
    def test_evaluation_is_term_by_term(self, P, alpha):
        total = mpmath.mpf(0)
        for (p, q, _, _), c in P.terms.items():
            total += to_real(c) * to_real(alpha) ** p * mpmath.log(to_real(alpha)) ** q
        assert abs(to_real(P.evaluate(alpha)) - total) <= mpmath.mpf(10) ** -60 * (1 + abs(total))

    @given(log_laurent(max_terms=3), log_laurent(max_terms=3), log_laurent(max_terms=3))
    def test_ring_axioms(self, P, Q, R):
        assert P * (Q + R) == P * Q + P * R
        assert (P * Q) * R == P * (Q * R)
        assert P - P == LogLaurentPoly()

    def test_logless_evaluation_is_exact(self):
        P = LogLaurentPoly({(-1, 0): 2, (2, 0): mpq(1, 3)})
        assert P.evaluate(mpq(2)) == 1 + mpq(4, 3)

    def test_bad_keys(self):
        with pytest.raises(DomainError):
            LogLaurentPoly({(0, -1): 1})
        with pytest.raises(DomainError):
            LogLaurentPoly({(0, 0, 0): 1})
