"""Two-point basis, coefficient maps, certified tails and the renormalization
fixed point."""
from __future__ import annotations

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfflow.ansatz import (
    AnsatzCoefficients,
    CertificateUnavailable,
    NonConvergence,
    RenormalizationTarget,
    TailToleranceError,
    b_from_taylor,
    b_sequence_from_taylor,
    basis_jet,
    basis_value,
    certified_fixed_point_evaluation,
    certify_tail,
    contraction_certificate,
    f2_jet,
    fit_geometric_tail,
    g_map,
    g_map_detail,
    picard_fixed_point,
    quadratic_geometric_envelope,
    renormalization_prefactor,
    taylor_from_b,
    uniform_envelope_violations,
)
from mfflow.flow import CoefficientPipeline, polynomial_taylor_system, taylor_system
from mfflow.numerics import DomainError, PowerSeries, mpq, to_real
from standard_data import B1_STAR_BPHZ, G40, MU_MAX
from strategies import rational_sequences, rationals


def _geometric_expansion(b, k_max):
    """Taylor coefficients of sum_q b_q (q mu)^{q-1} / (1 + (q mu)^q) by
    expanding each basis function as a geometric series."""
    out = [mpq(0)] * (k_max + 1)
    for q, bq in enumerate(b, start=1):
        rho = 1
        while rho * q - 1 <= k_max:
            k = rho * q - 1
            out[k] += bq * (-1) ** (rho - 1) * mpq(q) ** k
            rho += 1
    return out


class TestBasis:
    def test_values_at_zero(self):
        assert basis_jet(1, mpq(0)).value == 1
        for q in range(2, 8):
            assert basis_jet(q, mpq(0)).value == 0

    def test_second_basis_function_at_mu_max(self):
        assert basis_jet(2, MU_MAX).value == 2 * MU_MAX / (1 + 4 * MU_MAX ** 2)

    def test_first_derivative(self):
        assert basis_jet(1, mpq(1), 1).derivs[1] == mpq(-1, 4)

    @pytest.mark.parametrize("q", [1, 2, 5, 30, 200])
    def test_stable_value_matches_quotient(self, q):
        mu = mpmath.mpf(8)
        ref = (q * mu) ** (q - 1) / (1 + (q * mu) ** q)
        assert abs(basis_value(q, mu) - ref) <= mpmath.mpf(10) ** -70 * ref

    def test_negative_point_rejected(self):
        with pytest.raises(DomainError):
            basis_jet(2, mpq(-1))


class TestTaylorMaps:
    def test_low_orders(self):
        b = [mpq(s) for s in ("1/7", "2/5", "-3/11")]
        f = taylor_from_b(b, 2)
        assert f[0] == b[0]
        assert f[1] == 2 * b[1] - b[0]
        assert f[2] == 9 * b[2] + b[0]

    def test_second_coefficient_inverse(self):
        f = [mpq(1, 3), mpq(5, 7)]
        b = b_from_taylor(f)
        assert b[2] == f[1] / 2 + b[1] / 2

    def test_zero_series(self):
        assert all(v == 0 for v in b_from_taylor([mpq(0)] * 12).b)

    def test_insufficient_coefficients(self):
        with pytest.raises(IndexError):
            taylor_from_b([mpq(1), mpq(2)], 5)

    @given(rational_sequences(25))
    def test_matches_geometric_expansion(self, b):
        assert list(taylor_from_b(b, 24).coeffs) == _geometric_expansion(b, 24)

    @settings(max_examples=30)
    @given(rational_sequences(60))
    def test_roundtrip_both_directions(self, b):
        f = taylor_from_b(b, 59)
        assert list(b_from_taylor(f).b) == b
        assert list(taylor_from_b(b_sequence_from_taylor(b), 59).coeffs) == b


class TestTwoPoint:
    def test_single_term(self):
        coeffs = AnsatzCoefficients((mpq(1, 5),), tail_certificate=None, fitted_tail=None)
        with pytest.raises(DomainError):
            f2_jet(coeffs, mpq(2), 2)  # a one-term sequence admits no tail fit
        coeffs = AnsatzCoefficients((mpq(1, 5), 0, 0, 0), fitted_tail=fit_geometric_tail([mpq(1, 5), mpq(1, 100), mpq(1, 10**4), mpq(1, 10**6)]))
        got = f2_jet(coeffs, mpq(2), 2).jet.derivs
        assert got == (mpq(1, 15), mpq(-1, 45), mpq(2, 135))

    def test_value_at_zero_is_b1(self, standard_coefficients, b1_star):
        assert f2_jet(standard_coefficients, mpq(0)).jet.value == standard_coefficients[1]
        assert abs(standard_coefficients[1] - b1_star) < mpmath.mpf(10) ** -26

    def test_jet_matches_numerical_differentiation(self, standard_coefficients):
        coeffs = standard_coefficients
        mu = mpmath.mpf(1) / 2
        ev = f2_jet(coeffs, mu, 3)

        def direct(x):
            return sum(to_real(coeffs[q]) * (q * x) ** (q - 1) / (1 + (q * x) ** q) for q in range(1, coeffs.q_max + 1))

        for l in range(4):
            ref = mpmath.diff(direct, mu, l)
            # same truncation on both sides, so only differentiation error remains
            assert abs(ev.jet.derivs[l] - ref) <= mpmath.mpf(10) ** -40 * (1 + abs(ref))
        assert ev.certified and mpmath.isfinite(ev.error_bound)

    def test_taylor_series_and_resummation_part_ways(self):
        """Both share every Taylor coefficient at 0, yet the basis poles
        accumulate at the origin, so they differ at positive mu."""
        b1 = mpq(1, 40)
        ts = taylor_system(b1, G40, 4, 40)
        coeffs = CoefficientPipeline(256, tol_bits=100).coefficients(b1, G40, 40)
        exact_b = b_sequence_from_taylor(list(ts.f2.coeffs))[:40]
        assert max(abs(to_real(u) - to_real(v)) for u, v in zip(exact_b, coeffs.b)) < mpmath.mpf(2) ** -100
        gap = abs(to_real(ts.f2(mpq(1, 10))) - f2_jet(coeffs, mpq(1, 10)).jet.value)
        assert mpmath.mpf(10) ** -7 < gap < mpmath.mpf(10) ** -6

    def test_tolerance_unreachable(self):
        b = [mpq(1, 40)] + [mpq(1, 10 * q * q) for q in range(2, 7)]
        coeffs = AnsatzCoefficients(tuple(b)).with_tail(mpq(1, 40), G40)
        with pytest.raises(TailToleranceError, match="increase q_max"):
            f2_jet(coeffs, mpq(8), 0, tol=mpmath.mpf(10) ** -30)


class TestEnvelopes:
    def test_uniform_envelope_under_small_data(self):
        b1 = mpq(1, 40)
        ts = taylor_system(b1, G40, 4, 60)
        b = b_sequence_from_taylor(ts.f2.coeffs[:61])
        cert = certify_tail(b1, G40)
        assert cert.kind == "uniform" and cert.K == mpq(1, 30)
        assert uniform_envelope_violations(b, cert.K) == []
        AnsatzCoefficients(tuple(b), tail_certificate=cert)  # enforces the envelope on construction

    def test_envelope_enforced_on_construction(self):
        cert = certify_tail(mpq(1, 40), G40)
        with pytest.raises(AssertionError):
            AnsatzCoefficients((mpq(1, 40), mpq(1)), tail_certificate=cert)

    def test_binomial_envelope_outside_small_data(self, b1_star):
        cert = certify_tail(b1_star, G40)
        assert cert.kind == "binomial"
        assert certify_tail(mpq(1, 2), G40) is None

    def test_quadratic_geometric_constant_is_finite(self, standard_coefficients):
        C = quadratic_geometric_envelope(standard_coefficients.b)
        assert mpmath.isfinite(C) and C > 0


class TestRenormalizationMap:
    def test_prefactor(self):
        assert renormalization_prefactor(mpq(0)) == 1
        assert renormalization_prefactor(mpq(1)) == mpq(10, 9)

    def test_target_preconditions(self):
        with pytest.raises(DomainError, match="mu_max"):
            RenormalizationTarget(mpq(1, 4), 5, G40)
        with pytest.raises(DomainError):
            RenormalizationTarget(mpq(1, 2), MU_MAX, G40)
        with pytest.raises(DomainError):
            RenormalizationTarget(mpq(1, 4), MU_MAX, 0)

    def test_standard_fixed_point_is_fixed(self, standard_target, pipeline, b1_star):
        assert abs(g_map(b1_star, standard_target, pipeline) - b1_star) < mpmath.mpf(10) ** -25

    def test_bphz_fixed_point_is_fixed(self, pipeline):
        target = RenormalizationTarget(0, MU_MAX, G40)
        b = mpmath.mpf(B1_STAR_BPHZ)
        assert abs(g_map(b, target, pipeline) - b) < mpmath.mpf(10) ** -25

    def test_fixed_point_imposes_the_condition(self, standard_target, pipeline, b1_star):
        coeffs = pipeline.coefficients(b1_star, G40, 200)
        ev = f2_jet(coeffs, to_real(MU_MAX))
        assert abs(ev.jet.value - mpmath.mpf(1) / 32) < 10 * ev.error_bound + mpmath.mpf(10) ** -24

    def test_loose_tolerance_stops_after_one_step(self, standard_target, pipeline):
        b, trace = picard_fixed_point(standard_target, tol=mpmath.mpf(1), pipeline=pipeline)
        assert len(trace.deltas) == 1

    def test_non_convergence_carries_trace(self, standard_target, pipeline):
        with pytest.raises(NonConvergence) as info:
            picard_fixed_point(standard_target, tol=mpmath.mpf(10) ** -25, max_iter=3, pipeline=pipeline)
        assert len(info.value.trace.deltas) == 3

    def test_map_stays_in_the_contraction_domain(self):
        a = mpq(1, 30)
        target = RenormalizationTarget(0, MU_MAX, mpq(1, 900), a)
        assert target.in_contraction_regime
        pipe = CoefficientPipeline(256, tol_bits=100)
        for b1 in (-a, -a / 2, 0, a / 3, a):
            assert abs(g_map(b1, target, pipe)) < to_real(a)

    def test_certified_map_refuses_without_envelope(self, standard_target, pipeline):
        with pytest.raises(CertificateUnavailable):
            g_map_detail(mpq(1, 2), standard_target, pipeline, certified_only=True)


class TestContraction:
    def test_below_one_at_the_fixed_point(self, standard_target, b1_star):
        cb = contraction_certificate(b1_star, standard_target)
        assert cb.certified and cb.value < 1

    def test_finite_difference_agreement(self, standard_target, pipeline, b1_star):
        ps = polynomial_taylor_system(G40, 4, 28)
        cb = contraction_certificate(b1_star, standard_target, ps, 30)
        errs = []
        for h in (mpmath.mpf(10) ** -6, mpmath.mpf(10) ** -7):
            fd = (g_map(b1_star + h, standard_target, pipeline) - g_map(b1_star - h, standard_target, pipeline)) / (2 * h)
            errs.append(abs(abs(fd) - cb.truncated_value))
            assert errs[-1] <= h * h
        assert 50 < errs[0] / errs[1] < 200

    def test_synthetic_constant_coefficients(self, standard_target):
        """b_q independent of b1 for q >= 2: only the explicit b1^2 term contributes."""

        class Frozen:
            b_poly = {q: [mpq(1, q ** 3)] for q in range(1, 31)}

        b1 = mpq(1, 10)
        cb = contraction_certificate(b1, standard_target, Frozen, 30)
        mu = to_real(MU_MAX)
        expected = renormalization_prefactor(mu) * 2 * to_real(b1) * mu / (1 + 4 * mu * mu)
        assert abs(cb.truncated_value - expected) < mpmath.mpf(10) ** -70


@pytest.mark.slow
class TestFixedPointSolve:
    def test_bphz_conditions(self, pipeline):
        target = RenormalizationTarget(0, MU_MAX, G40)
        b, trace = picard_fixed_point(target, pipeline=pipeline)
        assert abs(b - mpmath.mpf(B1_STAR_BPHZ)) < mpmath.mpf(10) ** -24
        ev = certified_fixed_point_evaluation(b, target, pipeline)
        assert ev["deviation"] + ev["error_bound"] < mpmath.mpf(10) ** -18
        assert all(r < 1 for r in trace.ratios)
