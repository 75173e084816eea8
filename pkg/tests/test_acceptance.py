"""Acceptance criteria, one test per criterion at the contracted tolerance.

Each test records a PASS/FAIL line that is printed in the terminal summary.
A line is recorded before the assertion so that failures are reported too.
"""
from __future__ import annotations

import math
import random
import time
from fractions import Fraction

import mpmath
import pytest

import oracles
from mfflow import combinatorics as cb
from mfflow.ansatz import (
    RenormalizationTarget,
    b_from_taylor,
    b_sequence_from_taylor,
    certified_fixed_point_evaluation,
    contraction_certificate,
    picard_fixed_point,
    polynomial_coefficient_violations,
    taylor_from_b,
    uniform_envelope_violations,
)
from mfflow.borel import (
    FormalSeries,
    asymptoticity_check,
    borel_sum,
    borel_transform,
    remainders_from_function,
    sokal_certificate,
    two_point_of_coupling,
    two_point_series,
)
from mfflow.flow import (
    closed_form_seeds,
    polynomial_bound_violations,
    polynomial_taylor_system,
    propagate_jets,
    small_data_constant,
    taylor_bound_violations,
    taylor_system,
    triviality_scan,
    truncated_ode_oracle,
)
from mfflow.numerics import LogLaurentPoly, mpq, to_real
from mfflow.perturbation import (
    alpha_flow,
    normalized_remainder_ratio,
    remainder_by_subtraction,
    remainder_flow,
    subtraction_table,
    telescoping_defect,
)
from standard_data import C_STANDARD, G40, MU_MAX


def _e(k):
    return mpmath.mpf(10) ** -k


@pytest.fixture(scope="module")
def standard_fixed_point(standard_target, pipeline):
    with mpmath.workprec(256):
        start = time.time()
        b1, trace = picard_fixed_point(standard_target, pipeline=pipeline)
        return b1, trace, time.time() - start


def test_criterion_01_closed_form_seeds(record_criterion):
    start = time.time()
    mismatches = []
    for b1, g40 in ((mpq(1, 40), mpq(1, 300)), (mpq(-3, 7), mpq(2, 5))):
        ts = taylor_system(b1, g40, 40, 1)
        for n in range(4, 41, 2):
            if closed_form_seeds(n, g40, b1) != (ts.g[n][0], ts.g[n][1]):
                mismatches.append((b1, g40, n))
    elapsed = time.time() - start
    ok = not mismatches and elapsed < 5
    record_criterion(1, ok, f"mismatches={len(mismatches)} time={elapsed:.2f}s")
    assert ok


def test_criterion_02_ansatz_roundtrip(record_criterion):
    rng = random.Random(20261014)
    start = time.time()
    bad = 0
    for _ in range(100):
        seq = [mpq(rng.randint(-10**6, 10**6), rng.randint(1, 10**6)) for _ in range(30)]
        f = taylor_from_b(seq, 29)
        if list(b_from_taylor(f).b) != seq:
            bad += 1
        if list(taylor_from_b(b_sequence_from_taylor(seq), 29).coeffs) != seq:
            bad += 1
    elapsed = time.time() - start
    ok = bad == 0 and elapsed < 5
    record_criterion(2, ok, f"failures={bad} time={elapsed:.2f}s")
    assert ok


def test_criterion_03_combinatorial_identities(record_criterion):
    rng = random.Random(7)
    start = time.time()
    failures = []

    def check(label, ok):
        if not ok:
            failures.append(label)

    for s in (1, 2, 3):
        for m in range(31):
            rhs = Fraction(2, (s + 1) * m + 2) * math.comb((s + 1) * m + 2, m)
            check(("convolution", s, m), cb.fuss_convolution(s, m) == rhs)
    for n in range(6, 81, 2):
        lhs, rhs = cb.fuss_identity_weighted(n)
        check(("weighted", n), lhs == rhs)
    for _ in range(200):
        a, b, nu = rng.randint(0, 40), rng.randint(0, 40), rng.randint(0, 80)
        lhs, rhs = cb.vandermonde_sides(a, b, nu)
        check(("vandermonde", a, b, nu), lhs == rhs == math.comb(a + b, nu))
        a, b, c, d = (rng.randint(0, 40) for _ in range(4))
        check(("product", a, b, c, d),
              cb.binomial_product_bound_holds(a, b, c, d) and math.comb(a, b) * math.comb(c, d) <= math.comb(a + c, b + d))
    fubini = [1]
    for n in range(1, 21):
        fubini.append(sum(math.comb(n, k) * fubini[n - k] for k in range(1, n + 1)))
    for n in range(21):
        check(("ordered bell", n), cb.ordered_bell(n) == fubini[n] and cb.ordered_bell_bound_holds(n)
              and fubini[n] <= math.e ** n * math.factorial(n))
    for n in range(12, 201, 2):
        lhs, rhs = cb.inverse_square_convolution_sides(n)
        check(("inverse squares", n), lhs <= rhs)
    for l in range(201):
        for i, (lhs, rhs) in enumerate(cb.squared_convolution_sides(l)):
            check(("convolution inequality", l, i), lhs <= rhs)
    elapsed = time.time() - start
    ok = not failures and elapsed < 30
    record_criterion(3, ok, f"failures={failures[:3]} time={elapsed:.2f}s")
    assert ok


def test_criterion_04_first_order_amplitudes(record_criterion):
    start = time.time()
    amps = alpha_flow(1)
    four = amps.amplitude(4, 1) == LogLaurentPoly.constant(1)
    two = amps.amplitude(2, 1) == LogLaurentPoly({(0, 0): 3, (-1, 0): -3})
    elapsed = time.time() - start
    ok = four and two and elapsed < 1
    record_criterion(4, ok, f"A41={four} A21={two} time={elapsed:.2f}s")
    assert ok


def test_criterion_05_symbolic_flow_residual(record_criterion):
    start = time.time()
    amps = alpha_flow(6)
    nonzero = [(n, j) for n in range(2, 11, 2) for j in range(1, 7)
               if (n, j) in amps.table and not amps.flow_residual(n, j).is_zero()]
    covered = all((n, j) in amps.table for n in range(2, 11, 2) for j in range(1, 7) if n <= 2 * j + 2)
    boundary = all(p.is_zero() for p in amps.boundary_residuals().values())
    elapsed = time.time() - start
    ok = not nonzero and covered and boundary and elapsed < 60
    record_criterion(5, ok, f"nonzero={nonzero} boundary_zero={boundary} time={elapsed:.2f}s")
    assert ok


@pytest.mark.slow
def test_criterion_06_fixed_point(record_criterion, standard_fixed_point, standard_target, pipeline):
    start = time.time()
    details, ok = [], True
    runs = [(standard_target, standard_fixed_point[:2])]
    bphz = RenormalizationTarget(0, MU_MAX, G40)
    runs.append((bphz, picard_fixed_point(bphz, pipeline=pipeline)))
    for target, (b1, trace) in runs:
        contraction = contraction_certificate(b1, target)
        ev = certified_fixed_point_evaluation(b1, target, pipeline)
        run_ok = (len(trace.deltas) <= 100 and trace.residual < _e(20) and all(r < 1 for r in trace.ratios)
                  and contraction < 1 and ev["deviation"] + ev["error_bound"] < _e(18))
        ok = ok and run_ok
        details.append(f"c={target.c}: iter={len(trace.deltas)} res={mpmath.nstr(trace.residual, 3)} "
                       f"contr={mpmath.nstr(contraction.value, 3)} dev+err={mpmath.nstr(ev['deviation'] + ev['error_bound'], 3)}")
    elapsed = time.time() - start + standard_fixed_point[2]
    ok = ok and elapsed < 120
    record_criterion(6, ok, "; ".join(details) + f" time={elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_07_triviality_rates(record_criterion, pipeline):
    start = time.time()
    table = triviality_scan(G40, C_STANDARD, [mpq(8), mpq(16), mpq(32), mpq(64)], pipeline=pipeline)
    s4, s6 = table.slopes["f4"], table.slopes["f6"]
    scaled = [abs(r.f4 + r.f2 / 3) * to_real(r.mu_max) ** 2 for r in table.rows]
    factors = [max(a, b) / min(a, b) for a, b in zip(scaled, scaled[1:])]
    elapsed = time.time() - start
    ok = -1.3 <= s4 <= -0.7 and s6 <= -1.5 and all(f < 2 for f in factors) and elapsed < 600
    record_criterion(7, ok, f"slope4={mpmath.nstr(s4, 4)} slope6={mpmath.nstr(s6, 4)} "
                            f"factors={[mpmath.nstr(f, 3) for f in factors]} time={elapsed:.0f}s")
    assert ok


def test_criterion_08_coefficient_bounds(record_criterion):
    start = time.time()
    b1 = mpq(1, 40)
    K = small_data_constant(b1, G40)
    taylor = taylor_bound_violations(taylor_system(b1, G40, 20, 20), K, 20, 20)
    b = b_sequence_from_taylor(taylor_system(b1, G40, 4, 40).f2.coeffs[:40])
    envelope = uniform_envelope_violations(b, K)
    poly_seed = mpq(1, 900)
    poly = polynomial_bound_violations(polynomial_taylor_system(poly_seed, 16, 12), mpq(1, 30), 16, 12)
    ansatz = polynomial_coefficient_violations(polynomial_taylor_system(G40, 4, 28).b_poly, 30)
    elapsed = time.time() - start
    ok = K is not None and not (taylor or envelope or poly or ansatz) and elapsed < 120
    record_criterion(8, ok, f"violations taylor={len(taylor)} envelope={len(envelope)} "
                            f"polynomial={len(poly)} ansatz={len(ansatz)} time={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_09_cross_route_remainders(record_criterion, standard_coefficients, standard_expansion):
    start = time.time()
    mu = to_real(MU_MAX)
    gt = 1 / mu
    K_top = 6
    sol = propagate_jets(standard_coefficients, mu, 8, 18)
    table = subtraction_table(sol, standard_expansion, mu, gt, 6, K_top + 1)
    tower = {S: remainder_by_subtraction(2, S - 1, mu, gt, sol, standard_expansion) for S in range(1, K_top + 2)}
    flow = remainder_flow(tower, standard_expansion, sol, mu, 6, K_top, gt)
    diff = max(abs(table.delta[(n, k, mu)].value - flow.delta[(n, k, mu)].value)
               for n in (4, 6) for k in range(K_top + 1))
    tele = max(telescoping_defect(n, k, mu, gt, table, standard_expansion)
               for n in (2, 4, 6) for k in range(K_top + 1))
    elapsed = time.time() - start
    ok = diff < _e(15) and tele < _e(20) and elapsed < 120
    record_criterion(9, ok, f"route difference={mpmath.nstr(diff, 3)} telescoping={mpmath.nstr(tele, 3)} "
                            f"time={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_10_asymptoticity(record_criterion, standard_coefficients, standard_expansion):
    start = time.time()
    gts = [mpq(1, 8), mpq(1, 16), mpq(1, 32), mpq(1, 64)]
    asym = asymptoticity_check(2, [1, 2, 3], gts, standard_coefficients, standard_expansion)
    slope_ok = all(abs(asym.slopes[K] - (K + 1)) <= mpmath.mpf(2) / 10 for K in (1, 2, 3))
    mu = to_real(MU_MAX)
    sol = propagate_jets(standard_coefficients, mu, 8, 12)
    table = subtraction_table(sol, standard_expansion, mu, 1 / mu, 6, 8)
    ratios = sorted(normalized_remainder_ratio(table.delta[(n, k, mu)].value, n, k)
                    for n in (2, 4, 6) for k in range(9))
    median = ratios[len(ratios) // 2]
    ratio_ok = ratios[-1] <= 3 * median
    elapsed = time.time() - start
    ok = slope_ok and ratio_ok and elapsed < 300
    record_criterion(10, ok, f"slopes={[mpmath.nstr(asym.slopes[K], 4) for K in (1, 2, 3)]} "
                             f"max/median={mpmath.nstr(ratios[-1] / median, 3)} time={elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_11_borel_machinery(record_criterion, standard_coefficients, standard_expansion):
    start = time.time()
    z = mpmath.mpf(1) / 10
    euler = FormalSeries(tuple((-1) ** n * math.factorial(n) for n in range(40)))
    euler_err = abs(borel_sum(borel_transform(euler), z).value - oracles.euler_borel_sum(z))
    series = two_point_series(standard_expansion)
    g = mpmath.mpf(1) / 8
    direct_err = abs(borel_sum(borel_transform(series), g).value - series.partial_sum(g))
    samples = [mpq(1, 8), mpq(1, 10), mpq(1, 12)]
    source = remainders_from_function(series, two_point_of_coupling(standard_coefficients))
    cert = sokal_certificate(series, source, mpq(1, 6), 8, samples)
    control = FormalSeries(tuple(math.factorial(n) ** 2 for n in range(10)))
    ctrl = sokal_certificate(control, lambda s, n: math.factorial(n) ** 2 * abs(to_real(s)) ** n,
                             mpq(1, 6), 8, samples)
    elapsed = time.time() - start
    ok = (euler_err < _e(6) and direct_err < _e(10) and cert.verdict == "consistent"
          and ctrl.verdict == "inconclusive" and elapsed < 120)
    record_criterion(11, ok, f"euler={mpmath.nstr(euler_err, 3)} direct={mpmath.nstr(direct_err, 3)} "
                             f"sokal={cert.verdict} control={ctrl.verdict} time={elapsed:.0f}s")
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the truncated hierarchy follows the analytic continuation of the "
                                       "Taylor data, not the resummed two-point function; see the decision log")
def test_criterion_12_truncated_ode_oracle(record_criterion, standard_fixed_point, standard_coefficients):
    start = time.time()
    b1 = standard_fixed_point[0]
    mu = to_real(MU_MAX)
    gaps = []
    for n_max in (6, 8, 10, 12):
        oracle = truncated_ode_oracle(b1, G40, n_max, mu)
        jet = propagate_jets(standard_coefficients, mu, n_max, n_max // 2).value(4, mu)
        gaps.append(abs(oracle[4] - jet))
    elapsed = time.time() - start
    ok = all(b < a for a, b in zip(gaps, gaps[1:])) and elapsed < 300
    record_criterion(12, ok, f"gaps={[mpmath.nstr(d, 12) for d in gaps]} time={elapsed:.0f}s")
    assert ok
