"""Shared fixtures: the standard fixed-point data and the coefficient
pipeline built on it, plus the acceptance summary printed at the end of a run.
"""
from __future__ import annotations

import mpmath
import pytest
from hypothesis import HealthCheck, settings

from standard_data import B1_STAR, G40

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session", autouse=True)
def _session_precision():
    """Session fixtures are built before any function-scoped fixture runs."""
    with mpmath.workprec(256):
        yield


@pytest.fixture(autouse=True)
def _precision():
    with mpmath.workprec(256):
        yield


@pytest.fixture(scope="session")
def pipeline():
    from mfflow.flow import CoefficientPipeline

    return CoefficientPipeline(256, tol_bits=100)


@pytest.fixture(scope="session")
def standard_target():
    from mfflow.ansatz import RenormalizationTarget

    from standard_data import C_STANDARD, MU_MAX

    return RenormalizationTarget(C_STANDARD, MU_MAX, G40)


@pytest.fixture(scope="session")
def b1_star():
    with mpmath.workprec(256):
        return mpmath.mpf(B1_STAR)


@pytest.fixture(scope="session")
def standard_coefficients(pipeline, b1_star):
    with mpmath.workprec(256):
        return pipeline.coefficients(b1_star, G40, 150)


@pytest.fixture(scope="session")
def standard_expansion(standard_coefficients):
    from mfflow.perturbation import gtilde_coefficients

    with mpmath.workprec(256):
        return gtilde_coefficients(standard_coefficients, 8, 24)


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])

