"""Numeric Taylor coefficients of the two-point function at mu = 0.

Uses the compiled quad-precision kernel when it is importable and the
precision request fits in 113 bits; otherwise the mpmath recursion.
"""
from __future__ import annotations

import mpmath

from ._recursion import taylor_levels
from .numerics import to_real

try:
    from . import _kernel
except ImportError:  # pragma: no cover - exercised when the extension is not built
    _kernel = None

QUAD_BITS = 113


def compiled_available() -> bool:
    return _kernel is not None


def backend_name(precision_bits: int) -> str:
    if _kernel is not None and precision_bits <= QUAD_BITS:
        return "cython-float128"
    return "python-mpmath"


def _mpf_frac(p: int, q: int):
    return mpmath.mpf(p) / q


def f2_coefficients_python(b1, g40, k_count: int, precision_bits: int) -> list:
    with mpmath.workprec(precision_bits):
        f2, _ = taylor_levels(to_real(b1), to_real(g40), 2 * k_count, _mpf_frac)
        return [+v for v in f2[:k_count]]


def f2_coefficients_compiled(b1, g40, k_count: int) -> list:
    if _kernel is None:
        raise RuntimeError("compiled kernel is not available")
    with mpmath.workprec(QUAD_BITS + 16):
        raw = _kernel.f2_coefficients(_decimal(b1), _decimal(g40), k_count)
        return [mpmath.mpf(s) for s in raw]


def _decimal(x) -> str:
    return mpmath.nstr(to_real(x), 40, min_fixed=1, max_fixed=0)


def f2_coefficients(b1, g40, k_count: int, precision_bits: int, backend: str | None = None) -> list:
    """f_{2,0..k_count-1} as mpmath reals."""
    backend = backend or backend_name(precision_bits)
    if backend == "cython-float128":
        return f2_coefficients_compiled(b1, g40, k_count)
    return f2_coefficients_python(b1, g40, k_count, precision_bits)
