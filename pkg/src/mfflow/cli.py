"""Batch front end: ``mfflow <command> [--config PATH] [--key value ...] [--out DIR] [--format csv|json]``.

Configuration precedence (lowest first): built-in defaults, the INI file,
the MFFLOW_PRECISION_BITS environment variable, command-line flags.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import platform
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Callable

import mpmath

from . import __version__, kernel
from .numerics import DomainError, exact, mpq, to_real, working_precision
from .report import Report, emit

COMMANDS = ("fixed-point", "taylor", "flow-eval", "perturb", "borel", "certify", "sweep")
PRECISION_ENV = "MFFLOW_PRECISION_BITS"


class ConfigError(ValueError):
    """A configuration key failed validation; the message names the key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# ---------------------------------------------------------------------------
# value parsers
# ---------------------------------------------------------------------------

def _rational(key, s):
    if not isinstance(s, str):
        return exact(s)
    try:
        return exact(Fraction(s.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(key, f"expected a rational number such as 8, 1/300 or 0.25, got {s!r}") from None


def _integer(key, s):
    if isinstance(s, int) and not isinstance(s, bool):
        return s
    try:
        return int(str(s).strip())
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {s!r}") from None


# decimal config reals are parsed above any working precision, independent of import-time state
CONFIG_REAL_BITS = 4096


def _real(key, s):
    if isinstance(s, mpmath.mpf):
        return s
    try:
        with mpmath.workprec(CONFIG_REAL_BITS):
            v = mpmath.mpf(str(s).strip())
    except (ValueError, TypeError):
        raise ConfigError(key, f"expected a real number, got {s!r}") from None
    if not mpmath.isfinite(v):
        raise ConfigError(key, "must be finite")
    return v


def _boolean(key, s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected true or false, got {s!r}")


def _list_of(parse):
    def parse_list(key, s):
        if isinstance(s, (list, tuple)):
            items = list(s)
        else:
            items = [t for t in str(s).replace(";", ",").split(",") if t.strip()]
        if not items:
            raise ConfigError(key, "expected a non-empty comma-separated list")
        return [parse(key, t) for t in items]

    return parse_list


def _optional(parse):
    def parse_opt(key, s):
        if s is None or (isinstance(s, str) and s.strip().lower() in ("", "none", "auto")):
            return None
        return parse(key, s)

    return parse_opt


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    parse: Callable
    default: object
    check: Callable | None = None
    hint: str = ""


def _check(pred, message):
    def run(key, v):
        if not pred(v):
            raise ConfigError(key, message)

    return run


def _each(pred, message):
    return _check(lambda vs: all(pred(v) for v in vs), message)


TOP_KEYS = {
    "mu_max": Key(_rational, mpq(8), _check(lambda v: v > 6, "mu_max > 6 required")),
    "g40": Key(_rational, mpq(1, 300), _check(lambda v: v > 0, "g40 > 0 required")),
    "c": Key(_rational, mpq(1, 4), _check(lambda v: abs(v) <= mpq(1, 3), "|c| <= 1/3 required")),
    "n_max": Key(_integer, 12, _check(lambda v: v >= 4 and v % 2 == 0, "n_max must be even and >= 4")),
    "k_max": Key(_integer, 24, _check(lambda v: v >= 0, "k_max >= 0 required")),
    "j_max": Key(_integer, 8, _check(lambda v: v >= 1, "j_max >= 1 required")),
    "q_max": Key(_integer, 60, _check(lambda v: v >= 3, "q_max >= 3 required")),
    "precision_bits": Key(_integer, 256, _check(lambda v: 64 <= v <= 4096, "precision_bits must lie in [64, 4096]")),
    "tol": Key(_real, _real("tol", "1e-25"), _check(lambda v: v > 0, "tol > 0 required")),
}

_opt_b1 = _check(lambda v: v is None or abs(v) < mpq(1, 3), "|b1| < 1/3 required")
_couplings = _each(lambda v: 0 < v < mpq(1, 6), "every coupling must lie in (0, 1/6)")

SECTION_KEYS = {
    "fixed-point": {
        "start": Key(_rational, mpq(0), _opt_b1),
        "max_iter": Key(_integer, 100, _check(lambda v: v >= 1, "max_iter >= 1 required")),
        "goal": Key(_real, _real("goal", "1e-19"), _check(lambda v: v > 0, "goal > 0 required")),
    },
    "taylor": {
        "b1": Key(_rational, mpq(1, 40), _opt_b1),
    },
    "flow-eval": {
        "b1": Key(_optional(_rational), None, _opt_b1),
        "mu": Key(_optional(_list_of(_rational)), None,
                  _check(lambda v: v is None or all(m >= 0 for m in v), "every mu must be >= 0")),
        "order": Key(_optional(_integer), None, _check(lambda v: v is None or v >= 1, "order >= 1 required")),
    },
    "perturb": {
        "b1": Key(_optional(_rational), None, _opt_b1),
        "remainder_order": Key(_integer, 6, _check(lambda v: 0 <= v <= 10, "remainder_order must lie in [0, 10]")),
        "n_top": Key(_integer, 6, _check(lambda v: v >= 4 and v % 2 == 0, "n_top must be even and >= 4")),
        "series_terms": Key(_integer, 150, _check(lambda v: v >= 30, "series_terms >= 30 required")),
    },
    "borel": {
        "b1": Key(_optional(_rational), None, _opt_b1),
        "couplings": Key(_list_of(_rational), [mpq(1, 8), mpq(1, 10), mpq(1, 12)], _couplings),
        "terms": Key(_integer, 8, _check(lambda v: 1 <= v <= 20, "terms must lie in [1, 20]")),
        "circle_diameter": Key(_rational, mpq(1, 6),
                               _check(lambda v: 0 < v <= mpq(1, 6), "circle_diameter must lie in (0, 1/6]")),
        "series_terms": Key(_integer, 150, _check(lambda v: v >= 30, "series_terms >= 30 required")),
    },
    "certify": {
        "b1": Key(_rational, mpq(1, 40), _opt_b1),
        "seed": Key(_integer, 0),
        "samples": Key(_integer, 40, _check(lambda v: v >= 1, "samples >= 1 required")),
        "remainders": Key(_boolean, True),
    },
    "sweep": {
        "mu_max": Key(_list_of(_rational), [mpq(8), mpq(16), mpq(32), mpq(64)],
                      _each(lambda v: v > 6, "mu_max > 6 required")),
        "workers": Key(_optional(_integer), None, _check(lambda v: v is None or v >= 1, "workers >= 1 required")),
    },
}


@dataclass
class RunConfig:
    mu_max: object = mpq(8)
    g40: object = mpq(1, 300)
    c: object = mpq(1, 4)
    n_max: int = 12
    k_max: int = 24
    j_max: int = 8
    q_max: int = 60
    precision_bits: int = 256
    tol: object = _real("tol", "1e-25")
    sections: dict = field(default_factory=dict)

    @property
    def bphz(self) -> bool:
        return self.c == 0

    def section(self, command: str) -> dict:
        out = {k: entry.default for k, entry in SECTION_KEYS[command].items()}
        out.update(self.sections.get(command, {}))
        return out

    def echo(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "sections"}
        out["sections"] = {name: dict(vals) for name, vals in sorted(self.sections.items())}
        return out


def _normalize(key: str) -> str:
    return key.strip().replace("-", "_")


def _assign(values: dict, schema: dict, key: str, raw, where: str) -> None:
    if key not in schema:
        known = ", ".join(sorted(schema))
        raise ConfigError(key, f"unknown key in {where}; known keys: {known}")
    entry = schema[key]
    v = entry.parse(key, raw)
    if entry.check is not None:
        entry.check(key, v)
    values[key] = v


def _read_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror or exc}") from None
    stripped = [ln for ln in text.splitlines() if ln.strip() and not ln.strip().startswith(("#", ";"))]
    if stripped and not stripped[0].lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError("config", f"malformed file {path}: {exc}") from None
    return {name: dict(parser[name]) for name in parser.sections()}


def parse_config(path: str | None = None, flags: dict | None = None, command: str | None = None,
                 environ: dict | None = None) -> RunConfig:
    """Validated RunConfig from an optional INI file and flag overrides.

    Flags whose key belongs to the command's own section go there; all
    others must be top-level keys.
    """
    environ = os.environ if environ is None else environ
    top: dict = {}
    sections: dict = {}
    if path is not None:
        for name, items in _read_file(path).items():
            if name == "run":
                for k, v in items.items():
                    _assign(top, TOP_KEYS, _normalize(k), v, "[run]")
            elif name in SECTION_KEYS:
                vals = sections.setdefault(name, {})
                for k, v in items.items():
                    _assign(vals, SECTION_KEYS[name], _normalize(k), v, f"[{name}]")
            else:
                raise ConfigError(name, f"unknown section [{name}]; use [run] or one of {', '.join(COMMANDS)}")
    env_bits = environ.get(PRECISION_ENV)
    if env_bits is not None and env_bits.strip():
        _assign(top, TOP_KEYS, "precision_bits", env_bits, PRECISION_ENV)
    for k, v in (flags or {}).items():
        k = _normalize(k)
        if command is not None and k in SECTION_KEYS[command]:
            _assign(sections.setdefault(command, {}), SECTION_KEYS[command], k, v, f"--{k} for {command}")
        else:
            _assign(top, TOP_KEYS, k, v, "flags")
    cfg = RunConfig(**{k: top.get(k, entry.default) for k, entry in TOP_KEYS.items()}, sections=sections)
    return cfg


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------

def tol_bits(tol) -> int:
    return int(math.ceil(-mpmath.log(to_real(tol), 2))) + 16


class Context:
    """Per-run caches: the coefficient pipeline and the solved fixed point."""

    def __init__(self, cfg: RunConfig):
        from .flow import CoefficientPipeline

        self.cfg = cfg
        self.pipeline = CoefficientPipeline(cfg.precision_bits, tol_bits=tol_bits(cfg.tol))
        self._fixed = None

    @property
    def target(self):
        from .ansatz import RenormalizationTarget

        return RenormalizationTarget(self.cfg.c, self.cfg.mu_max, self.cfg.g40)

    def fixed_point(self, start=0, max_iter: int = 100):
        from .ansatz import picard_fixed_point

        if self._fixed is None:
            self._fixed = picard_fixed_point(self.target, tol=self.cfg.tol, max_iter=max_iter, u0=start,
                                             pipeline=self.pipeline, q_max=self.cfg.q_max)
        return self._fixed

    def b1(self, given=None):
        """The requested b1 or, when absent, the solved fixed point."""
        if given is not None:
            return given, False
        b1, _ = self.fixed_point()
        return b1, True


def _real_str(x, digits=12) -> str:
    return mpmath.nstr(to_real(x), digits)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_fixed_point(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from .ansatz import certified_fixed_point_evaluation, contraction_certificate

    sec = cfg.section("fixed-point")
    target = ctx.target
    report.metadata["target_regime"] = "contraction" if target.in_contraction_regime else "outside proven contraction domain"
    try:
        b1, trace = ctx.fixed_point(sec["start"], sec["max_iter"])
    except Exception as exc:  # NonConvergence and ContractionViolation carry a partial trace
        trace = getattr(exc, "trace", None)
        if trace is not None:
            _trace_table(report, trace)
        raise
    _trace_table(report, trace)
    ratios = trace.ratios
    report.certify("picard convergence", f"iterations <= {sec['max_iter']}",
                   trace.residual < cfg.tol and all(r < 1 for r in ratios), trace.certified,
                   {"iterations": len(trace.deltas), "residual": trace.residual,
                    "max_ratio": max(ratios) if ratios else None})
    cb = contraction_certificate(b1, target)
    report.certify("contraction", f"|dG/db1| at b1 = {_real_str(b1)}", cb.value < 1, cb.certified,
                   {"value": cb.value, "truncated": cb.truncated_value, "tail_bound": cb.tail_bound})
    ev = certified_fixed_point_evaluation(b1, target, ctx.pipeline, goal=sec["goal"])
    summary = report.table("fixed_point", ["b1_star", "residual", "q_max", "f2_mu_max", "target",
                                           "deviation", "error_bound", "contraction"])
    summary.add(b1, trace.residual, ev["q_max"], ev["f2"], to_real(target.c) / to_real(target.mu_max),
                ev["deviation"], ev["error_bound"], cb.value)
    report.certify("renormalization condition", f"|f2(mu_max) - c/mu_max| < {_real_str(10 * sec['goal'], 3)}",
                   ev["deviation"] + ev["error_bound"] < sec["goal"] * 10, ev["certified"],
                   {"deviation": ev["deviation"], "error_bound": ev["error_bound"]},
                   flags=[f"tail certificate: {ev['certificate']}"])


def _trace_table(report: Report, trace) -> None:
    t = report.table("picard_trace", ["iteration", "iterate", "delta", "ratio"])
    ratios = [None] + trace.ratios
    for i, delta in enumerate(trace.deltas):
        t.add(i + 1, trace.iterates[i + 1], delta, ratios[i] if i < len(ratios) else None)


def run_taylor(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from .flow import (closed_form_seeds, polynomial_bound_violations, polynomial_taylor_system,
                       small_data_constant, taylor_bound_violations, taylor_system)

    b1 = cfg.section("taylor")["b1"]
    ts = taylor_system(b1, cfg.g40, cfg.n_max, cfg.k_max)
    t2 = report.table("taylor_f2", ["k", "f2_k"])
    for k, v in enumerate(ts.f2.coeffs):
        t2.add(k, v)
    tg = report.table("taylor_g", ["n", "k", "g_nk"])
    for n in sorted(ts.g):
        for k, v in enumerate(ts.g[n].coeffs):
            tg.add(n, k, v)
    seeds_ok = all(closed_form_seeds(n, cfg.g40, b1) == (ts.g[n][0], ts.g[n][1])
                   for n in sorted(ts.g) if len(ts.g[n]) >= 2)
    report.certify("closed-form seeds", f"even n <= {max(ts.g)}", seeds_ok, True)
    K = small_data_constant(b1, cfg.g40)
    if K is None:
        report.certify("factorial Taylor bounds", "small-data hypotheses", False, False, verdict="skipped",
                       flags=["small-data hypotheses fail: need |b1| <= K, g40 <= K/10, K <= 1/30"])
    else:
        bad = taylor_bound_violations(ts, K, cfg.n_max, cfg.k_max)
        report.certify("factorial Taylor bounds", f"n <= {cfg.n_max}, k <= {cfg.k_max}", not bad, True,
                       {"K": K, "violations": len(bad)}, [f"violation at {v}" for v in bad[:5]])
    Kp = mpq(1, 30)
    if 30 * cfg.g40 > Kp:
        report.certify("polynomial Taylor bounds", "small-data hypotheses", False, False, verdict="skipped",
                       flags=["g40 > 1/900: the b1-polynomial bounds need g40 <= K/30 with K <= 1/30"])
    else:
        n_top, k_top = min(cfg.n_max, 16), min(cfg.k_max, 12)
        ps = polynomial_taylor_system(cfg.g40, n_top, k_top)
        bad = polynomial_bound_violations(ps, Kp, n_top, k_top)
        report.certify("polynomial Taylor bounds", f"n <= {n_top}, k <= {k_top}, all nu", not bad, True,
                       {"K": Kp, "g40": cfg.g40, "violations": len(bad)}, [f"violation at {v}" for v in bad[:5]])


def run_flow_eval(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from .ansatz import f2_jet
    from .flow import flow_residual, propagate_jets

    sec = cfg.section("flow-eval")
    b1, solved = ctx.b1(sec["b1"])
    mus = sec["mu"] or [cfg.mu_max]
    order = sec["order"] or cfg.n_max // 2
    if order < cfg.n_max // 2:
        raise ConfigError("order", f"order >= n_max/2 = {cfg.n_max // 2} required")
    if solved:
        coeffs = ctx.fixed_point()[1].coefficients
    else:
        coeffs = ctx.pipeline.coefficients(b1, cfg.g40, cfg.q_max)
    report.metadata["b1"] = b1
    jets = report.table("jets", ["n", "mu", "l", "derivative", "error_bound"])
    res = report.table("residuals", ["n", "mu", "l", "residual"])
    worst = mpmath.mpf(0)
    certified = True
    for mu in mus:
        mur = to_real(mu)
        ev = f2_jet(coeffs, mur, order)
        certified = certified and bool(ev.certified)
        sol = propagate_jets(coeffs, mur, cfg.n_max, order, mu_max=cfg.mu_max, f2=ev)
        for n in range(2, cfg.n_max + 1, 2):
            jet = sol.jets[(n, mur)]
            for l, d in enumerate(jet.derivs):
                jets.add(n, mu, l, d, sol.error_bounds[(n, mur)])
        for n in range(2, cfg.n_max - 1, 2):
            r = flow_residual(sol, n, mur)
            for l, d in enumerate(r.derivs):
                res.add(n, mu, l, d)
                worst = max(worst, abs(to_real(d)))
    report.certify("flow residual", f"n <= {cfg.n_max - 2} at {len(mus)} points", worst < cfg.tol, certified,
                   {"max_residual": worst})


def _series_setup(cfg: RunConfig, ctx: Context, b1_given, series_terms: int):
    from .perturbation import gtilde_coefficients

    b1, _ = ctx.b1(b1_given)
    coeffs = ctx.pipeline.coefficients(b1, cfg.g40, series_terms)
    gexp = gtilde_coefficients(coeffs, cfg.mu_max, min(series_terms + 1, 24))
    return b1, coeffs, gexp


def run_perturb(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from .flow import propagate_jets
    from .perturbation import (RenormalizationConstants, alpha_flow, bound_certificates,
                               cross_framework_constants, normalized_remainder_ratio, remainder_by_subtraction,
                               remainder_flow, subtraction_table, telescoping_defect, to_mu)

    sec = cfg.section("perturb")
    K = sec["remainder_order"]
    n_top = sec["n_top"]
    b1, coeffs, gexp = _series_setup(cfg, ctx, sec["b1"], sec["series_terms"])
    report.metadata["b1"] = b1
    # alpha-space amplitudes
    if cfg.bphz:
        consts = RenormalizationConstants.bphz(cfg.j_max)
    else:
        consts = cross_framework_constants(gexp, cfg.c, cfg.j_max)
    amps = alpha_flow(cfg.j_max, consts, alpha0=mpmath.exp(-to_real(cfg.mu_max)))
    dump = report.table("amplitudes", ["n", "j", "alpha_power", "log_alpha_power", "alpha0_power",
                                       "log_alpha0_power", "coefficient"])
    residual_terms = 0
    for (n, j) in sorted(amps.table):
        for key, v in sorted(amps.table[(n, j)].items()):
            dump.add(n, j, *key, v)
        residual_terms += len(amps.flow_residual(n, j).terms)
    boundary_terms = sum(len(p.terms) for p in amps.boundary_residuals().values())
    report.certify("amplitude flow residual", f"n <= {2 * cfg.j_max + 2}, j <= {cfg.j_max}",
                   residual_terms == 0 and boundary_terms == 0, True,
                   {"residual_terms": residual_terms, "boundary_terms": boundary_terms},
                   ["BPHZ conditions" if cfg.bphz else "general conditions from the mean-field data"])
    # f_{n,j}(mu_max) by both routes of the gt-expansion and from the amplitudes
    mu = to_real(cfg.mu_max)
    vals = report.table("coefficients_at_mu_max", ["n", "j", "recursion", "z_series", "amplitude"])
    dual = mpmath.mpf(0)
    for j in range(1, cfg.j_max + 1):
        for n in range(2, n_top + 1, 2):
            a = gexp.f_poly(n, j)[0]
            b = gexp.f_poly_from_z(n, j)[0]
            dual = max(dual, abs(to_real(a) - to_real(b)))
            vals.add(n, j, a, b, to_mu(amps, n, j, mu).value)
    report.certify("gt-expansion dual route", f"n <= {n_top}, j <= {cfg.j_max}", dual < cfg.tol, gexp.certified,
                   {"max_difference": dual})
    # remainders
    gt = 1 / mu
    sol = propagate_jets(coeffs, mu, n_top + 2, max(12, n_top + 2 * K))
    table = subtraction_table(sol, gexp, mu, gt, n_top, K + 1)
    tower = {S: remainder_by_subtraction(2, S - 1, mu, gt, sol, gexp) for S in range(1, K + 2)}
    flow = remainder_flow(tower, gexp, sol, mu, n_top, K, gt)
    rem = report.table("remainders", ["n", "K", "subtraction", "remainder_flow", "difference", "normalized_ratio"])
    diff = mpmath.mpf(0)
    ratios = []
    for n in range(2, n_top + 1, 2):
        for k in range(0, K + 1):
            s = table.delta[(n, k, mu)].value
            f = flow.delta[(n, k, mu)].value if n >= 4 else None
            d = abs(s - f) if f is not None else None
            if d is not None:
                diff = max(diff, d)
            ratio = normalized_remainder_ratio(s, n, k)
            ratios.append(ratio)
            rem.add(n, k, s, f, d, ratio)
    report.certify("remainder cross route", f"4 <= n <= {n_top}, K <= {K}", diff < mpmath.mpf("1e-15"),
                   gexp.certified, {"max_difference": diff})
    tele = max(telescoping_defect(n, k, mu, gt, table, gexp) for n in range(2, n_top + 1, 2) for k in range(0, K + 1))
    report.certify("telescoping identity", f"n <= {n_top}, K <= {K}", tele < mpmath.mpf("1e-20"), True,
                   {"max_defect": tele})
    srt = sorted(ratios)
    median = srt[len(srt) // 2]
    report.certify("normalized remainder ratio", f"n <= {n_top}, K <= {K}", max(ratios) <= 3 * median, False,
                   {"max": max(ratios), "median": median}, ["empirical bound"])
    for name, fit in bound_certificates(remainders=table).items():
        _fit_certificate(report, name, fit, f"n <= {n_top}, K <= {K + 1}")


def _fit_certificate(report: Report, name: str, fit, rng: str) -> None:
    flags = []
    if fit.growing_at_edge:
        flags.append("fitted constant still growing at the sampled edge")
    if not fit.zero_exponent_ok:
        flags.append("entries with zero exponent exceed the printed prefactor")
    report.certify(f"bound fit: {name}", rng, fit.finite, False,
                   {"constant": fit.constant, "samples": fit.samples,
                    "worst": str(fit.worst) if fit.worst is not None else None}, flags)


def run_borel(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from .borel import (ComplexCoupling, FormalSeries, borel_sum, borel_transform, estimated_radius,
                        remainders_from_function, sokal_certificate, two_point_of_coupling, two_point_series)

    sec = cfg.section("borel")
    b1, coeffs, gexp = _series_setup(cfg, ctx, sec["b1"], sec["series_terms"])
    report.metadata["b1"] = b1
    series = two_point_series(gexp)
    B = borel_transform(series)
    radius = estimated_radius(B)
    report.metadata["borel_radius_estimate"] = radius
    tr = report.table("borel_transform", ["k", "series", "transform"])
    for k in range(len(series)):
        tr.add(k, series[k], B[k])
    f = two_point_of_coupling(coeffs)
    sums = report.table("borel_sums", ["coupling", "borel_sum", "quadrature_error", "direct_sum", "difference",
                                       "strategy"])
    worst = mpmath.mpf(0)
    for g in sec["couplings"]:
        r = borel_sum(B, g)
        direct = series.partial_sum(to_real(g))
        d = abs(r.value - direct)
        worst = max(worst, d)
        sums.add(g, r.value, r.error, direct, d, r.strategy)
    report.certify("borel sum equals direct sum", "couplings " + ",".join(str(g) for g in sec["couplings"]),
                   worst < mpmath.mpf("1e-10"), gexp.certified, {"max_difference": worst})
    R = sec["circle_diameter"]
    N = sec["terms"]
    source = remainders_from_function(series, f)
    cert = sokal_certificate(series, source, R, N, sec["couplings"])
    _sokal_table(report, "sokal_two_point", cert)
    report.certify("factorial remainder bound", f"N <= {N}, circle diameter {R}", cert.verdict == "consistent",
                   False, {"A": cert.A, "sigma": cert.sigma, "growth_exponent": cert.growth_exponent},
                   [cert.verdict] + cert.flags)
    control = FormalSeries(tuple(math.factorial(n) ** 2 for n in range(N + 2)))
    ctrl = sokal_certificate(control, lambda z, n: math.factorial(n) ** 2 * abs(to_real(z)) ** n, R, N,
                             sec["couplings"])
    report.certify("negative control (n!)^2", f"N <= {N}", ctrl.verdict == "inconclusive", True,
                   {"A": ctrl.A, "sigma": ctrl.sigma, "growth_exponent": ctrl.growth_exponent},
                   [ctrl.verdict] + ctrl.flags)
    # complex couplings inside the circle: geometric remainder envelope
    C3 = gexp.gt_envelope_constant()
    cx = report.table("complex_remainders", ["real", "imaginary", "N", "remainder", "envelope"])
    ok = True
    for g in sec["couplings"]:
        z = ComplexCoupling(g, g / 2)
        if not z.inside_circle(R):
            continue
        az = abs(z.value)
        for n in range(1, N + 1):
            rn = abs(source(z, n))
            env = C3 * az ** n / (1 - az)
            ok = ok and rn <= env
            cx.add(z.real, z.imaginary, n, rn, env)
    report.certify("complex remainder envelope", f"N <= {N}", ok, False, {"C3": C3})


def _sokal_table(report: Report, name: str, cert) -> None:
    t = report.table(name, ["coupling", "N", "remainder"])
    for z, n, r in cert.samples:
        t.add(mpmath.re(z), n, r)


def run_certify(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from . import combinatorics as cb
    from .ansatz import polynomial_coefficient_violations, uniform_envelope_violations
    from .combinatorics import (fuss_convolution, fuss_identity_weighted, inverse_square_convolution_sides, squared_convolution_sides,
                                mixed_factorial_sides, mixed_factorial_edge_sides, ordered_bell_bound_holds,
                                stirling2, stirling2_partition_sum, vandermonde_sides)
    from .flow import (polynomial_bound_violations, polynomial_taylor_system, small_data_constant,
                       taylor_bound_violations, taylor_system)
    from .perturbation import alpha_flow, bound_certificates, log_integral_sides

    sec = cfg.section("certify")
    rng = random.Random(sec["seed"])

    def suite(name, rng_text, checks):
        failures = []
        count = 0
        for label, ok in checks:
            count += 1
            if not ok:
                failures.append(label)
        report.certify(name, rng_text, not failures, True, {"checks": count, "failures": len(failures)},
                       [f"fails at {f}" for f in failures[:5]])

    def guarded(name, rng_text, build):
        try:
            suite(name, rng_text, build())
        except (AssertionError, DomainError) as exc:
            report.certify(name, rng_text, False, True, flags=[str(exc)])

    guarded("Fuss-Catalan convolution", "s in {1,2,3}, m <= 30",
            lambda: [((s, m), fuss_convolution(s, m) is not None) for s in (1, 2, 3) for m in range(31)])
    guarded("weighted Fuss-Catalan identity", "even n in [6, 80]",
            lambda: [(n, (lambda p: p[0] == p[1])(fuss_identity_weighted(n))) for n in range(6, 81, 2)])
    guarded("Vandermonde convolution", f"{sec['samples']} random a, b <= 40", lambda: [
        ((a, b, nu), (lambda p: p[0] == p[1])(vandermonde_sides(a, b, nu)))
        for a, b, nu in ((rng.randint(0, 40), rng.randint(0, 40), rng.randint(0, 80)) for _ in range(sec["samples"]))])
    guarded("binomial product bound", f"{sec['samples']} random instances", lambda: [
        ((a, b, c_, d), cb.binomial_product_bound_holds(a, b, c_, d))
        for a, b, c_, d in ((rng.randint(0, 40), rng.randint(0, 40), rng.randint(0, 40), rng.randint(0, 40))
                            for _ in range(sec["samples"]))])
    guarded("ordered Bell bound", "n <= 20", lambda: [(n, ordered_bell_bound_holds(n)) for n in range(21)])
    guarded("Stirling partition sum", "m <= 12, k <= m",
            lambda: [((m, k), stirling2(m, k) == stirling2_partition_sum(m, k)) for m in range(13) for k in range(m + 1)])
    guarded("inverse-square convolution", "even n in [12, 200]",
            lambda: [(n, (lambda p: p[0] <= p[1])(inverse_square_convolution_sides(n))) for n in range(12, 201, 2)])
    guarded("factorial convolution inequalities", "l <= 200", lambda: [
        ((l, i), lhs <= rhs) for l in range(0, 201) for i, (lhs, rhs) in enumerate(squared_convolution_sides(l))])
    guarded("mixed factorial sums", "3 <= n <= 9, l <= 5, lambda <= l", lambda: [
        ((n, l, lam), (lambda p: p[0] <= p[1])(mixed_factorial_sides(n, l, lam)))
        for n in range(3, 10) for l in range(6) for lam in range(l + 1)] + [
        ((n, l, lam, "n1=1"), (lambda p: p[0] <= p[1])(mixed_factorial_edge_sides(n, l, lam)))
        for n in range(1, 10) for l in range(6) for lam in range(l + 1)])
    a0 = mpq(1, 3000)
    guarded("logarithmic integral bound", "s <= 6, l <= 6, alpha in {1/1000, 1/10, 1/2, 1}", lambda: [
        ((s, l, al), (lambda p: to_real(p[0]) <= to_real(p[1]) * (1 + mpmath.mpf(2) ** (20 - mpmath.mp.prec))
                      )(log_integral_sides(s, l, al, a0)))
        for s in range(1, 7) for l in range(7) for al in (mpq(1, 1000), mpq(1, 10), mpq(1, 2), mpq(1))])
    # coefficient bounds under the small-data hypotheses
    b1 = sec["b1"]
    K = small_data_constant(b1, cfg.g40)
    if K is None:
        for name in ("factorial Taylor bounds", "uniform ansatz envelope"):
            report.certify(name, "small-data hypotheses", False, False, verdict="skipped",
                           flags=["small-data hypotheses fail"])
    else:
        ts = taylor_system(b1, cfg.g40, 20, 20)
        bad = taylor_bound_violations(ts, K, 20, 20)
        report.certify("factorial Taylor bounds", "n <= 20, k <= 20", not bad, True, {"K": K, "violations": len(bad)})
        from .ansatz import b_sequence_from_taylor

        tb = taylor_system(b1, cfg.g40, 4, 40)
        b = b_sequence_from_taylor(tb.f2.coeffs[:40])
        bad = uniform_envelope_violations(b, K)
        report.certify("uniform ansatz envelope", "q <= 40", not bad, True, {"K": K, "violations": len(bad)})
    g_poly = min(cfg.g40, mpq(1, 900))
    ps = polynomial_taylor_system(g_poly, 16, 12)
    bad = polynomial_bound_violations(ps, mpq(1, 30), 16, 12)
    report.certify("polynomial Taylor bounds", "n <= 16, k <= 12, all nu", not bad, True,
                   {"K": mpq(1, 30), "g40": g_poly, "violations": len(bad)})
    if cfg.g40 > mpq(1, 300):
        report.certify("polynomial ansatz coefficients", "small-data hypotheses", False, False, verdict="skipped",
                       flags=["g40 > 1/300"])
    else:
        pb = polynomial_taylor_system(cfg.g40, 4, 28)
        bad = polynomial_coefficient_violations(pb.b_poly, 30)
        report.certify("polynomial ansatz coefficients", "q <= 30, all nu", not bad, True, {"violations": len(bad)})
    # amplitude and coefficient bound fits (BPHZ conditions)
    j_top = min(cfg.j_max, 6)
    amps = alpha_flow(j_top, alpha0=mpmath.exp(-to_real(cfg.mu_max)))
    for name, fit in bound_certificates(amps, mu_max=cfg.mu_max, n_top=10, j_top=j_top).items():
        _fit_certificate(report, name, fit, f"n <= 10, j <= {j_top}, mu in [mu_max - 1/2, mu_max]")
    if sec["remainders"]:
        from .flow import propagate_jets
        from .perturbation import certificate_grid, subtraction_table

        b1s, coeffs, gexp = _series_setup(cfg, ctx, None, 150)
        violations = gexp.gt_envelope_violations(certificate_grid(cfg.mu_max))
        report.certify("gt-coefficient envelope", f"m <= {gexp.m_max}, mu in [mu_max - 1/2, mu_max]",
                       not violations, gexp.certified, {"C3": gexp.gt_envelope_constant(), "violations": len(violations)})
        mu = to_real(cfg.mu_max)
        sol = propagate_jets(coeffs, mu, 8, 12)
        table = subtraction_table(sol, gexp, mu, 1 / mu, 6, 8)
        for name, fit in bound_certificates(remainders=table).items():
            _fit_certificate(report, name, fit, "n <= 6, K <= 8")


def _sweep_point(args):
    g40, c, mm, tol, bits = args
    from .flow import CoefficientPipeline, triviality_scan

    with working_precision(bits):
        pipe = CoefficientPipeline(bits, tol_bits=tol_bits(tol))
        row = triviality_scan(g40, c, [mm], tol=tol, pipeline=pipe).rows[0]
        return row.mu_max, row.b1, row.f2, row.f4, row.f6


def run_sweep(cfg: RunConfig, report: Report, ctx: Context) -> None:
    from .flow import loglog_slope

    sec = cfg.section("sweep")
    points = sorted(set(sec["mu_max"]))
    jobs = [(cfg.g40, cfg.c, mm, cfg.tol, cfg.precision_bits) for mm in points]
    workers = min(sec["workers"] or os.cpu_count() or 1, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    slopes = {}
    if len(rows) >= 2:
        xs = [r[0] for r in rows]
        for i, name in ((2, "f2"), (3, "f4"), (4, "f6")):
            ys = [r[i] for r in rows]
            slopes[name] = loglog_slope(xs, ys) if all(y != 0 for y in ys) else None
    t = report.table("sweep", ["mu_max", "f2", "f4", "f6", "slope2", "slope4", "slope6"])
    for mm, b1, f2, f4, f6 in rows:
        t.add(mm, f2, f4, f6, slopes.get("f2"), slopes.get("f4"), slopes.get("f6"))
    fp = report.table("sweep_fixed_points", ["mu_max", "b1_star", "scaled_four_point_shift"])
    shifts = []
    for mm, b1, f2, f4, f6 in rows:
        shifts.append((f4 + f2 / 3) * to_real(mm) ** 2)
        fp.add(mm, b1, shifts[-1])
    if len(shifts) >= 2:
        changes = [abs(b / a) for a, b in zip(shifts, shifts[1:]) if a != 0]
        worst = max(max(r, 1 / r) for r in changes) if changes else mpmath.inf
        report.certify("four-point approach to -f2/3", "(f4 + f2/3) mu_max^2 across consecutive points",
                       worst < 2, False, {"max_factor": worst})
    if len(rows) >= 2 and slopes.get("f4") is not None and slopes.get("f6") is not None:
        report.certify("four-point decay rate", "log-log slope in [-1.3, -0.7]",
                       -mpmath.mpf("1.3") <= slopes["f4"] <= -mpmath.mpf("0.7"), False, {"slope": slopes["f4"]})
        report.certify("six-point decay rate", "log-log slope <= -1.5", slopes["f6"] <= -mpmath.mpf("1.5"), False,
                       {"slope": slopes["f6"]})


RUNNERS = {
    "fixed-point": run_fixed_point,
    "taylor": run_taylor,
    "flow-eval": run_flow_eval,
    "perturb": run_perturb,
    "borel": run_borel,
    "certify": run_certify,
    "sweep": run_sweep,
}


def run(command: str, cfg: RunConfig) -> Report:
    """Execute one command; module errors become structured failure records."""
    if command not in RUNNERS:
        raise ConfigError("command", f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    report = Report(command)
    bits = cfg.precision_bits
    report.metadata.update({
        "config": cfg.echo(),
        "versions": {"mfflow": __version__, "python": platform.python_version(), "mpmath": mpmath.__version__,
                     "gmpy2": _gmpy2_version()},
        "backend": kernel.backend_name(tol_bits(cfg.tol)),
        "precision_bits": bits,
        "renormalization": "BPHZ" if cfg.bphz else "general",
    })
    start = time.perf_counter()
    with working_precision(bits):
        ctx = Context(cfg)
        try:
            RUNNERS[command](cfg, report, ctx)
        except ConfigError:
            raise
        except Exception as exc:  # every module failure is recorded, never swallowed silently
            report.error(command, exc)
    report.metadata["timing_seconds"] = round(time.perf_counter() - start, 3)
    return report


def _gmpy2_version() -> str:
    import gmpy2

    return gmpy2.version()


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _split_flags(rest: list) -> dict:
    flags = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--") or len(tok) <= 2:
            raise ConfigError(tok, "expected --key value")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(rest):
                raise ConfigError(key, "missing value")
            val = rest[i + 1]
            i += 1
        flags[key] = val
        i += 1
    return flags


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfflow", description="Mean-field flow numerics and certificates.",
                                epilog="Any other --key value pair overrides a configuration key.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        flags = _split_flags(rest)
        cfg = parse_config(args.config, flags, args.command)
        report = run(args.command, cfg)
    except ConfigError as exc:
        print(f"mfflow: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        emit(report, args.format, args.out)
    except OSError as exc:
        print(f"mfflow: {exc}", file=sys.stderr)
        return 3
    for err in report.errors:
        print(f"mfflow: {err['where']}: {err['type']}: {err['message']}", file=sys.stderr)
    for name in report.failed_verdicts:
        print(f"mfflow: failed verdict: {name}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
