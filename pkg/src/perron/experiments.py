"""Experiments shared by the command-line runner and the acceptance checks.

Each experiment takes a :class:`Context` and returns an
:class:`ExperimentResult` whose files are deterministic byte strings for a
fixed configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import equilibrium as eq
from . import limits as lt
from . import spectral as sp
from .config import ExperimentConfig
from .errors import DegenerateVariance, DiscretizationRejected, InsufficientSignal


@dataclass
class ExperimentResult:
    name: str
    passed: bool
    summary: str
    files: dict = field(default_factory=dict)  # file name -> bytes

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} {self.summary}"


def _json(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def _csv(header, rows) -> bytes:
    lines = [",".join(header)]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode()


class Context:
    """Lazily built, shared inputs for one configuration."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg

    @cached_property
    def f(self):
        return self.cfg.map.build()

    @cached_property
    def h(self):
        return self.cfg.observable.build(self.f)

    @cached_property
    def densities(self):
        return [d.build(self.f) for d in self.cfg.densities]

    @cached_property
    def sample(self):
        p = self.cfg.sample
        return eq.sample_equilibrium(self.f, p.n_points, p.burn_in, p.seed, chains=p.chains,
                                     stride=p.stride)

    @cached_property
    def variance(self):
        return lt.variance_green_kubo(self.f, self.h, self.sample, self.cfg.tests.variance_lags)

    @cached_property
    def spectral_sample(self):
        return self.sample.subsample(self.cfg.spectral.sample_points)

    @cached_property
    def dictionary(self):
        return sp.build_dictionary(self.spectral_sample, self.cfg.spectral.max_deg)

    @cached_property
    def fiber(self):
        return sp.sample_fiber(self.f, self.spectral_sample)

    @cached_property
    def scan(self):
        return sp.cocycle_scan(self.f, self.h, self.cfg.spectral.scan_t, self.dictionary,
                               self.spectral_sample, self.fiber)

    def trajectories(self, n):
        return self.sample.subsample(n)


# --------------------------------------------------------------------------


def run_sample(ctx: Context) -> ExperimentResult:
    s = ctx.sample
    det = eq.invariance_detail(ctx.f, s, ctx.h)
    ok = det["transfer"] <= 5 * det["transfer_se"] + 1e-12 and \
        det["pushforward"] <= 5 * det["pushforward_se"] + 1e-12
    files = {"sample.csv": eq.sample_csv(s).encode(),
             "sample.csv.meta.json": eq.sample_meta_json(s).encode(),
             "invariance.json": _json(det)}
    return ExperimentResult("sample", ok, f"N={len(s)} invariance deviation={det['max_deviation']:.3g}", files)


def _table_rows(tab):
    return [(int(n), float(np.real(v)), float(e)) for n, v, e in zip(tab.lags, tab.values, tab.std_errors)]


def run_variance(ctx: Context) -> ExperimentResult:
    try:
        v = ctx.variance
    except DegenerateVariance as exc:
        doc = {"error": "DegenerateVariance", "sigma2": exc.sigma2, "std_error": exc.std_error}
        return ExperimentResult("variance", False, f"DegenerateVariance sigma2={exc.sigma2:.3g}",
                                {"variance.json": _json(doc)})
    doc = {"sigma2": v.sigma2, "std_error": v.std_error, "truncation": v.truncation, "shift": v.shift,
           "direct": v.direct, "direct_se": v.direct_se}
    files = {"variance.json": _json(doc),
             "correlations.csv": _csv(["lag", "value", "std_error"], _table_rows(v.terms))}
    return ExperimentResult("variance", True,
                            f"sigma2={v.sigma2:.4f} +- {v.std_error:.4f} (direct {v.direct:.4f})", files)


def run_spectrum(ctx: Context) -> ExperimentResult:
    try:
        m = sp.galerkin_matrix(ctx.f, ctx.h, 0.0, ctx.dictionary, ctx.spectral_sample, ctx.fiber)
    except DiscretizationRejected as exc:
        return ExperimentResult("spectrum", False, f"DiscretizationRejected {exc}", {})
    dec = sp.decompose(m)
    bound = ctx.f.degree ** -0.5 + 0.05
    ok = abs(dec.leading - 1) <= 1e-6 and dec.gap_ok
    files = {"spectrum.csv": sp.spectral_csv([(0.0, dec, m.lsq_residual)]).encode()}
    return ExperimentResult(
        "spectrum", ok,
        f"lambda(0)={dec.leading.real:.9f} subleading={dec.subleading_modulus:.4f} "
        f"(d^-1/2+0.05={bound:.4f}) residual={m.lsq_residual:.3g}", files)


def run_lambda_curve(ctx: Context) -> ExperimentResult:
    p = ctx.cfg.spectral
    try:
        curve = sp.lambda_curve(ctx.f, ctx.h, p.t_grid, ctx.dictionary, ctx.spectral_sample, ctx.fiber)
        d1, d2 = sp.lambda_derivatives(curve, p.delta)
        sigma2 = ctx.variance.sigma2
    except (DiscretizationRejected, DegenerateVariance) as exc:
        return ExperimentResult("lambda-curve", False, f"{type(exc).__name__} {exc}", {})
    ok = abs(d1) <= 0.02 and abs(d2 - sigma2) <= 0.1 * sigma2
    files = {"lambda_curve.csv": _csv(["t", "re", "im"], [(t, l.real, l.imag) for t, l in curve]),
             "derivatives.json": _json({"d1": d1, "d2": d2, "sigma2": sigma2, "delta": p.delta})}
    return ExperimentResult("lambda-curve", ok, f"d1={d1:.2e} d2={d2:.4f} sigma2={sigma2:.4f}", files)


def run_cocycle_scan(ctx: Context) -> ExperimentResult:
    try:
        rows, below = ctx.scan
    except DiscretizationRejected as exc:
        return ExperimentResult("cocycle-scan", False, f"DiscretizationRejected {exc}", {})
    files = {"cocycle_scan.csv": _csv(["t", "radius"], rows)}
    worst = max(r for _, r in rows)
    return ExperimentResult("cocycle-scan", below, f"max radius={worst:.4f} (<= 0.999 required)", files)


def run_clt(ctx: Context) -> ExperimentResult:
    p = ctx.cfg.tests
    try:
        var = ctx.variance
    except DegenerateVariance as exc:
        return ExperimentResult("clt", False, f"DegenerateVariance sigma2={exc.sigma2:.3g}", {})
    s = ctx.trajectories(p.trajectories)
    files, stats, ok = {}, [], True
    for k, (spec, g) in enumerate(zip(ctx.cfg.densities, ctx.densities)):
        rep = lt.clt_test(ctx.f, ctx.h, g, p.clt_n, s, threshold=p.clt_threshold, variance=var)
        cfg = {"density": spec.model_dump(mode="json"), "run": ctx.cfg.model_dump(mode="json")}
        files[f"clt_{k}.json"] = lt.report_json(rep, cfg).encode()
        files[f"clt_{k}.csv"] = lt.report_csv(rep).encode()
        stats.append(rep.statistics[0])
        ok = ok and rep.passed
    worst = max(stats)
    return ExperimentResult("clt", ok, f"KS={worst:.4f} {'<=' if ok else '>'} {p.clt_threshold}", files)


def run_berry_esseen(ctx: Context) -> ExperimentResult:
    p = ctx.cfg.tests
    try:
        var = ctx.variance
    except DegenerateVariance as exc:
        return ExperimentResult("berry-esseen", False, f"DegenerateVariance sigma2={exc.sigma2:.3g}", {})
    rep = lt.berry_esseen_curve(ctx.f, ctx.h, None, p.be_n_values, ctx.trajectories(p.trajectories),
                                cap=p.be_cap, variance=var)
    files = {"berry_esseen.json": lt.report_json(rep, ctx.cfg.model_dump(mode="json")).encode(),
             "berry_esseen.csv": lt.report_csv(rep).encode()}
    return ExperimentResult("berry-esseen", rep.passed,
                            f"max sqrt(n)*KS={max(rep.statistics):.3f} (cap {p.be_cap})", files)


def run_lclt(ctx: Context) -> ExperimentResult:
    p = ctx.cfg.tests
    try:
        var = ctx.variance
        scan = ctx.scan
    except (DegenerateVariance, DiscretizationRejected) as exc:
        return ExperimentResult("lclt", False, f"{type(exc).__name__} {exc}", {})
    if not scan[1]:
        return ExperimentResult("lclt", False, "CocycleDetected: scan radius reaches 1", {})
    rep = lt.lclt_test(ctx.f, ctx.h, None, p.x, p.interval, p.lclt_n,
                       ctx.trajectories(p.lclt_trajectories), rel_tol=p.lclt_rel_tol, variance=var,
                       scan=scan)
    files = {"lclt.json": lt.report_json(rep, ctx.cfg.model_dump(mode="json")).encode(),
             "lclt.csv": lt.report_csv(rep).encode()}
    return ExperimentResult("lclt", rep.passed,
                            f"|{rep.extra['scaled_mass']:.4f} - {rep.extra['target']:.5f}| = "
                            f"{rep.statistics[0]:.4f} (tol {rep.thresholds[0]:.4f})", files)


def run_decay(ctx: Context) -> ExperimentResult:
    p = ctx.cfg.tests
    tab = eq.correlation_table(ctx.f, ctx.sample, ctx.h, ctx.h, p.decay_n_max)
    files = {"decay.csv": _csv(["lag", "value", "std_error"], _table_rows(tab))}
    bound = math.log(ctx.f.degree ** -0.5) + 0.15
    try:
        rate, ok = eq.decay_fit(tab, ctx.f.degree)
    except InsufficientSignal as exc:
        files["decay.json"] = _json({"rate": None, "bound": bound, "note": str(exc)})
        return ExperimentResult("decay", True, f"InsufficientSignal ({exc}); correlations vanish", files)
    files["decay.json"] = _json({"rate": rate, "bound": bound, "ok": ok})
    return ExperimentResult("decay", ok, f"rate={rate:.4f} (bound {bound:.4f})", files)


EXPERIMENTS = {
    "sample": run_sample,
    "variance": run_variance,
    "spectrum": run_spectrum,
    "lambda-curve": run_lambda_curve,
    "clt": run_clt,
    "berry-esseen": run_berry_esseen,
    "lclt": run_lclt,
    "cocycle-scan": run_cocycle_scan,
    "decay": run_decay,
}


def run_experiment(name: str, ctx: Context) -> ExperimentResult:
    return EXPERIMENTS[name](ctx)


def run_all(ctx: Context) -> list[ExperimentResult]:
    return [fn(ctx) for fn in EXPERIMENTS.values()]
