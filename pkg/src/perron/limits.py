"""Green-Kubo variance and statistical checks of the central limit theorem,
its Berry-Esseen rate and the local limit theorem for Birkhoff sums.

Trajectories are realized as time-reversed backward paths (see
:mod:`perron.equilibrium`). A path ``y_0, ..., y_n`` started from a sample
point gives the start ``w = y_n`` and ``S_n h(w) = h(y_n) + ... + h(y_1)``.
When the sample carries a density ``g`` the trajectory weights are
``g(w)``, normalized.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .equilibrium import (TAG_BIRKHOFF, MeasureSample, CorrelationTable, backward_walk,
                          block_sums, integrate, jackknife_se, path_covariances, path_values,
                          _blocks)
from .errors import CocycleDetected, DegenerateVariance, InvalidInput, InvalidParameter
from .sphere import SpherePoint
from .transfer import birkhoff_arrays

BE_CAP = 3.0
CLT_THRESHOLD = 0.05
LCLT_REL_TOL = 0.1
TRUNCATION_RUN = 3


# --------------------------------------------------------------------------
# variance


@dataclass(frozen=True, eq=False)
class VarianceEstimate:
    sigma2: float
    truncation: int
    terms: CorrelationTable
    std_error: float
    shift: float = 0.0  # subtracted from h before estimation
    direct: float = float("nan")  # Var(S_n h)/n at n = n_max
    direct_se: float = float("nan")


def _truncation(values, se, run: int = TRUNCATION_RUN) -> int:
    """Last lag before the first run of ``run`` consecutive insignificant terms."""
    small = np.abs(values) < se
    count = 0
    for n in range(1, len(values)):
        count = count + 1 if small[n] else 0
        if count == run:
            return n - run
    return len(values) - 1


def variance_green_kubo(f, h, s: MeasureSample, n_max: int = 30, seed: Optional[int] = None,
                        path_length: Optional[int] = None) -> VarianceEstimate:
    """``sigma^2 = -c_0 + 2 sum_{n=0}^{N} c_n`` with adaptive truncation ``N``.

    ``c_n`` are covariances of ``h`` and ``h o f^n`` estimated along backward
    paths of length ``path_length`` (default ``2 * n_max``). ``h``
    is centred when its sample mean is more than 5 standard errors from 0
    (the shift is recorded). Raises :class:`DegenerateVariance` when
    ``sigma^2 <= 3`` standard errors.
    """
    if not 1 <= n_max <= 60:
        raise InvalidParameter("n_max must lie in [1, 60]")
    if not h.real:
        raise InvalidInput("h must be real-valued")
    seed = s.seed if seed is None else seed
    base = MeasureSample(s.a, s.b, np.full(len(s), 1.0 / len(s)), s.map_id, s.seed, s.burn_in,
                         s.trajectory_stride, s.chains)
    mean, mean_se = integrate(base, h)
    shift = mean if abs(mean) > 5 * mean_se else 0.0

    n = len(s)
    length = path_length if path_length is not None else 2 * n_max
    (hv,) = path_values(f, s, [h], length, seed)
    hv -= shift
    table = path_covariances(hv, hv, n_max)
    c = table.values
    trunc = _truncation(c, table.std_errors)
    sigma2 = float(-c[0] + 2 * np.sum(c[:trunc + 1]))
    reps = -table.replicates[0] + 2 * table.replicates[:trunc + 1].sum(axis=0)
    se = float(jackknife_se(reps))

    # direct cross-check: S_n h along the first n_max backward steps
    sn = hv[:, 1:n_max + 1].sum(axis=1)
    blocks = _blocks(n)
    cnt = np.array([len(b) for b in blocks], dtype=float)
    s1, s2 = block_sums(sn, blocks), block_sums(sn ** 2, blocks)

    def var(c_, s1_, s2_):
        return (s2_ / c_ - (s1_ / c_) ** 2) / n_max

    direct = float(var(cnt.sum(), s1.sum(), s2.sum()))
    direct_se = float(jackknife_se(var(cnt.sum() - cnt, s1.sum() - s1, s2.sum() - s2)))

    est = VarianceEstimate(sigma2, trunc, table, se, float(shift), direct, direct_se)
    if not sigma2 > 3 * se:
        raise DegenerateVariance(
            f"sigma2 = {sigma2:.4g} is not significantly positive (std error {se:.3g})",
            sigma2=sigma2, std_error=se)
    return est


# --------------------------------------------------------------------------
# Birkhoff sums along trajectories


@dataclass(frozen=True, eq=False)
class BirkhoffSeries:
    n: int
    values: np.ndarray
    start_a: np.ndarray
    start_b: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not (len(self.values) == len(self.start_a) == len(self.weights)):
            raise InvalidInput("series arrays differ in length")

    @property
    def starts(self) -> list[SpherePoint]:
        return [SpherePoint(x, y) for x, y in zip(self.start_a, self.start_b)]


def _trajectory_weights(s: MeasureSample, a, b):
    if s.density is not None:
        gv = np.maximum(np.asarray(s.density.values(a, b), dtype=float), 0.0)
        if not gv.sum() > 0:
            raise InvalidInput("density vanishes on all trajectory starts")
        return gv / gv.sum()
    if not s.is_uniform:
        raise InvalidInput("weighted sample without a density cannot be transported along paths")
    return np.full(len(a), 1.0 / len(a))


def simulate_birkhoff_many(f, h, s: MeasureSample, n_values, seed: Optional[int] = None,
                           shift: float = 0.0) -> dict:
    """``{n: BirkhoffSeries}`` for several ``n`` from one set of backward paths."""
    ns = sorted({int(n) for n in n_values})
    if not ns or ns[0] < 1:
        raise InvalidParameter("n must be at least 1")
    seed = s.seed if seed is None else seed
    n_top = ns[-1]
    m = len(s)
    acc = np.zeros(m)
    ends = {n: [np.empty(m, complex), np.empty(m, complex), None] for n in ns}
    sums = {}
    wanted = set(ns)

    def visit(rows, k, pa, pb):
        if k == 0:
            return
        acc[rows] = acc[rows] + (h.values(pa, pb) - shift)
        if k in wanted:
            ends[k][0][rows] = pa
            ends[k][1][rows] = pb
            sums.setdefault(k, np.empty(m))[rows] = acc[rows]

    backward_walk(f, s.a, s.b, n_top, seed, TAG_BIRKHOFF, visit)
    out = {}
    for n in ns:
        a, b, _ = ends[n]
        out[n] = BirkhoffSeries(n, sums[n], a, b, _trajectory_weights(s, a, b))
    return out


def simulate_birkhoff(f, h, s: MeasureSample, n: int, mode: str = "backward",
                      seed: Optional[int] = None, shift: float = 0.0) -> BirkhoffSeries:
    """One ``S_n h`` per sample point.

    ``mode="backward"`` (default) uses time-reversed backward paths, whose
    starts are ``mu``-distributed and stable for any ``n``. ``mode="forward"``
    iterates ``f`` from each sample point, which is exact only while rounding
    errors stay small (short orbits).
    """
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    if mode == "forward":
        vals = birkhoff_arrays(f, h, s.a, s.b, n) - n * shift
        return BirkhoffSeries(n, vals, s.a, s.b, np.asarray(s.weights))
    if mode != "backward":
        raise InvalidParameter(f"unknown mode {mode!r}")
    return simulate_birkhoff_many(f, h, s, [n], seed, shift)[n]


# --------------------------------------------------------------------------
# statistics


def ks_statistic(values, cdf, weights=None) -> float:
    """Kolmogorov-Smirnov distance between a (weighted) sample and ``cdf``."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise InvalidInput("empty sample")
    if x.size < 10:
        raise InvalidInput("need at least 10 values")
    if weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != x.size or np.any(w < 0) or not w.sum() > 0:
            raise InvalidInput("weights must be nonnegative, positive in total, and match values")
        w = w / w.sum()
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    upper = np.cumsum(ws)
    lower = upper - ws
    fx = np.asarray(cdf(xs), dtype=float)
    return float(max(np.max(np.abs(upper - fx)), np.max(np.abs(lower - fx))))


def normal_cdf(x):
    return ndtr(x)


@dataclass
class LimitTestReport:
    test: str  # "CLT", "BerryEsseen" or "LCLT"
    n_values: list
    statistics: list
    thresholds: list
    passed: bool
    trajectories: int
    seed: int
    sigma2: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.n_values) == len(self.statistics) == len(self.thresholds)):
            raise InvalidInput("report lists differ in length")

    def summary(self) -> str:
        worst = max(range(len(self.statistics)), key=lambda k: self.statistics[k] - self.thresholds[k])
        rel = "<=" if self.statistics[worst] <= self.thresholds[worst] else ">"
        return (f"{self.test}: {'PASS' if self.passed else 'FAIL'} "
                f"stat={self.statistics[worst]:.4f} {rel} {self.thresholds[worst]:.4f} "
                f"(n={self.n_values[worst]})")


def _make_report(test, ns, stats, thresholds, traj, seed, sigma2, extra=None):
    passed = all(x <= t for x, t in zip(stats, thresholds))
    return LimitTestReport(test, [int(n) for n in ns], [float(x) for x in stats],
                           [float(t) for t in thresholds], bool(passed), int(traj), int(seed),
                           float(sigma2), extra or {})


def _variance(f, h, s, variance, n_max):
    return variance if variance is not None else variance_green_kubo(f, h, s, n_max)


def _with_density(s: MeasureSample, g):
    from .equilibrium import weight_by
    return s if g is None else weight_by(s, g)


def clt_test(f, h, g, n: int, s: MeasureSample, *, threshold: float = CLT_THRESHOLD,
             variance: Optional[VarianceEstimate] = None, variance_lags: int = 30,
             seed: Optional[int] = None) -> LimitTestReport:
    """Weighted KS distance of ``S_n h / (sigma sqrt n)`` under ``nu = g mu`` from N(0,1)."""
    var = _variance(f, h, s, variance, variance_lags)
    sw = _with_density(s, g)
    ser = simulate_birkhoff(f, h, sw, n, seed=seed, shift=var.shift)
    z = ser.values / math.sqrt(var.sigma2 * n)
    stat = ks_statistic(z, normal_cdf, ser.weights)
    return _make_report("CLT", [n], [stat], [threshold], len(s), s.seed if seed is None else seed,
                        var.sigma2)


def berry_esseen_curve(f, h, g, n_values, s: MeasureSample, *, cap: float = BE_CAP,
                       variance: Optional[VarianceEstimate] = None, variance_lags: int = 30,
                       seed: Optional[int] = None) -> LimitTestReport:
    """``sqrt(n) * KS`` for each ``n``; passes when all stay below ``cap``."""
    ns = [int(n) for n in n_values]
    if len(ns) < 4 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameter("n_values must be increasing with at least 4 entries")
    var = _variance(f, h, s, variance, variance_lags)
    sw = _with_density(s, g)
    series = simulate_birkhoff_many(f, h, sw, ns, seed, var.shift)
    stats, raw = [], []
    for n in ns:
        ser = series[n]
        ks = ks_statistic(ser.values / math.sqrt(var.sigma2 * n), normal_cdf, ser.weights)
        raw.append(ks)
        stats.append(math.sqrt(n) * ks)
    return _make_report("BerryEsseen", ns, stats, [cap] * len(ns), len(s),
                        s.seed if seed is None else seed, var.sigma2, {"ks": raw})


def lclt_target(sigma2: float, n: int, x: float, lo: float, hi: float) -> float:
    return math.exp(-x * x / (2 * sigma2 * n)) * (hi - lo) / math.sqrt(2 * math.pi)


def window_statistic(values, weights, sigma2, n, x, lo, hi):
    """``(scaled window mass, target)`` for the window ``x + S_n in [lo, hi]``."""
    v = x + np.asarray(values)
    inside = (v >= lo) & (v <= hi) if hi > lo else np.zeros(v.shape, bool)
    frac = float(np.sum(np.asarray(weights)[inside]))
    return math.sqrt(sigma2 * n) * frac, lclt_target(sigma2, n, x, lo, hi)


def lclt_test(f, h, g, x: float, interval, n: int, s: MeasureSample, *,
              rel_tol: float = LCLT_REL_TOL, variance: Optional[VarianceEstimate] = None,
              variance_lags: int = 30, scan=None, seed: Optional[int] = None) -> LimitTestReport:
    """``|sigma sqrt(n) nu{x + S_n h in [lo, hi]} - target|`` against ``rel_tol * target``.

    ``scan``, when given, is the ``(rows, all_below_one)`` result of
    :func:`perron.spectral.cocycle_scan`; a flagged ``h`` is refused.
    """
    lo, hi = (float(v) for v in interval)
    if hi < lo:
        raise InvalidParameter("interval must satisfy lo <= hi")
    if scan is not None and not scan[1]:
        raise CocycleDetected("cocycle scan found spectral radius 1; the local limit law may fail")
    var = _variance(f, h, s, variance, variance_lags)
    sw = _with_density(s, g)
    ser = simulate_birkhoff(f, h, sw, n, seed=seed, shift=var.shift)
    scaled, target = window_statistic(ser.values, ser.weights, var.sigma2, n, x, lo, hi)
    stat = abs(scaled - target)
    return _make_report("LCLT", [n], [stat], [rel_tol * target], len(s),
                        s.seed if seed is None else seed, var.sigma2,
                        {"scaled_mass": scaled, "target": target, "x": x, "interval": [lo, hi]})


# --------------------------------------------------------------------------
# export


def blob_sha1(data: bytes) -> str:
    """Content hash in the format of a git blob id."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def report_json(report: LimitTestReport, config: Optional[dict] = None) -> str:
    body = asdict(report)
    inputs = json.dumps(config or {}, sort_keys=True, separators=(",", ":")).encode()
    doc = {"report": body, "config": config or {}, "input_hash": blob_sha1(inputs)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_csv(report: LimitTestReport) -> str:
    lines = ["n,statistic,threshold"]
    for n, st, th in zip(report.n_values, report.statistics, report.thresholds):
        lines.append(f"{n},{st!r},{th!r}")
    return "\n".join(lines) + "\n"
