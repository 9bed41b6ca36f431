"""Sampling the equilibrium measure by backward random iteration, Monte-Carlo
integration, and correlations along orbits.

Forward orbits on a Julia set are numerically unstable: rounding errors are
expanded at every step (for ``z**2`` the modulus drifts like ``2**n * eps``).
Long orbits are therefore realized through the natural extension. If ``y0``
is distributed according to ``mu`` and each ``y_{k+1}`` is a uniformly random
preimage of ``y_k``, then ``(y_n, y_{n-1}, ..., y_0)`` has the law of a
forward orbit ``(w, f(w), ..., f^n(w))`` with ``w ~ mu``. Backward steps are
contracting, so these paths stay accurate for any length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import (ExceptionalStartError, InsufficientSignal, InvalidDensity, InvalidInput,
                     InvalidParameter, RootSolveError, SamplingError)
from .sphere import SpherePoint, affine_arrays, chordal_arrays, from_affine_arrays

DEFAULT_Z0 = 0.4 + 0.3j
DEFAULT_CHAINS = 64
CHAIN_GROUP = 16
JACKKNIFE_BLOCKS = 50
WALK_CHUNK = 8192
EXCEPTIONAL_TOL = 1e-8
WEIGHT_TOL = 1e-12

# stream tags for backward paths, kept distinct so consumers never share draws
TAG_CORRELATION = 1
TAG_BIRKHOFF = 2


@dataclass(frozen=True, eq=False)
class MeasureSample:
    """Weighted point cloud with provenance.

    ``density`` is set by :func:`weight_by` and remembers ``g`` so that
    consumers that move along orbits can reweight the points they end on.
    """

    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray
    map_id: str
    seed: int
    burn_in: int
    trajectory_stride: int = 1
    chains: int = DEFAULT_CHAINS
    normalization: float = 1.0
    z0: complex = DEFAULT_Z0
    density: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.a) or len(w) != len(self.b):
            raise InvalidInput("points and weights differ in length")
        if len(w) == 0:
            raise InvalidInput("empty sample")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidInput("weights must be nonnegative and sum to 1")

    def __len__(self):
        return len(self.weights)

    @property
    def points(self) -> list[SpherePoint]:
        return [SpherePoint(x, y) for x, y in zip(self.a, self.b)]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def subsample(self, n: int) -> "MeasureSample":
        """Evenly strided subsample of at most ``n`` points, reweighted uniformly."""
        if n >= len(self):
            return self
        idx = np.arange(0, len(self), len(self) // n)[:n]
        w = np.full(len(idx), 1.0 / len(idx))
        return replace(self, a=self.a[idx], b=self.b[idx], weights=w, density=None,
                       normalization=1.0)


def _uniform(n):
    return np.full(n, 1.0 / n)


# --------------------------------------------------------------------------
# sampler


def _distinct_count(a, b, cap: int = 3) -> int:
    """Number of chordal clusters among the points, counted up to ``cap``."""
    reps = []
    for x, y in zip(a, b):
        if all(chordal_arrays(x, y, u, v) > EXCEPTIONAL_TOL for u, v in reps):
            reps.append((x, y))
            if len(reps) >= cap:
                break
    return len(reps)


def _chain_lengths(n_points, chains):
    base, rem = divmod(n_points, chains)
    return [base + (1 if c < rem else 0) for c in range(chains)]


def sample_equilibrium(f, n_points: int, burn_in: int = 50, seed: int = 0, *,
                       chains: int = DEFAULT_CHAINS, stride: int = 1,
                       z0: complex = DEFAULT_Z0) -> MeasureSample:
    """Backward random iteration from ``z0`` in independent chains.

    Chain ``c`` draws its branch choices from ``SeedSequence(seed).spawn``'s
    ``c``-th child, so output depends only on ``(f, n_points, burn_in, seed,
    chains, stride, z0)``. Points are concatenated in chain order.
    """
    if n_points < 100:
        raise InvalidParameter("n_points must be at least 100")
    if burn_in < 20:
        raise InvalidParameter("burn_in must be at least 20")
    if chains < 1 or stride < 1:
        raise InvalidParameter("chains and stride must be positive")
    chains = min(chains, n_points)
    d = f.degree
    lengths = _chain_lengths(n_points, chains)
    children = np.random.SeedSequence(seed).spawn(chains)
    sa, sb = from_affine_arrays(np.array([z0]))
    out_a, out_b = [], []

    for g0 in range(0, chains, CHAIN_GROUP):
        group = list(range(g0, min(g0 + CHAIN_GROUP, chains)))
        steps = [burn_in + lengths[c] * stride for c in group]
        n_steps = max(steps)
        draws = np.zeros((len(group), n_steps), dtype=np.int64)
        for i, c in enumerate(group):
            draws[i, :steps[i]] = np.random.default_rng(children[c]).integers(0, d, size=steps[i])
        a = np.repeat(sa, len(group))
        b = np.repeat(sb, len(group))
        hist_a = np.empty((n_steps, len(group)), complex)
        hist_b = np.empty((n_steps, len(group)), complex)
        rows = np.arange(len(group))
        for k in range(n_steps):
            try:
                fa, fb = f.preimage_arrays(a, b)
            except RootSolveError as exc:
                raise SamplingError(f"root solving failed at backward step {k}: {exc}") from exc
            a = fa[rows, draws[:, k]]
            b = fb[rows, draws[:, k]]
            hist_a[k], hist_b[k] = a, b
        for i, c in enumerate(group):
            if _distinct_count(hist_a[:burn_in, i], hist_b[:burn_in, i]) <= 2:
                raise ExceptionalStartError(
                    f"backward orbit of z0={z0} visits at most 2 points during burn-in")
            sl = slice(burn_in + stride - 1, steps[i], stride)
            out_a.append(hist_a[sl, i])
            out_b.append(hist_b[sl, i])

    a = np.concatenate(out_a)
    b = np.concatenate(out_b)
    return MeasureSample(a, b, _uniform(len(a)), f.map_id, int(seed), int(burn_in), int(stride),
                         chains, 1.0, complex(z0))


# --------------------------------------------------------------------------
# integration


def _blocks(n, n_blocks=JACKKNIFE_BLOCKS):
    n_blocks = max(2, min(n_blocks, n))
    return np.array_split(np.arange(n), n_blocks)


def block_sums(x, blocks):
    return np.array([x[idx].sum(axis=0) for idx in blocks])


def jackknife_se(replicates) -> float:
    """Standard error from leave-one-block-out replicates (first axis)."""
    r = np.asarray(replicates)
    n = r.shape[0]
    dev = r - r.mean(axis=0)
    return np.sqrt((n - 1) / n * np.sum(np.abs(dev) ** 2, axis=0))


def integrate(s: MeasureSample, phi):
    """Weighted mean of ``phi`` and its 50-block jackknife standard error."""
    vals = phi.values(s.a, s.b)
    w = s.weights
    est = np.sum(w * vals) / np.sum(w)
    blocks = _blocks(len(w))
    sw = block_sums(w, blocks)
    swv = block_sums(w * vals, blocks)
    reps = (swv.sum() - swv) / (sw.sum() - sw)
    se = float(jackknife_se(reps))
    est = float(est) if phi.real else complex(est)
    return est, se


def weight_by(s: MeasureSample, g) -> MeasureSample:
    """Reweight by a density ``g`` (``w_i`` proportional to ``g(z_i)``)."""
    gv = np.asarray(g.values(s.a, s.b))
    if np.iscomplexobj(gv):
        raise InvalidDensity("density must be real-valued")
    if np.any(gv < -1e-9):
        i = int(np.argmin(gv))
        raise InvalidDensity(f"density is negative ({gv[i]:.3g}) at sample point {i}")
    gv = np.maximum(gv, 0.0)
    norm = float(np.sum(s.weights * gv))
    if not norm > 0:
        raise InvalidDensity("empirical mean of the density is not positive")
    w = s.weights * gv
    w = w / w.sum()
    return replace(s, weights=w, normalization=norm * s.normalization, density=g)


def invariance_check(f, s: MeasureSample, phi) -> float:
    """``max(|mu(Lambda phi) - mu(phi)|, |mu(phi o f) - mu(phi)|)`` on the sample."""
    return invariance_detail(f, s, phi)["max_deviation"]


def invariance_detail(f, s: MeasureSample, phi) -> dict:
    from .transfer import transfer_arrays

    w = s.weights
    base = phi.values(s.a, s.b)
    lam = transfer_arrays(f, phi, s.a, s.b)
    fa, fb = f.evaluate_arrays(s.a, s.b)
    comp = phi.values(fa, fb)
    blocks = _blocks(len(w))
    sw = block_sums(w, blocks)

    def diff(other):
        dv = other - base
        est = np.sum(w * dv)
        sd = block_sums(w * dv, blocks)
        return abs(est), float(jackknife_se((sd.sum() - sd) / (sw.sum() - sw)))

    d1, e1 = diff(lam)
    d2, e2 = diff(comp)
    return {"transfer": float(d1), "transfer_se": e1, "pushforward": float(d2),
            "pushforward_se": e2, "max_deviation": float(max(d1, d2))}


# --------------------------------------------------------------------------
# backward paths


def backward_walk(f, a, b, n_steps: int, seed: int, tag: int,
                  visit: Callable[[slice, int, np.ndarray, np.ndarray], None],
                  chunk: int = WALK_CHUNK) -> None:
    """Random backward paths of length ``n_steps`` from every point.

    ``visit(rows, k, a_k, b_k)`` is called for ``k = 0..n_steps`` with the
    current points of the rows in ``rows``. Chunk ``j`` draws from
    ``SeedSequence(seed, spawn_key=(tag, n_steps, j))``, so results do not
    depend on how chunks are scheduled.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    d = f.degree
    for j, start in enumerate(range(0, len(a), chunk)):
        rows = slice(start, min(start + chunk, len(a)))
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag, n_steps, j)))
        pa, pb = a[rows], b[rows]
        idx = np.arange(len(pa))
        visit(rows, 0, pa, pb)
        for k in range(1, n_steps + 1):
            try:
                fa, fb = f.preimage_arrays(pa, pb)
            except RootSolveError as exc:
                raise SamplingError(f"root solving failed at backward step {k}: {exc}") from exc
            pick = rng.integers(0, d, size=len(pa))
            pa, pb = fa[idx, pick], fb[idx, pick]
            visit(rows, k, pa, pb)


# --------------------------------------------------------------------------
# correlations


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    lags: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    replicates: Optional[np.ndarray] = field(default=None, repr=False)  # (lags, blocks)

    def __post_init__(self):
        lags = np.asarray(self.lags)
        if not (len(lags) == len(self.values) == len(self.std_errors)):
            raise InvalidInput("lags, values and std_errors must have equal length")
        if len(lags) and (lags[0] != 0 or np.any(np.diff(lags) <= 0)):
            raise InvalidInput("lags must increase strictly from 0")

    def __len__(self):
        return len(self.lags)


def path_covariances(x, y, n_max: int) -> CorrelationTable:
    """Lagged covariances from paths stored row-wise (column ``k`` is ``y_k``).

    Every point of a backward path started from ``mu`` is ``mu``-distributed,
    so lag ``n`` uses all pairs ``(x[:, k + n], y[:, k])`` along each row.
    Row ``i`` contributes one observation per lag; the jackknife runs over
    blocks of rows.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    n, width = x.shape
    if width <= n_max:
        raise InvalidParameter("paths are shorter than the largest lag")
    lags = range(n_max + 1)
    # means over the same columns as the products, so constants give exactly 0
    prod = np.stack([(x[:, k:] * y[:, :width - k]).mean(axis=1) for k in lags], axis=1)
    mx = np.stack([x[:, k:].mean(axis=1) for k in lags], axis=1)
    my = np.stack([y[:, :width - k].mean(axis=1) for k in lags], axis=1)
    blocks = _blocks(n)
    sp = block_sums(prod, blocks)
    sx = block_sums(mx, blocks)
    sy = block_sums(my, blocks)
    cnt = np.array([len(b) for b in blocks], dtype=float)

    def cov(c, p_, x_, y_):
        c = c[..., None]
        return p_ / c - (x_ / c) * (y_ / c)

    full = cov(np.array(cnt.sum()), sp.sum(0), sx.sum(0), sy.sum(0))
    reps = cov(cnt.sum() - cnt, sp.sum(0) - sp, sx.sum() - sx, sy.sum() - sy)
    se = jackknife_se(reps)
    if not np.iscomplexobj(full):
        full = np.real(full)
    return CorrelationTable(np.arange(n_max + 1), full, se, reps.T)


def path_values(f, s: MeasureSample, observables, length: int, seed: Optional[int] = None,
                tag: int = TAG_CORRELATION):
    """Values of each observable along one backward path per sample point.

    Returns a list of ``(N, length + 1)`` arrays.
    """
    seed = s.seed if seed is None else seed
    outs = [np.empty((len(s), length + 1), dtype=float if o.real else complex)
            for o in observables]

    def visit(rows, k, pa, pb):
        for o, out in zip(observables, outs):
            out[rows, k] = o.values(pa, pb)

    backward_walk(f, s.a, s.b, length, seed, tag, visit)
    return outs


def correlation_table(f, s: MeasureSample, phi, psi, n_max: int,
                      seed: Optional[int] = None, path_length: Optional[int] = None) -> CorrelationTable:
    """Estimates of ``mu(phi * psi o f^n) - mu(phi) mu(psi)`` for ``n = 0..n_max``.

    Orbit pairs come from backward paths (see module docstring) of length
    ``path_length`` (default ``2 * n_max``); sample points are treated as
    draws from ``mu`` with equal weight.
    """
    if not 0 <= n_max <= 60:
        raise InvalidParameter("n_max must lie in [0, 60]")
    length = path_length if path_length is not None else max(2 * n_max, 1)
    # phi at the later path index is phi(w); psi at the earlier one is psi(f^n w)
    xv, yv = path_values(f, s, [phi, psi], length, seed)
    return path_covariances(xv, yv, n_max)


def decay_fit(t: CorrelationTable, d: int):
    """Least-squares slope of ``log|c_n|`` over significant lags.

    Returns ``(rate, ok)`` with ``ok`` when the rate is no slower than
    ``d**(-n/2)`` up to a 0.15 margin.
    """
    vals = np.abs(np.asarray(t.values))
    se = np.asarray(t.std_errors)
    sig = vals > 3 * se
    if np.count_nonzero(sig) < 5:
        raise InsufficientSignal(f"only {int(np.count_nonzero(sig))} significant lags (need 5)")
    lags = np.asarray(t.lags)[sig].astype(float)
    rate = float(np.polyfit(lags, np.log(vals[sig]), 1)[0])
    return rate, rate <= math.log(d ** -0.5) + 0.15


# --------------------------------------------------------------------------
# export


def _meta(s: MeasureSample) -> dict:
    return {"map_id": s.map_id, "seed": s.seed, "burn_in": s.burn_in,
            "trajectory_stride": s.trajectory_stride, "chains": s.chains,
            "normalization": repr(float(s.normalization)),
            "z0": [float(s.z0.real), float(s.z0.imag)], "n_points": len(s)}


def sample_csv(s: MeasureSample) -> str:
    z = affine_arrays(s.a, s.b)
    lines = ["re,im,weight"]
    for zi, wi in zip(z, s.weights):
        lines.append(f"{zi.real:.17g},{zi.imag:.17g},{wi:.17g}")
    return "\n".join(lines) + "\n"


def sample_meta_json(s: MeasureSample) -> str:
    return json.dumps(_meta(s), indent=2, sort_keys=True) + "\n"


def export_sample(s: MeasureSample, path) -> None:
    """Write ``path`` (CSV ``re,im,weight``) and ``path + '.meta.json'``."""
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(sample_csv(s))
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        fh.write(sample_meta_json(s))


def import_sample(path) -> MeasureSample:
    path = str(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path + ".meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    a, b = from_affine_arrays(data[:, 0] + 1j * data[:, 1])
    w = data[:, 2]
    return MeasureSample(a, b, w, meta["map_id"], int(meta["seed"]), int(meta["burn_in"]),
                         int(meta["trajectory_stride"]), int(meta["chains"]),
                         float(meta["normalization"]), complex(*meta["z0"]))
