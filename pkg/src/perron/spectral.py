"""Galerkin discretization of ``Lambda_h(it)`` on a sample-supported monomial
dictionary, power-iteration eigen-decomposition, the eigenvalue curve and the
spectral-radius scan.

The operator is evaluated exactly at sample points (through the fibers) and
projected onto the dictionary by weighted least squares. The dictionary uses
a rotated chart coordinate ``zeta`` centred on the sample, so that the
monomials ``zeta**p * conj(zeta)**q`` stay bounded on the sample and on all
its preimages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DiscretizationRejected, EigenSolveError, IllConditionedDictionary,
                     InsufficientSample, InvalidCurve, InvalidParameter)
from .sphere import chordal_arrays, fubini_quadrature
from .transfer import EXP_GUARD, exp_weight

DROP_TOL = 1e-7  # relative singular value below which a direction is dropped
MAX_GRAM_COND = 1e12
MAX_LSQ_RESIDUAL = 0.2
EIG_TOL = 1e-10
EIG_MAX_ITER = 5000
GAP_MARGIN = 1e-6
POLE_SUBSAMPLE = 2000


# --------------------------------------------------------------------------
# dictionary


def _choose_pole(a, b):
    """Candidate point farthest (in min chordal distance) from the sample."""
    q = fubini_quadrature(200)
    cand_a = np.concatenate([[1, 0, 1, -1, 1j, -1j], q.a])
    cand_b = np.concatenate([[0, 1, 1, 1, 1, 1], q.b])
    step = max(1, len(a) // POLE_SUBSAMPLE)
    sa, sb = a[::step], b[::step]
    dmin = chordal_arrays(cand_a[:, None], cand_b[:, None], sa[None, :], sb[None, :]).min(axis=1)
    best = int(np.flatnonzero(dmin >= dmin.max() - 1e-9)[0])
    n = math.hypot(abs(cand_a[best]), abs(cand_b[best]))
    return complex(cand_a[best]) / n, complex(cand_b[best]) / n


@dataclass(frozen=True, eq=False)
class FunctionDictionary:
    """Orthonormalized monomials in a rotated chart coordinate.

    ``zeta = (cb*a - ca*b) / (conj(ca)*a + conj(cb)*b) / scale`` where
    ``(ca, cb)`` is the unit representative of the centre (antipode of the
    pole). Raw functions ``zeta**p * conj(zeta)**q`` (``p + q <= max_deg``,
    constant first) are mapped to the orthonormal basis by ``transform``.
    """

    exponents: tuple
    center: tuple
    scale: float
    transform: np.ndarray  # (n_raw, basis_size)
    raw_condition: float
    rank: int
    max_deg: int

    @property
    def basis_size(self) -> int:
        return self.transform.shape[1]

    @property
    def description(self) -> str:
        return (f"monomials zeta^p conj(zeta)^q, p+q <= {self.max_deg}, centre "
                f"[{self.center[0]:.6g}:{self.center[1]:.6g}], rank {self.rank}")

    @property
    def gram_factor(self) -> np.ndarray:
        return self.transform

    def coordinate(self, a, b):
        ca, cb = self.center
        return (cb * a - ca * b) / (np.conj(ca) * a + np.conj(cb) * b) / self.scale

    def raw(self, a, b):
        """Raw dictionary values, shape ``a.shape + (n_raw,)``."""
        z = self.coordinate(np.asarray(a, complex), np.asarray(b, complex))
        zc = np.conj(z)
        return np.stack([z ** p * zc ** q for p, q in self.exponents], axis=-1)

    def values(self, a, b):
        """Orthonormal basis values, shape ``a.shape + (basis_size,)``."""
        return self.raw(a, b) @ self.transform

    def coefficients(self, s, phi):
        """Weighted least-squares coordinates of ``phi`` on the basis."""
        q = self.values(s.a, s.b)
        return np.conj(q).T @ (s.weights * phi.values(s.a, s.b))


def _exponents(max_deg):
    return tuple((p, k - p) for k in range(max_deg + 1) for p in range(k, -1, -1))


def build_dictionary(s, max_deg: int) -> FunctionDictionary:
    if max_deg < 1:
        raise InvalidParameter("max_deg must be at least 1")
    if len(s) < 20 * (2 * max_deg + 1):
        raise InsufficientSample(f"need at least {20 * (2 * max_deg + 1)} sample points")
    center_pole = _choose_pole(s.a, s.b)
    pa, pb = center_pole
    # antipode of [pa:pb] is [-conj(pb):conj(pa)]
    center = (-np.conj(pb), np.conj(pa))
    ca, cb = center
    zeta = (cb * s.a - ca * s.b) / (np.conj(ca) * s.a + np.conj(cb) * s.b)
    scale = float(np.abs(zeta).max()) or 1.0
    exps = _exponents(max_deg)
    proto = FunctionDictionary(exps, center, scale, np.eye(len(exps), dtype=complex), 1.0,
                               len(exps), max_deg)
    x = proto.raw(s.a, s.b)
    w = s.weights
    mean = w @ x
    xc = (x[:, 1:] - mean[1:]) * np.sqrt(w)[:, None]
    u, sv, vh = np.linalg.svd(xc, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        raise IllConditionedDictionary("dictionary has no nonconstant directions")
    keep = sv > DROP_TOL * sv[0]
    cond = float((sv[0] / sv[keep][-1]) ** 2)
    if cond > MAX_GRAM_COND:
        raise IllConditionedDictionary(f"Gram condition number {cond:.3g} exceeds {MAX_GRAM_COND:g}")
    v = np.conj(vh[keep]).T / sv[keep]
    n_raw = len(exps)
    t = np.zeros((n_raw, 1 + v.shape[1]), dtype=complex)
    t[0, 0] = 1.0
    t[1:, 1:] = v
    t[0, 1:] = -mean[1:] @ v
    return FunctionDictionary(exps, center, scale, t, cond, 1 + int(keep.sum()), max_deg)


def gram_matrix(dic: FunctionDictionary, s) -> np.ndarray:
    q = dic.values(s.a, s.b)
    return np.conj(q).T @ (s.weights[:, None] * q)


# --------------------------------------------------------------------------
# Galerkin matrix


@dataclass(frozen=True, eq=False)
class DiscretizedTransfer:
    matrix: np.ndarray
    t: float
    map_id: str
    dictionary_ref: Optional[FunctionDictionary] = field(default=None, repr=False)
    lsq_residual: float = 0.0


def sample_fiber(f, s):
    return f.preimage_arrays(s.a, s.b)


def galerkin_matrix(f, h, t: float, dic: FunctionDictionary, s, fiber=None,
                    check: bool = True) -> DiscretizedTransfer:
    """Matrix of ``Lambda_h(it)`` on the orthonormal dictionary.

    Column ``j`` holds the weighted least-squares coordinates of
    ``Lambda(exp(i t h) q_j)`` evaluated exactly at the sample points.
    """
    t = float(t)
    if not math.isfinite(t):
        raise InvalidParameter("t must be finite")
    fa, fb = fiber if fiber is not None else sample_fiber(f, s)
    weight = exp_weight(1j * t, h.values(fa, fb)) if t != 0 else np.ones(fa.shape)
    lam_raw = (weight[..., None] * dic.raw(fa, fb)).mean(axis=1)  # (N, n_raw)
    y = lam_raw @ dic.transform
    q = dic.values(s.a, s.b)
    w = s.weights
    m = np.conj(q).T @ (w[:, None] * y)
    resid = y - q @ m
    num = np.sqrt(w @ np.abs(resid) ** 2)
    den = np.sqrt(w @ np.abs(y) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(den > 0, num / den, 0.0)
    worst = float(rel.max())
    if check and worst > MAX_LSQ_RESIDUAL:
        raise DiscretizationRejected(f"relative projection residual {worst:.3g} exceeds {MAX_LSQ_RESIDUAL}")
    return DiscretizedTransfer(m, t, f.map_id, dic, worst)


# --------------------------------------------------------------------------
# eigen-decomposition


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    leading: complex
    leading_vector: np.ndarray
    left_vector: np.ndarray  # normalized so that left^H @ leading_vector == 1
    subleading_modulus: float
    gap_ok: bool
    iterations: int = 0

    def projector_pairing(self, coeffs) -> complex:
        """Coefficient of the leading eigenvector in ``coeffs`` (spectral projection)."""
        return complex(np.vdot(self.left_vector, coeffs))


def _start_vector(n, seed=12345):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def power_iteration(a, shift: complex = 0.0, tol: float = EIG_TOL, max_iter: int = EIG_MAX_ITER):
    """Dominant eigenpair of ``a + shift*I`` by power iteration.

    Returns ``(eigenvalue of a, vector, iterations, converged)``. Convergence
    is declared when the Rayleigh-quotient residual falls below ``tol``
    relative to the matrix norm.
    """
    n = a.shape[0]
    b = a + shift * np.eye(n)
    scale = max(np.linalg.norm(a, 2), 1e-300)
    v = _start_vector(n)
    lam = 0j
    for it in range(1, max_iter + 1):
        w = b @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0j, v, it, True
        v = w / nw
        av = a @ v
        lam = complex(np.vdot(v, av))
        if np.linalg.norm(av - lam * v) <= tol * scale:
            return lam, v, it, True
    return lam, v, max_iter, False


def _growth_rate(b, n_iter: int = 400, tail: int = 300) -> float:
    """Spectral radius estimate from the geometric mean growth of ``b^k x``."""
    v = _start_vector(b.shape[0], seed=54321)
    logs = []
    for _ in range(n_iter):
        w = b @ v
        nw = np.linalg.norm(w)
        if nw == 0 or nw < 1e-300:
            return 0.0
        logs.append(math.log(nw))
        v = w / nw
    return math.exp(float(np.mean(logs[-tail:])))


def decompose(m, shift: complex = 0.0) -> SpectralDecomposition:
    """Leading eigenvalue, eigenvectors and subleading modulus of a discretized operator."""
    a = np.asarray(m.matrix if isinstance(m, DiscretizedTransfer) else m, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise EigenSolveError("matrix has non-finite entries")
    n = a.shape[0]
    lam, v, iters, ok = power_iteration(a, shift)
    if ok:
        mu, u, _, ok_l = power_iteration(np.conj(a).T, np.conj(shift))
        ok = ok_l and abs(np.conj(mu) - lam) <= 1e-6 * max(1.0, abs(lam))
    if not ok:
        # slow convergence is expected when the top two moduli nearly tie
        ev = np.linalg.eigvals(a)
        mods = np.sort(np.abs(ev))[::-1]
        if n > 1 and mods[0] - mods[1] <= GAP_MARGIN * max(1.0, mods[0]) * 1e3:
            top = ev[np.argmax(np.abs(ev))]
            return SpectralDecomposition(complex(top), v, v, float(mods[1]), False, iters)
        raise EigenSolveError(f"power iteration did not converge in {EIG_MAX_ITER} steps")
    pair = np.vdot(u, v)
    if abs(pair) < 1e-12:
        return SpectralDecomposition(lam, v, u, abs(lam), False, iters)
    # two-sided Rayleigh quotient: error is the product of the left and right errors
    lam = complex(np.vdot(u, a @ v) / pair)
    if abs(v[0]) > 1e-8:
        v = v / v[0]
    u = u / np.conj(np.vdot(u, v))
    deflated = a - lam * np.outer(v, np.conj(u))
    sub = _growth_rate(deflated) if n > 1 else 0.0
    sub = min(sub, abs(lam)) if abs(sub - abs(lam)) <= GAP_MARGIN else sub
    gap_ok = sub < abs(lam) - GAP_MARGIN
    return SpectralDecomposition(lam, v, u, float(sub), bool(gap_ok), iters)


def top_eigenvalues(m, k: int = 3) -> np.ndarray:
    a = np.asarray(m.matrix if isinstance(m, DiscretizedTransfer) else m)
    ev = np.linalg.eigvals(a)
    return ev[np.argsort(-np.abs(ev))[:k]]


# --------------------------------------------------------------------------
# eigenvalue curve


def _check_t_range(h, t_values, s, fiber):
    hmax = float(np.abs(h.values(*fiber)).max())
    if max(abs(t) for t in t_values) * hmax > EXP_GUARD:
        raise InvalidParameter("|t| * max|h| exceeds the exponent guard")


def lambda_curve(f, h, t_values, dic: FunctionDictionary, s, fiber=None):
    """``[(t, lambda(it))]`` in the order of ``t_values``.

    The curve is followed outwards from ``t = 0``; at each step the
    eigenvalue nearest the previous one is taken among the leading few.
    """
    ts = [float(t) for t in t_values]
    if 0.0 not in ts:
        raise InvalidCurve("t_values must contain 0")
    if sorted(ts) != sorted(-t for t in ts):
        raise InvalidCurve("t_values must be symmetric about 0")
    fiber = fiber if fiber is not None else sample_fiber(f, s)
    _check_t_range(h, ts, s, fiber)
    values = {0.0: decompose(galerkin_matrix(f, h, 0.0, dic, s, fiber)).leading}
    for side in (sorted(t for t in ts if t > 0), sorted((t for t in ts if t < 0), reverse=True)):
        prev = values[0.0]
        for t in side:
            m = galerkin_matrix(f, h, t, dic, s, fiber)
            cands = np.concatenate([[decompose(m).leading], top_eigenvalues(m, 3)])
            lam = complex(cands[np.argmin(np.abs(cands - prev))])
            values[t] = lam
            prev = lam
    return [(t, values[t]) for t in ts]


def lambda_derivatives(curve, delta: float = 0.05):
    """``(d1, d2)``: five-point derivatives at 0 of ``Im log lambda`` and ``-Re log lambda``."""
    pts = {round(float(t), 12): complex(l) for t, l in curve}

    def at(k):
        key = round(k * delta, 12)
        if key not in pts:
            raise InvalidCurve(f"curve lacks t = {k * delta:g}")
        return np.log(pts[key])

    l = {k: at(k) for k in (-2, -1, 0, 1, 2)}
    # unwrap the phase relative to t = 0
    im = {k: l[0].imag + ((l[k].imag - l[0].imag + math.pi) % (2 * math.pi) - math.pi) for k in l}
    d1 = (-im[2] + 8 * im[1] - 8 * im[-1] + im[-2]) / (12 * delta)
    re = {k: l[k].real for k in l}
    d2 = -(-re[2] + 16 * re[1] - 30 * re[0] + 16 * re[-1] - re[-2]) / (12 * delta ** 2)
    return float(d1), float(d2)


def cocycle_scan(f, h, t_values, dic: FunctionDictionary, s, fiber=None):
    """Spectral radius of the discretized ``Lambda_h(it)`` for each ``t > 0``.

    Returns ``(rows, all_below_one)`` with ``rows = [(t, radius)]``.
    """
    ts = [float(t) for t in t_values]
    if any(not t > 0 for t in ts):
        raise InvalidParameter("cocycle scan needs t > 0")
    fiber = fiber if fiber is not None else sample_fiber(f, s)
    _check_t_range(h, ts, s, fiber)
    rows = []
    for t in ts:
        m = galerkin_matrix(f, h, t, dic, s, fiber)
        rows.append((t, float(abs(decompose(m).leading))))
    return rows, max(r for _, r in rows) <= 1 - 1e-3


def spectral_csv(rows) -> str:
    """CSV ``t,re,im,subleading,lsq_residual`` from ``(t, decomposition, residual)`` rows."""
    lines = ["t,re,im,subleading,lsq_residual"]
    for t, dec, res in rows:
        lam = complex(dec.leading)
        lines.append(f"{t!r},{lam.real!r},{lam.imag!r},{dec.subleading_modulus!r},{res!r}")
    return "\n".join(lines) + "\n"
