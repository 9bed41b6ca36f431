"""Rational maps ``f = [P:Q]`` of degree ``d >= 2`` and their fibers.

``P`` and ``Q`` are binary forms of degree ``d`` stored as ascending
coefficient arrays: ``P(a, b) = sum_k p[k] a^k b^(d-k)``, so that on the
affine chart ``f(z) = P(z, 1) / Q(z, 1)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMap, RootSolveError
from .roots import homogeneous_roots
from .sphere import SpherePoint, chordal_arrays, normalize_arrays

RESULTANT_TOL = 1e-12
RESIDUAL_TOL = 1e-9


def _trim(c):
    c = np.asarray(c, dtype=complex).ravel()
    nz = np.flatnonzero(c)
    return c[: nz[-1] + 1] if nz.size else c[:0]


def sylvester_resultant(p, q) -> complex:
    """Resultant of two binary forms of the same formal degree."""
    d = len(p) - 1
    # descending coefficients of the dehomogenized polynomials
    pd, qd = np.asarray(p)[::-1], np.asarray(q)[::-1]
    s = np.zeros((2 * d, 2 * d), dtype=complex)
    for i in range(d):
        s[i, i:i + d + 1] = pd
        s[d + i, i:i + d + 1] = qd
    return complex(np.linalg.det(s))


def _eval_form(c, a, b):
    """Evaluate a form at canonical points (one coordinate equal to 1)."""
    d = len(c) - 1
    affine = np.abs(a) <= np.abs(b)
    x = np.where(affine, a / np.where(affine, b, 1), b / np.where(affine, 1, a))
    # affine: b^d * sum c_k x^k ; co-affine: a^d * sum c_k x^(d-k)
    va = np.full(x.shape, c[d], dtype=complex)
    vc = np.full(x.shape, c[0], dtype=complex)
    for k in range(d - 1, -1, -1):
        va = va * x + c[k]
        vc = vc * x + c[d - k]
    scale = np.where(affine, b, a) ** d
    return np.where(affine, va, vc) * scale


@dataclass(frozen=True, eq=False)
class RationalMap:
    p_coeffs: np.ndarray
    q_coeffs: np.ndarray
    degree: int
    map_id: str = field(default="", compare=False)

    def __post_init__(self):
        p = np.asarray(self.p_coeffs, dtype=complex)
        q = np.asarray(self.q_coeffs, dtype=complex)
        d = int(self.degree)
        if len(p) != d + 1 or len(q) != d + 1:
            raise DegenerateMap("coefficient arrays must have length degree + 1")
        if d < 2:
            raise DegenerateMap(f"degree must be at least 2, got {d}")
        if not (np.any(p) and np.any(q)):
            raise DegenerateMap("numerator and denominator must be nonzero forms")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise DegenerateMap("non-finite coefficients")
        res = sylvester_resultant(p / np.abs(p).max(), q / np.abs(q).max())
        if not abs(res) > RESULTANT_TOL:
            raise DegenerateMap(f"numerator and denominator share a root (|resultant| = {abs(res):.3g})")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p_coeffs", p)
        object.__setattr__(self, "q_coeffs", q)
        object.__setattr__(self, "degree", d)
        if not self.map_id:
            object.__setattr__(self, "map_id", _map_id(p, q))

    # evaluation ---------------------------------------------------------------

    def evaluate_arrays(self, a, b):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        pv = _eval_form(self.p_coeffs, a, b)
        qv = _eval_form(self.q_coeffs, a, b)
        if np.any((pv == 0) & (qv == 0)):
            raise DegenerateMap("P and Q vanish simultaneously")
        return normalize_arrays(pv, qv)

    def __call__(self, p: SpherePoint) -> SpherePoint:
        return evaluate(self, p)

    # fibers -------------------------------------------------------------------

    def fiber_form(self, ta, tb):
        """Coefficients of ``tb*P - ta*Q`` for each target, shape (M, d+1)."""
        ta = np.asarray(ta, dtype=complex).reshape(-1, 1)
        tb = np.asarray(tb, dtype=complex).reshape(-1, 1)
        return tb * self.p_coeffs[None, :] - ta * self.q_coeffs[None, :]

    def preimage_arrays(self, ta, tb, method: str = "auto", check: bool = True):
        """Preimages of each target as ``(M, d)`` arrays of canonical coordinates."""
        ta = np.asarray(ta, dtype=complex)
        tb = np.asarray(tb, dtype=complex)
        shape = ta.shape
        ta_f, tb_f = ta.ravel(), tb.ravel()
        ra, rb = homogeneous_roots(self.fiber_form(ta_f, tb_f), method=method)
        if check:
            res = self.residuals(ra, rb, ta_f, tb_f)
            worst = float(res.max()) if res.size else 0.0
            if worst > RESIDUAL_TOL:
                row = int(np.unravel_index(np.argmax(res), res.shape)[0])
                raise RootSolveError(
                    f"preimage residual {worst:.3g} exceeds {RESIDUAL_TOL}",
                    {"target": complex(ta_f[row] / tb_f[row]) if tb_f[row] != 0 else "inf",
                     "max_residual": worst, "map_id": self.map_id},
                )
        return ra.reshape(shape + (self.degree,)), rb.reshape(shape + (self.degree,))

    def residuals(self, ra, rb, ta, tb):
        fa, fb = self.evaluate_arrays(ra, rb)
        return chordal_arrays(fa, fb, np.asarray(ta)[:, None], np.asarray(tb)[:, None])

    def to_record(self) -> dict:
        """Affine coefficient record ``{"numer": [[re, im], ...], "denom": ...}``."""
        def enc(c):
            c = _trim(c)
            return [[float(x.real), float(x.imag)] for x in c] or [[0.0, 0.0]]
        return {"numer": enc(self.p_coeffs), "denom": enc(self.q_coeffs)}

    def __repr__(self):
        return f"RationalMap(degree={self.degree}, id={self.map_id})"


def _map_id(p, q) -> str:
    rec = json.dumps([[repr(complex(x)) for x in p], [repr(complex(x)) for x in q]])
    return hashlib.sha256(rec.encode()).hexdigest()[:12]


def from_affine(numer, denom) -> RationalMap:
    """Homogenize ``numer(z)/denom(z)`` (ascending coefficients)."""
    n = _trim(numer)
    m = _trim(denom)
    if n.size == 0 or m.size == 0:
        raise DegenerateMap("numerator and denominator must be nonzero")
    d = max(n.size, m.size) - 1
    if d < 2:
        raise DegenerateMap(f"degree must be at least 2, got {d}")
    p = np.concatenate([n, np.zeros(d + 1 - n.size)])
    q = np.concatenate([m, np.zeros(d + 1 - m.size)])
    return RationalMap(p, q, d)


def from_record(record: dict) -> RationalMap:
    """Inverse of :meth:`RationalMap.to_record`."""
    try:
        numer = [complex(re, im) for re, im in record["numer"]]
        denom = [complex(re, im) for re, im in record["denom"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DegenerateMap(f"malformed map record: {exc}") from exc
    return from_affine(numer, denom)


def evaluate(f: RationalMap, p: SpherePoint) -> SpherePoint:
    a, b = f.evaluate_arrays(np.array([p.a]), np.array([p.b]))
    return SpherePoint(a[0], b[0])


@dataclass(frozen=True, eq=False)
class PreimageSet:
    points: list
    residuals: list

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def preimages(f: RationalMap, target: SpherePoint, method: str = "auto") -> PreimageSet:
    """The ``d`` preimages of ``target`` with multiplicity, in canonical order."""
    ra, rb = f.preimage_arrays(np.array([target.a]), np.array([target.b]), method=method)
    res = f.residuals(ra, rb, np.array([target.a]), np.array([target.b]))[0]
    pts = [SpherePoint(x, y) for x, y in zip(ra[0], rb[0])]
    return PreimageSet(pts, [float(r) for r in res])


def jacobian_form(f: RationalMap) -> np.ndarray:
    """``P_a Q_b - P_b Q_a``: a form of degree ``2d-2`` vanishing at critical points."""
    d = f.degree
    k = np.arange(d + 1)
    p, q = f.p_coeffs, f.q_coeffs
    pa, qa = (k * p)[1:], (k * q)[1:]
    pb, qb = ((d - k) * p)[:-1], ((d - k) * q)[:-1]
    return np.convolve(pa, qb) - np.convolve(pb, qa)


def critical_points(f: RationalMap) -> list[SpherePoint]:
    """The ``2d-2`` critical points, with multiplicity."""
    ra, rb = homogeneous_roots(jacobian_form(f)[None, :])
    return [SpherePoint(x, y) for x, y in zip(ra[0], rb[0])]


def random_map(rng: np.random.Generator, degree: int) -> RationalMap:
    """Map with independent complex Gaussian coefficients (for tests and benchmarks)."""
    while True:
        p = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
        q = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
        try:
            return RationalMap(p, q, degree)
        except DegenerateMap:
            continue
