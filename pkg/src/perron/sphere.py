"""Riemann sphere points, chordal metric, charts and Fubini-Study quadrature.

Points are stored in homogeneous coordinates ``[a:b]`` (``z = a/b``) using a
canonical representative: the coordinate of larger modulus is scaled to
exactly 1. The other coordinate is then the local chart coordinate, which
is bounded by 1 in modulus, so nothing overflows near infinity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, GradientError, InvalidParameter, InvalidPoint

PROJECTIVE_TOL = 1e-10
FD_STEP = 1e-5


class Chart(enum.Enum):
    AFFINE = "affine"  # coordinate z = a/b, used when |z| <= 1
    COAFFINE = "coaffine"  # coordinate 1/z = b/a, used when |z| > 1


# --------------------------------------------------------------------------
# array kernels


def normalize_arrays(a, b):
    """Canonical homogeneous representatives for arrays of pairs.

    Returns ``(a, b)`` with ``max(|a|, |b|) == 1``; the larger coordinate is
    exactly ``1+0j``. Ties go to the affine chart (``b == 1``).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    affine = np.abs(a) <= np.abs(b)
    one = np.ones_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        na = np.where(affine, a / np.where(affine, b, 1), one)
        nb = np.where(affine, one, b / np.where(affine, 1, a))
    return na, nb


def chordal_arrays(a1, b1, a2, b2):
    """Chordal distance between arrays of homogeneous points (broadcasting)."""
    num = np.abs(a1 * b2 - a2 * b1)
    den = np.sqrt(np.abs(a1) ** 2 + np.abs(b1) ** 2) * np.sqrt(np.abs(a2) ** 2 + np.abs(b2) ** 2)
    return np.minimum(num / den, 1.0)


def chart_arrays(a, b):
    """Chart choice and coordinate for canonical points.

    Returns ``(affine_mask, zeta)`` with ``|zeta| <= 1``.
    """
    affine = np.abs(a) <= np.abs(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.where(affine, a / np.where(affine, b, 1), b / np.where(affine, 1, a))
    return affine, zeta


def from_chart_arrays(affine, zeta):
    affine = np.asarray(affine, dtype=bool)
    zeta = np.asarray(zeta, dtype=complex)
    one = np.ones_like(zeta)
    return normalize_arrays(np.where(affine, zeta, one), np.where(affine, one, zeta))


def affine_arrays(a, b):
    """Affine coordinate ``a/b`` (``inf`` at the point at infinity)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        z = a / b
    return np.where(b == 0, complex(np.inf, 0.0), z)


def from_affine_arrays(z):
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    a, b = normalize_arrays(np.where(inf, 1.0, z), np.where(inf, 0.0, 1.0))
    return a, b


# --------------------------------------------------------------------------
# scalar types


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point ``[a:b]`` of the Riemann sphere.

    The constructor normalizes, so ``SpherePoint(4, 2)`` has coordinates
    ``(1, 0.5)``. Equality is projective, up to ``PROJECTIVE_TOL`` in
    chordal distance.
    """

    a: complex
    b: complex

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        if not (math.isfinite(a.real) and math.isfinite(a.imag)
                and math.isfinite(b.real) and math.isfinite(b.imag)):
            raise InvalidPoint(f"non-finite homogeneous coordinates ({a}, {b})")
        if a == 0 and b == 0:
            raise InvalidPoint("both homogeneous coordinates are zero")
        if abs(a) <= abs(b):
            a, b = a / b, 1 + 0j
        else:
            a, b = 1 + 0j, b / a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_affine(cls, z) -> "SpherePoint":
        z = complex(z)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return cls(1, 0)
        return cls(z, 1)

    @classmethod
    def infinity(cls) -> "SpherePoint":
        return cls(1, 0)

    @property
    def z(self) -> complex:
        """Affine coordinate; ``inf`` for the point at infinity."""
        if self.b == 0:
            return complex(math.inf, 0.0)
        return self.a / self.b

    @property
    def is_infinity(self) -> bool:
        return self.b == 0

    def __eq__(self, other):
        if not isinstance(other, SpherePoint):
            return NotImplemented
        return chordal_distance(self, other) <= PROJECTIVE_TOL

    __hash__ = None

    def __repr__(self):
        return f"SpherePoint(a={self.a!r}, b={self.b!r})"


@dataclass(frozen=True)
class ChartValue:
    chart: Chart
    coordinate: complex


def normalize(a, b) -> SpherePoint:
    """Canonical point for the homogeneous pair ``(a, b)``."""
    return SpherePoint(a, b)


def chordal_distance(p: SpherePoint, q: SpherePoint) -> float:
    num = abs(p.a * q.b - q.a * p.b)
    den = math.hypot(abs(p.a), abs(p.b)) * math.hypot(abs(q.a), abs(q.b))
    return min(num / den, 1.0)


def to_chart(p: SpherePoint) -> ChartValue:
    if abs(p.a) <= abs(p.b):
        return ChartValue(Chart.AFFINE, p.a / p.b)
    return ChartValue(Chart.COAFFINE, p.b / p.a)


def from_chart(c: ChartValue) -> SpherePoint:
    if c.chart is Chart.AFFINE:
        return SpherePoint(c.coordinate, 1)
    return SpherePoint(1, c.coordinate)


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Equal-weight node set for the normalized Fubini-Study area measure."""

    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) < 2:
            raise InvalidParameter("quadrature needs at least 2 nodes")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameter("quadrature weights must be nonnegative and sum to 1")

    @property
    def nodes(self) -> list[SpherePoint]:
        return [SpherePoint(x, y) for x, y in zip(self.a, self.b)]

    def __len__(self):
        return len(self.weights)


def sphere_to_homogeneous(x1, x2, x3):
    """Stereographic projection from the north pole, ``z = (x1 + i x2)/(1 - x3)``."""
    x1, x2, x3 = (np.asarray(v, dtype=float) for v in (x1, x2, x3))
    south = x3 <= 0
    a = np.where(south, x1 + 1j * x2, 1 + x3)
    b = np.where(south, 1 - x3, x1 - 1j * x2)
    return normalize_arrays(a, b)


def homogeneous_to_sphere(a, b):
    n2 = np.abs(a) ** 2 + np.abs(b) ** 2
    w = 2 * a * np.conj(b) / n2
    return w.real, w.imag, (np.abs(a) ** 2 - np.abs(b) ** 2) / n2


def fubini_quadrature(n: int) -> Quadrature:
    """Fibonacci-spiral nodes on the unit sphere, pushed to ``P^1``.

    Uniform area on the round sphere projects to the normalized
    Fubini-Study measure, so equal weights ``1/n`` are used.
    """
    if n < 8:
        raise InvalidParameter(f"need at least 8 quadrature nodes, got {n}")
    k = np.arange(n)
    x3 = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - x3 * x3))
    angle = k * math.pi * (3.0 - math.sqrt(5.0))
    a, b = sphere_to_homogeneous(r * np.cos(angle), r * np.sin(angle), x3)
    return Quadrature(a, b, np.full(n, 1.0 / n))


def fubini_mean(phi, q: Quadrature):
    """Mean value of ``phi`` against the Fubini-Study measure."""
    vals = phi.values(q.a, q.b)
    return np.sum(q.weights * vals)


def _energy_density(phi, a, b):
    """Pointwise Dirichlet density ``|grad phi|^2 dx dy`` relative to the measure."""
    _, zeta = chart_arrays(a, b)
    try:
        dz, dzbar = phi.chart_gradient(a, b)
    except EvaluationError as exc:
        raise GradientError(f"gradient evaluation failed: {exc}") from exc
    dens = math.pi * (1 + np.abs(zeta) ** 2) ** 2 * 2 * (np.abs(dz) ** 2 + np.abs(dzbar) ** 2)
    bad = ~np.isfinite(dens)
    if np.any(bad):
        raise GradientError(f"non-finite gradient at node {int(np.argmax(bad))}")
    return dens


def sobolev_norms(phi, q: Quadrature) -> tuple[float, float]:
    """Quadrature values of ``(||phi||_L2, ||d phi||_L2)``.

    The gradient part is the Dirichlet energy, which is conformally invariant;
    it is evaluated in whichever chart keeps ``|zeta| <= 1``.
    """
    vals = phi.values(q.a, q.b)
    l2 = math.sqrt(float(np.sum(q.weights * np.abs(vals) ** 2)))
    grad = math.sqrt(float(np.sum(q.weights * _energy_density(phi, q.a, q.b))))
    return l2, grad
