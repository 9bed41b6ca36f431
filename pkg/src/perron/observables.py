"""Observables: vectorized functions on the sphere with chart gradients.

An :class:`Observable` wraps a function of canonical homogeneous coordinate
arrays ``(a, b)``. Gradients are Wirtinger derivatives ``(d/dzeta,
d/dzetabar)`` in the chart returned by :func:`perron.sphere.chart_arrays`
(affine where ``|z| <= 1``, co-affine ``1/z`` elsewhere). Observables without
an analytic gradient fall back to central differences in that chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, GradientError
from .sphere import FD_STEP, SpherePoint, chart_arrays, from_chart_arrays

ArrayFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Observable:
    func: ArrayFn
    grad: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None
    name: str = "phi"
    real: bool = True

    def values(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        v = np.asarray(self.func(a, b))
        if self.real and np.iscomplexobj(v):
            v = v.real
        v = np.broadcast_to(v, np.broadcast(a, b).shape)
        bad = ~np.isfinite(v)
        if np.any(bad):
            idx = int(np.flatnonzero(bad.ravel())[0])
            raise EvaluationError(f"observable {self.name!r} is not finite", index=idx)
        return v

    def __call__(self, p: SpherePoint):
        v = self.values(np.array([p.a]), np.array([p.b]))[0]
        return float(v) if self.real else complex(v)

    def chart_gradient(self, a, b):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        if self.grad is None:
            return self.fd_gradient(a, b)
        dz, dzbar = self.grad(a, b)
        shape = np.broadcast(a, b).shape
        return np.broadcast_to(dz, shape), np.broadcast_to(dzbar, shape)

    def fd_gradient(self, a, b, step: float = FD_STEP):
        affine, zeta = chart_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))

        def at(shift):
            pa, pb = from_chart_arrays(affine, zeta + shift)
            return self.values(pa, pb)

        try:
            dx = (at(step) - at(-step)) / (2 * step)
            dy = (at(1j * step) - at(-1j * step)) / (2 * step)
        except EvaluationError as exc:
            raise GradientError(f"finite differences failed for {self.name!r}: {exc}") from exc
        return (dx - 1j * dy) / 2, (dx + 1j * dy) / 2

    # arithmetic ------------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = constant(other)
        if not isinstance(other, Observable):
            return NotImplemented
        s, o = self, other

        grad = None
        if s.grad is not None and o.grad is not None:
            def grad(a, b):
                g1, g2 = s.chart_gradient(a, b), o.chart_gradient(a, b)
                return g1[0] + g2[0], g1[1] + g2[1]

        return Observable(lambda a, b: s.values(a, b) + o.values(a, b), grad,
                          f"({s.name} + {o.name})", s.real and o.real)

    __radd__ = __add__

    def __mul__(self, c):
        if not isinstance(c, (int, float, complex)):
            return NotImplemented
        s = self
        grad = None
        if s.grad is not None:
            def grad(a, b):
                g = s.chart_gradient(a, b)
                return c * g[0], c * g[1]
        real = s.real and not (isinstance(c, complex) and c.imag != 0)
        return Observable(lambda a, b: c * s.values(a, b), grad, f"{c}*{s.name}", real)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0 * other)

    def shifted(self, c) -> "Observable":
        return self + constant(c)


def _poly_d(c, x):
    """Ascending-coefficient polynomial and its derivative at ``x``."""
    p = np.zeros_like(x) + c[-1]
    dp = np.zeros_like(x)
    for ck in c[-2::-1]:
        dp = dp * x + p
        p = p * x + ck
    return p, dp


def _charts(a, b):
    return chart_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


# --------------------------------------------------------------------------
# catalog


def constant(c) -> Observable:
    c = complex(c) if isinstance(c, complex) else float(c)
    real = not isinstance(c, complex)
    return Observable(lambda a, b: np.full(np.broadcast(a, b).shape, c),
                      lambda a, b: (0.0, 0.0), f"const({c})", real)


def zero() -> Observable:
    return constant(0.0)


def re_z() -> Observable:
    def func(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (a / b).real

    def grad(a, b):
        affine, zeta = _charts(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            co = -1.0 / (2 * zeta ** 2)
        dz = np.where(affine, 0.5, co)
        return dz, np.conj(dz)

    return Observable(func, grad, "re_z")


def im_z() -> Observable:
    def func(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (a / b).imag

    def grad(a, b):
        affine, zeta = _charts(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            co = -1.0 / (2j * zeta ** 2)
        dz = np.where(affine, 1 / 2j, co)
        return dz, np.conj(dz)

    return Observable(func, grad, "im_z")


def re_rational(p, q) -> Observable:
    """``Re(p(z)/q(z))`` for ascending coefficient lists, extended through infinity."""
    p = np.trim_zeros(np.asarray(p, dtype=complex), "b")
    q = np.trim_zeros(np.asarray(q, dtype=complex), "b")
    if len(q) == 0:
        raise ValueError("denominator polynomial is zero")
    if len(p) == 0:
        p = np.zeros(1, dtype=complex)
    deg = max(len(p), len(q)) - 1
    ph = np.concatenate([p, np.zeros(deg + 1 - len(p))])
    qh = np.concatenate([q, np.zeros(deg + 1 - len(q))])
    ph_rev, qh_rev = ph[::-1], qh[::-1]

    def parts(a, b):
        affine, zeta = _charts(a, b)
        pa, dpa = _poly_d(ph, zeta)
        qa, dqa = _poly_d(qh, zeta)
        pc, dpc = _poly_d(ph_rev, zeta)
        qc, dqc = _poly_d(qh_rev, zeta)
        num = np.where(affine, pa, pc)
        den = np.where(affine, qa, qc)
        dnum = np.where(affine, dpa, dpc)
        dden = np.where(affine, dqa, dqc)
        return num, den, dnum, dden

    def func(a, b):
        num, den, _, _ = parts(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (num / den).real

    def grad(a, b):
        num, den, dnum, dden = parts(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = (dnum * den - num * dden) / den ** 2
        return d / 2, np.conj(d) / 2

    return Observable(func, grad, f"re_rational({p.tolist()},{q.tolist()})")


def sphere_coordinate(k: int) -> Observable:
    """Coordinate ``x_k`` (k = 1, 2, 3) of the unit sphere under stereographic projection.

    ``x1 + i x2 = 2z/(1+|z|^2)`` and ``x3 = (|z|^2-1)/(|z|^2+1)``; all three are
    smooth on the whole sphere.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")

    def func(a, b):
        n2 = np.abs(a) ** 2 + np.abs(b) ** 2
        if k == 3:
            return (np.abs(a) ** 2 - np.abs(b) ** 2) / n2
        w = 2 * a * np.conj(b) / n2
        return w.real if k == 1 else w.imag

    def grad(a, b):
        affine, zeta = _charts(a, b)
        den = (1 + np.abs(zeta) ** 2) ** 2
        zb = np.conj(zeta)
        if k == 1:
            dz = (1 - zb ** 2) / den
        elif k == 2:
            dz = np.where(affine, 1, -1) * (1 + zb ** 2) / (1j * den)
        else:
            dz = np.where(affine, 1, -1) * 2 * zb / den
        return dz, np.conj(dz)

    return Observable(func, grad, f"x{k}")


def re_z_bounded() -> Observable:
    """``Re z / (1+|z|^2)``, finite everywhere (zero at infinity)."""
    return Observable(*_half(sphere_coordinate(1)), name="re_z_bounded")


def _half(obs):
    return (lambda a, b: 0.5 * obs.values(a, b),
            lambda a, b: tuple(0.5 * g for g in obs.chart_gradient(a, b)))


def smooth_bump(center, width: float) -> Observable:
    """``exp(-chordal(z, center)^2 / width^2)``; ``center`` is affine (``inf`` allowed)."""
    if width <= 0:
        raise ValueError("width must be positive")
    c = center if isinstance(center, SpherePoint) else SpherePoint.from_affine(center)
    ca, cb = c.a, c.b
    k2 = abs(ca) ** 2 + abs(cb) ** 2
    w2 = float(width) ** 2

    def dist2(a, b):
        return np.abs(a * cb - b * ca) ** 2 / ((np.abs(a) ** 2 + np.abs(b) ** 2) * k2)

    def func(a, b):
        return np.exp(-dist2(a, b) / w2)

    def grad(a, b):
        affine, zeta = _charts(a, b)
        # in either chart: dist^2 = |zeta*beta - alpha|^2 / ((1+|zeta|^2) k2)
        beta = np.where(affine, cb, ca)
        alpha = np.where(affine, ca, cb)
        lin = zeta * beta - alpha
        s = 1 + np.abs(zeta) ** 2
        dd = (beta * np.conj(lin) * s - np.abs(lin) ** 2 * np.conj(zeta)) / (k2 * s ** 2)
        dz = -func(a, b) * dd / w2
        return dz, np.conj(dz)

    return Observable(func, grad, f"bump({c.z},{width})")


def coboundary_of(psi: Observable, f) -> Observable:
    """``psi o f - psi``; its Birkhoff sums telescope.

    No analytic gradient: the finite-difference path is used.
    """
    def func(a, b):
        fa, fb = f.evaluate_arrays(a, b)
        return psi.values(fa, fb) - psi.values(a, b)

    return Observable(func, None, f"coboundary({psi.name})", psi.real)


def from_affine_function(fn, name="phi", real=True) -> Observable:
    """Wrap a vectorized function of the affine coordinate ``z``."""
    def func(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            return fn(a / b)

    return Observable(func, None, name, real)


def smooth_family() -> list[Observable]:
    """Ten smooth observables used by norm-comparison and projector checks."""
    x1, x2, x3 = (sphere_coordinate(k) for k in (1, 2, 3))
    return [
        constant(1.0),
        x1 + 2.0,
        x2 + 1.5,
        x3 + 2.0,
        smooth_bump(0.0, 0.8),
        smooth_bump(1.0, 0.5) + 0.5,
        smooth_bump(1j, 1.0),
        0.5 * x1 + 0.3 * x3 + 1.0,
        smooth_bump(math.inf, 0.7) + 0.2,
        smooth_bump(-0.5 + 0.5j, 0.6) + 1.0,
    ]
