"""Pointwise transfer operator, its exponential perturbations, preimage trees
and Birkhoff sums.

``Lambda phi(z) = (1/d) sum_{f(w)=z} phi(w)``, with preimages counted with
multiplicity, and ``Lambda_h(theta) phi = Lambda(exp(theta h) phi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, OverflowGuard, TreeSizeExceeded
from .sphere import SpherePoint

EXP_GUARD = 700.0
MAX_TREE_LEAVES = 4096
MAX_TREE_DEPTH = 6
GORDIN_LEAF_BUDGET = 1 << 20


@dataclass(frozen=True)
class PerturbationParameter:
    theta: complex

    def __post_init__(self):
        t = complex(self.theta)
        if not (math.isfinite(t.real) and math.isfinite(t.imag)):
            raise InvalidParameter("theta must be finite")
        object.__setattr__(self, "theta", t)

    @property
    def is_imaginary(self) -> bool:
        return self.theta.real == 0.0

    @property
    def t(self) -> float:
        return self.theta.imag


def _theta(theta) -> complex:
    if isinstance(theta, PerturbationParameter):
        return theta.theta
    return PerturbationParameter(theta).theta


def exp_weight(theta: complex, hv):
    """``exp(theta * h)`` with the overflow guard."""
    arg = theta * hv
    big = np.abs(arg) > EXP_GUARD
    if np.any(big):
        raise OverflowGuard(f"|theta*h| = {float(np.abs(arg).max()):.4g} exceeds {EXP_GUARD}")
    return np.exp(arg)


# --------------------------------------------------------------------------
# batched kernels (arrays of canonical homogeneous coordinates)


def transfer_arrays(f, phi, a, b, fiber=None):
    """``Lambda phi`` at every point of the arrays ``(a, b)``."""
    fa, fb = fiber if fiber is not None else f.preimage_arrays(a, b)
    return phi.values(fa, fb).mean(axis=-1)


def perturbed_arrays(f, h, theta, phi, a, b, fiber=None):
    theta = _theta(theta)
    fa, fb = fiber if fiber is not None else f.preimage_arrays(a, b)
    w = exp_weight(theta, h.values(fa, fb))
    return (w * phi.values(fa, fb)).mean(axis=-1)


def preimage_tree(f, a, b, depth: int):
    """Levels of the backward tree; level ``k`` has shape ``(M, d**k)``.

    Children of node ``j`` at level ``k-1`` sit at ``j*d .. j*d + d - 1``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    levels = [(a[:, None], b[:, None])]
    for _ in range(depth):
        pa, pb = levels[-1]
        ca, cb = f.preimage_arrays(pa, pb)
        m = ca.shape[0]
        levels.append((ca.reshape(m, -1), cb.reshape(m, -1)))
    return levels


def transfer_power_arrays(f, phi, n: int, a, b):
    """``Lambda^n phi`` at each point via the full ``d**n`` leaf tree.

    Only the current level is kept, so memory scales with the leaf count.
    """
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    if n == 0:
        return phi.values(a, b)
    la, lb = a[:, None], b[:, None]
    for _ in range(n):
        ca, cb = f.preimage_arrays(la, lb)
        la, lb = ca.reshape(len(a), -1), cb.reshape(len(a), -1)
    return phi.values(la, lb).mean(axis=-1)


def birkhoff_arrays(f, h, a, b, n: int, initial=None):
    """Forward Birkhoff sums ``S_n h`` from each point, summed left to right."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    acc = np.zeros(a.shape) if initial is None else np.array(initial, dtype=float, copy=True)
    for _ in range(n):
        acc = acc + h.values(a, b)
        a, b = f.evaluate_arrays(a, b)
    return acc


# --------------------------------------------------------------------------
# pointwise operations


def _pt(z: SpherePoint):
    return np.array([z.a]), np.array([z.b])


def transfer_apply(f, phi, z: SpherePoint):
    v = transfer_arrays(f, phi, *_pt(z))[0]
    return float(v) if phi.real else complex(v)


def perturbed_apply(f, h, theta, phi, z: SpherePoint) -> complex:
    return complex(perturbed_arrays(f, h, theta, phi, *_pt(z))[0])


def iterated_perturbed_apply(f, h, theta, phi, z: SpherePoint, n: int):
    """``(nested, direct)`` values of ``Lambda_h(theta)^n phi (z)``.

    ``nested`` composes the one-step operator down the preimage tree;
    ``direct`` averages ``exp(theta S_n h(w)) phi(w)`` over the leaves, with
    ``S_n h`` recomputed along each leaf's forward orbit.
    """
    theta = _theta(theta)
    if n < 0:
        raise InvalidParameter("n must be nonnegative")
    d = f.degree
    if n > MAX_TREE_DEPTH or d ** n > MAX_TREE_LEAVES:
        raise TreeSizeExceeded(f"tree with depth {n} and {d}**{n} leaves exceeds the cap")
    levels = preimage_tree(f, *_pt(z), n)

    la, lb = levels[-1]
    vals = phi.values(la, lb).astype(complex)
    for k in range(n, 0, -1):
        ka, kb = levels[k]
        weighted = exp_weight(theta, h.values(ka, kb)) * vals
        vals = weighted.reshape(weighted.shape[0], -1, d).mean(axis=-1)
    nested = complex(vals[0, 0])

    s = birkhoff_arrays(f, h, la, lb, n)
    direct = complex(np.mean(exp_weight(theta, s) * phi.values(la, lb)))
    return nested, direct


def birkhoff_sum(f, h, z: SpherePoint, n: int, initial: float = 0.0) -> float:
    """``S_n h(z) = sum_{k<n} h(f^k z)`` added left to right onto ``initial``."""
    if n < 0:
        raise InvalidParameter("n must be nonnegative")
    acc = float(initial)
    a, b = _pt(z)
    for _ in range(n):
        acc = acc + float(h.values(a, b)[0])
        a, b = f.evaluate_arrays(a, b)
    return acc


def forward_orbit(f, z: SpherePoint, n: int) -> list[SpherePoint]:
    pts = [z]
    for _ in range(n):
        pts.append(f(pts[-1]))
    return pts


def gordin_partial_sums(f, h, s, n_max: int) -> list[float]:
    """Partial sums of ``mean_s |Lambda^n h - mu(h)|`` for ``n = 0..n_max``.

    ``Lambda^n h`` is the exact tree average. When ``d**n`` leaves per point
    would exceed the leaf budget, an evenly spaced subsample of the sample
    points is used for that term.
    """
    if not 0 <= n_max <= 20:
        raise InvalidParameter("n_max must lie in [0, 20]")
    w = np.asarray(s.weights)
    mu_h = float(np.sum(w * h.values(s.a, s.b)))
    total = 0.0
    out = []
    m = len(w)
    for n in range(n_max + 1):
        leaves = f.degree ** n
        k = min(m, max(1, GORDIN_LEAF_BUDGET // leaves))
        idx = np.linspace(0, m - 1, k).round().astype(int) if k < m else np.arange(m)
        vals = transfer_power_arrays(f, h, n, s.a[idx], s.b[idx])
        ww = w[idx] / w[idx].sum()
        total += float(np.sum(ww * np.abs(vals - mu_h)))
        out.append(total)
    return out
