"""Roots of binary forms ``R(a, b) = sum_k r_k a^k b^(n-k)`` on the sphere.

Batched over rows: ``coeffs`` has shape ``(M, n+1)`` and the result is a
pair of ``(M, n)`` arrays of canonical homogeneous roots, with multiplicity
by repetition and a deterministic order.

Two solvers are available. ``"quadratic"`` is the stable closed form for
``n == 2`` written directly in homogeneous coordinates, so roots at 0 and
infinity need no special handling. ``"aberth"`` runs Aberth-Ehrlich
simultaneous iteration on the dehomogenized polynomial in the chart whose
leading coefficient dominates, then polishes each root with Newton steps
in its own chart.
"""

from __future__ import annotations

import numpy as np

from .errors import RootSolveError
from .sphere import chart_arrays, chordal_arrays, normalize_arrays

MAX_ITER = 200
STEP_TOL = 1e-14
CLUSTER_TOL = 1e-7
_EPS = np.finfo(float).eps


def homogeneous_roots(coeffs, method: str = "auto"):
    """Roots of each row of ``coeffs`` (ascending in the power of ``a``).

    ``method`` is ``"auto"`` (closed form for degree 2, Aberth otherwise),
    ``"quadratic"`` or ``"aberth"``.
    """
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    m, n1 = c.shape
    n = n1 - 1
    if n < 1:
        return np.empty((m, 0), complex), np.empty((m, 0), complex)
    if np.any(np.all(c == 0, axis=1)):
        raise RootSolveError("identically zero form has no isolated roots")
    if method == "auto":
        method = "quadratic" if n == 2 else "aberth"
    if method == "quadratic":
        if n != 2:
            raise ValueError("closed form needs a quadratic form")
        ra, rb = _quadratic(c)
    elif method == "aberth":
        ra, rb = _aberth_forms(c)
        ra, rb = _polish(c, ra, rb)
    else:
        raise ValueError(f"unknown root method {method!r}")
    ra, rb = _cluster(ra, rb)
    return _order(ra, rb)


# --------------------------------------------------------------------------
# closed form


def _quadratic(c):
    r0, r1, r2 = c[:, 0], c[:, 1], c[:, 2]
    s = np.sqrt(r1 * r1 - 4 * r2 * r0)
    s = np.where((np.conj(r1) * s).real >= 0, s, -s)
    q = -(r1 + s) / 2
    a1, b1 = q, r2
    a2, b2 = r0, q
    dbl = q == 0  # then r1 == 0 and r0*r2 == 0: one double root at 0 or infinity
    if np.any(dbl):
        at_zero = r2 != 0
        ra = np.where(at_zero, 0.0, 1.0)
        rb = np.where(at_zero, 1.0, 0.0)
        a1 = np.where(dbl, ra, a1)
        b1 = np.where(dbl, rb, b1)
        a2 = np.where(dbl, ra, a2)
        b2 = np.where(dbl, rb, b2)
    return normalize_arrays(np.stack([a1, a2], axis=1), np.stack([b1, b2], axis=1))


# --------------------------------------------------------------------------
# Aberth-Ehrlich


def _aberth_forms(c):
    m, n1 = c.shape
    n = n1 - 1
    ra = np.empty((m, n), complex)
    rb = np.empty((m, n), complex)
    lo_zero = c[:, 0] == 0
    hi_zero = c[:, n] == 0
    special = lo_zero | hi_zero
    regular = ~special
    if np.any(regular):
        idx = np.flatnonzero(regular)
        a, b = _aberth_dominant(c[idx])
        ra[idx], rb[idx] = a, b
    for i in np.flatnonzero(special):
        ra[i], rb[i] = _strip_and_solve(c[i])
    return ra, rb


def _strip_and_solve(row):
    """Exact zeros at either end of the form are roots at 0 or infinity."""
    n = len(row) - 1
    nz = np.flatnonzero(row)
    k0, kinf = nz[0], n - nz[-1]
    mid = row[k0:len(row) - kinf]
    a_parts = [np.zeros(k0, complex), np.ones(kinf, complex)]
    b_parts = [np.ones(k0, complex), np.zeros(kinf, complex)]
    deg = len(mid) - 1
    if deg >= 1:
        if deg == 1:
            ma, mb = normalize_arrays(np.array([-mid[0]]), np.array([mid[1]]))
        else:
            ma, mb = _aberth_dominant(mid[None, :])
            ma, mb = ma[0], mb[0]
        a_parts.append(ma)
        b_parts.append(mb)
    return np.concatenate(a_parts), np.concatenate(b_parts)


def _aberth_dominant(c):
    """Aberth iteration for rows whose two end coefficients are nonzero."""
    m, n1 = c.shape
    n = n1 - 1
    use_affine = np.abs(c[:, n]) >= np.abs(c[:, 0])
    p = np.where(use_affine[:, None], c, c[:, ::-1])
    p = p / p[:, n:]
    z = _aberth(p)
    one = np.ones_like(z)
    a = np.where(use_affine[:, None], z, one)
    b = np.where(use_affine[:, None], one, z)
    return normalize_arrays(a, b)


def _horner_d(p, z):
    """Values and derivatives of rows ``p`` (ascending, shape (m, n+1)) at ``z`` (m, k)."""
    n = p.shape[1] - 1
    val = np.broadcast_to(p[:, n:n + 1], z.shape).copy()
    der = np.zeros_like(z)
    absval = np.broadcast_to(np.abs(p[:, n:n + 1]), z.shape).copy()
    az = np.abs(z)
    for k in range(n - 1, -1, -1):
        der = der * z + val
        val = val * z + p[:, k:k + 1]
        absval = absval * az + np.abs(p[:, k:k + 1])
    return val, der, absval


def _aberth(p):
    m, n1 = p.shape
    n = n1 - 1
    # initial circle: Fujiwara-type radius from the monic coefficients
    ratios = np.abs(p[:, :n]) ** (1.0 / (n - np.arange(n)))
    radius = ratios.max(axis=1)
    radius = np.where(radius > 0, radius, 1.0)
    ang = 2 * np.pi * np.arange(n) / n + 0.4
    z = radius[:, None] * np.exp(1j * ang)[None, :]
    active = np.ones(m, dtype=bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        za = z[idx]
        val, der, absval = _horner_d(p[idx], za)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = val / der
            diff = za[:, :, None] - za[:, None, :]
            inv = np.where(eye[None], 0.0, 1.0 / np.where(eye[None], 1.0, diff))
            corr = ratio / (1 - ratio * inv.sum(axis=2))
        bad = ~np.isfinite(corr)
        if np.any(bad):
            # coincident iterates or vanishing derivative: nudge apart
            corr = np.where(bad, -1e-7 * (1 + np.abs(za)) * np.exp(1j * (np.arange(n) + 1.0)), corr)
        done_val = np.abs(val) <= 8 * _EPS * absval
        za = za - np.where(done_val, 0, corr)
        z[idx] = za
        small = (np.abs(corr) <= STEP_TOL * np.maximum(1.0, np.abs(za))) | done_val
        active[idx[np.all(small, axis=1)]] = False
    if np.any(active):
        bad_rows = np.flatnonzero(active)
        raise RootSolveError(
            f"Aberth iteration did not converge in {MAX_ITER} steps for {bad_rows.size} polynomial(s)",
            {"rows": bad_rows.tolist(), "coefficients": p[bad_rows[:3]].tolist()},
        )
    return z


def _polish(c, ra, rb, steps: int = 2):
    """Newton steps on the form, each root in the chart where it is bounded."""
    affine, zeta = chart_arrays(ra, rb)
    p_aff = c
    p_co = c[:, ::-1]
    for _ in range(steps):
        v1, d1, _ = _horner_d(p_aff, zeta)
        v2, d2, _ = _horner_d(p_co, zeta)
        val = np.where(affine, v1, v2)
        der = np.where(affine, d1, d2)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = zeta - val / der
        n1, _, _ = _horner_d(p_aff, new)
        n2, _, _ = _horner_d(p_co, new)
        nval = np.where(affine, n1, n2)
        ok = np.isfinite(new) & (np.abs(new) <= 1 + 1e-6) & (np.abs(nval) < np.abs(val))
        zeta = np.where(ok, new, zeta)
    one = np.ones_like(zeta)
    return normalize_arrays(np.where(affine, zeta, one), np.where(affine, one, zeta))


# --------------------------------------------------------------------------
# multiplicities and ordering


def _cluster(ra, rb):
    """Snap roots closer than ``CLUSTER_TOL`` (chordal) onto a common point."""
    m, n = ra.shape
    if n < 2:
        return ra, rb
    dist = chordal_arrays(ra[:, :, None], rb[:, :, None], ra[:, None, :], rb[:, None, :])
    close = (dist < CLUSTER_TOL) & ~np.eye(n, dtype=bool)[None]
    rows = np.flatnonzero(close.any(axis=(1, 2)))
    if rows.size == 0:
        return ra, rb
    ra, rb = ra.copy(), rb.copy()
    for r in rows:
        label = list(range(n))
        for i in range(n):
            for j in range(i):
                if close[r, i, j]:
                    label[i] = label[j]
                    break
        for lead in set(label):
            members = [i for i in range(n) if label[i] == lead]
            if len(members) < 2:
                continue
            # average in the chart of the cluster's first member
            if abs(ra[r, lead]) <= abs(rb[r, lead]):
                zs = ra[r, members] / rb[r, members]
                ca, cb = normalize_arrays(np.array([zs.mean()]), np.ones(1))
            else:
                ws = rb[r, members] / ra[r, members]
                ca, cb = normalize_arrays(np.ones(1), np.array([ws.mean()]))
            ra[r, members] = ca[0]
            rb[r, members] = cb[0]
    return ra, rb


def _order(ra, rb):
    """Sort each row by (chart, Re, Im) of the chart coordinate."""
    affine, zeta = chart_arrays(ra, rb)
    key_chart = (~affine).astype(np.int8)
    order = np.lexsort((zeta.imag, zeta.real, key_chart), axis=-1)
    return np.take_along_axis(ra, order, axis=1), np.take_along_axis(rb, order, axis=1)
