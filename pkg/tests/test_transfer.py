import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perron import observables as ob
from perron.benchmarks import benchmark_maps
from perron.equilibrium import MeasureSample
from perron.errors import InvalidParameter, OverflowGuard, TreeSizeExceeded
from perron.rational_map import random_map
from perron.sphere import SpherePoint
from perron.transfer import (PerturbationParameter, birkhoff_sum, forward_orbit,
                             gordin_partial_sums, iterated_perturbed_apply, perturbed_apply,
                             transfer_apply, transfer_arrays)

P = SpherePoint.from_affine
MAPS = benchmark_maps()


def w_squared():
    return ob.Observable(lambda a, b: (a / b) ** 2, name="w^2", real=False)


def affine_id():
    return ob.Observable(lambda a, b: a / b, name="w", real=False)


def test_transfer_examples(z2):
    for f in MAPS.values():
        assert transfer_apply(f, ob.constant(1.0), P(0.37 - 1.2j)) == pytest.approx(1.0, abs=1e-15)
    assert transfer_apply(z2, ob.re_z(), P(1)) == pytest.approx(0.0, abs=1e-15)
    z = 0.8 - 0.3j
    assert transfer_apply(z2, w_squared(), P(z)) == pytest.approx(z, abs=1e-14)


def test_perturbed_examples(z2):
    z = P(0.5 + 0.2j)
    phi = ob.smooth_bump(0.1, 0.9)
    assert perturbed_apply(z2, ob.re_z(), 0.0, phi, z) == pytest.approx(transfer_apply(z2, phi, z))
    assert perturbed_apply(z2, ob.zero(), 0.7 - 2j, phi, z) == pytest.approx(transfer_apply(z2, phi, z))
    val = perturbed_apply(z2, ob.re_z(), 1j, ob.constant(1.0), P(1))
    assert val == pytest.approx(math.cos(1.0), abs=1e-14)  # (e^{i} + e^{-i}) / 2


def test_overflow_guard(z2):
    with pytest.raises(OverflowGuard):
        perturbed_apply(z2, ob.re_z(), 800.0, ob.constant(1.0), P(1))


def test_perturbation_parameter():
    p = PerturbationParameter(2j)
    assert p.is_imaginary and p.t == 2.0
    assert not PerturbationParameter(1 + 1j).is_imaginary
    with pytest.raises(InvalidParameter):
        PerturbationParameter(complex(math.nan, 0))


def test_iterated_examples(z2):
    h, phi, z = ob.re_z(), affine_id(), P(2)
    nested, direct = iterated_perturbed_apply(z2, h, 0.3 + 0.2j, phi, z, 0)
    assert nested == direct == 2
    nested, direct = iterated_perturbed_apply(z2, h, 0.3 + 0.2j, phi, z, 1)
    one = perturbed_apply(z2, h, 0.3 + 0.2j, phi, z)
    assert nested == pytest.approx(one) and direct == pytest.approx(one)
    nested, direct = iterated_perturbed_apply(z2, h, 0.3 + 0.2j, phi, z, 3)
    assert abs(nested - direct) <= 1e-8


def _tree_oracle(numer, denom, h, theta, phi, z, n):
    """Independent brute force with numpy.roots on affine polynomials."""
    numer = np.asarray(numer, complex)
    denom = np.asarray(denom, complex)
    d = max(len(numer), len(denom)) - 1
    num = np.pad(numer, (0, d + 1 - len(numer)))
    den = np.pad(denom, (0, d + 1 - len(denom)))

    def f(x):
        return np.polyval(num[::-1], x) / np.polyval(den[::-1], x)

    leaves = [z]
    for _ in range(n):
        nxt = []
        for t in leaves:
            nxt.extend(np.roots((num - t * den)[::-1]))
        leaves = nxt
    total = 0
    for w in leaves:
        s, x = 0.0, w
        for _ in range(n):
            s += h(x)
            x = f(x)
        total += cmath.exp(theta * s) * phi(w)
    return total / len(leaves)


def test_semigroup_against_numpy_tree(z2m1):
    nested, direct = iterated_perturbed_apply(z2m1, ob.re_z(), 0.4 - 0.3j, affine_id(), P(0.2 + 0.5j), 4)
    ref = _tree_oracle([-1, 0, 1], [1], lambda x: x.real, 0.4 - 0.3j, lambda x: x, 0.2 + 0.5j, 4)
    assert abs(nested - ref) <= 1e-10 and abs(direct - ref) <= 1e-10


def test_tree_size_cap(z2):
    with pytest.raises(TreeSizeExceeded):
        iterated_perturbed_apply(z2, ob.re_z(), 0.1, ob.constant(1.0), P(2), 7)
    f5 = random_map(np.random.default_rng(1), 5)
    with pytest.raises(TreeSizeExceeded):
        iterated_perturbed_apply(f5, ob.re_z(), 0.1, ob.constant(1.0), P(2), 6)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(MAPS)), st.floats(-0.7, 0.7), st.floats(-0.7, 0.7),
       st.integers(0, 4), st.integers(0, 2 ** 31))
def test_semigroup_identity_property(name, tr, ti, n, seed):
    rng = np.random.default_rng(seed)
    z = P(complex(*rng.normal(size=2)))
    nested, direct = iterated_perturbed_apply(MAPS[name], ob.re_z_bounded(), complex(tr, ti),
                                              ob.smooth_bump(0.3j, 0.8), z, n)
    assert abs(nested - direct) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(MAPS)), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_linearity_positivity_contraction(name, ca, cb, seed):
    f = MAPS[name]
    rng = np.random.default_rng(seed)
    z = P(complex(*rng.normal(size=2)))
    phi, psi = ob.smooth_bump(0.5, 0.6), ob.sphere_coordinate(3)
    lhs = transfer_apply(f, ca * phi + cb * psi, z)
    rhs = ca * transfer_apply(f, phi, z) + cb * transfer_apply(f, psi, z)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert transfer_apply(f, phi, z) >= 0
    fa, fb = f.preimage_arrays(np.array([z.a]), np.array([z.b]))
    assert abs(transfer_apply(f, psi, z)) <= np.abs(psi.values(fa, fb)).max() + 1e-15


@pytest.mark.parametrize("n", [1, 2, 3])
def test_pushforward_identity(n):
    """Lambda^n((h o f^n) phi) = h * Lambda^n phi."""
    f = MAPS["z2-1"]
    h, phi = ob.smooth_bump(-0.5, 0.7), ob.sphere_coordinate(1)

    def compose(obs_, k):
        def func(a, b):
            for _ in range(k):
                a, b = f.evaluate_arrays(a, b)
            return obs_.values(a, b)
        return ob.Observable(func)

    hfn_phi = ob.Observable(lambda a, b: compose(h, n).values(a, b) * phi.values(a, b))
    for z in (P(0.3), P(1 + 1j), P(-2j)):
        lhs, _ = iterated_perturbed_apply(f, ob.zero(), 0.0, hfn_phi, z, n)
        rhs, _ = iterated_perturbed_apply(f, ob.zero(), 0.0, phi, z, n)
        assert abs(lhs - h(z) * rhs) <= 1e-10


def test_birkhoff_examples(z2):
    assert birkhoff_sum(z2, ob.re_z(), P(0.3), 0) == 0
    assert birkhoff_sum(z2, ob.constant(1.0), P(0.3), 7) == 7
    z = P(cmath.exp(1j * math.pi / 3))
    assert birkhoff_sum(z2, ob.re_z(), z, 2) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidParameter):
        birkhoff_sum(z2, ob.re_z(), z, -1)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(sorted(MAPS)), st.integers(0, 8), st.integers(0, 8), st.integers(0, 2 ** 31))
def test_birkhoff_additivity(name, m, n, seed):
    f = MAPS[name]
    h = ob.sphere_coordinate(1)
    rng = np.random.default_rng(seed)
    z = P(complex(*rng.normal(size=2)) * 0.5)
    sm = birkhoff_sum(f, h, z, m)
    fmz = forward_orbit(f, z, m)[-1]
    assert birkhoff_sum(f, h, z, m + n) == birkhoff_sum(f, h, fmz, n, initial=sm)


def _circle_sample(n=400):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False) + 0.1
    return MeasureSample(np.exp(1j * th), np.ones(n, complex), np.full(n, 1.0 / n), "z2", 0, 50)


def test_gordin_examples(z2):
    s = _circle_sample()
    assert gordin_partial_sums(z2, ob.zero(), s, 6) == [0.0] * 7
    assert np.allclose(gordin_partial_sums(z2, ob.constant(2.5), s, 6), 0.0, atol=1e-15)
    th = np.linspace(0, 2 * np.pi, 20, endpoint=False)
    lam = transfer_arrays(z2, ob.re_z(), np.exp(1j * th), np.ones(20, complex))
    assert np.abs(lam).max() <= 1e-10
    sums = gordin_partial_sums(z2, ob.re_z(), s, 12)
    assert sums[0] == pytest.approx(2 / math.pi, rel=1e-2)
    assert max(sums) - sums[0] <= 1e-9
    with pytest.raises(InvalidParameter):
        gordin_partial_sums(z2, ob.re_z(), s, 21)
