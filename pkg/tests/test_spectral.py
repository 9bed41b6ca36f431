import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perron import observables as ob
from perron.equilibrium import integrate
from perron.errors import (DiscretizationRejected, InsufficientSample, InvalidCurve,
                           InvalidParameter)
from perron.spectral import (build_dictionary, cocycle_scan, decompose, galerkin_matrix,
                             gram_matrix, lambda_curve, lambda_derivatives, sample_fiber,
                             spectral_csv)


@pytest.fixture(scope="module")
def z2_setup(z2, z2_small):
    dic = build_dictionary(z2_small, 6)
    return z2, z2_small, dic, sample_fiber(z2, z2_small)


def _power(k):
    return SimpleNamespace(values=lambda a, b: (a / b) ** k)


def test_dictionary_basics(z2_setup):
    _, s, dic, _ = z2_setup
    assert dic.exponents[0] == (0, 0)
    q = dic.values(s.a, s.b)
    assert np.allclose(q[:, 0], 1.0)
    g = gram_matrix(dic, s)
    assert np.abs(g - np.eye(dic.basis_size)).max() <= 1e-8
    # on the unit circle z^p conj(z)^q = z^(p-q): span is z^k, |k| <= 6
    assert dic.basis_size == 13
    assert "p+q <= 6" in dic.description


def test_dictionary_needs_points(z2_small):
    with pytest.raises(InsufficientSample):
        build_dictionary(z2_small.subsample(100), 3)
    with pytest.raises(InvalidParameter):
        build_dictionary(z2_small, 0)


def test_constant_column_is_unit_vector(z2_setup):
    f, s, dic, fib = z2_setup
    m = galerkin_matrix(f, ob.re_z(), 0.0, dic, s, fib).matrix
    e0 = np.zeros(dic.basis_size)
    e0[0] = 1
    assert np.abs(m[:, 0] - e0).max() <= 1e-12


def test_zero_observable_matches_t0(z2_setup):
    f, s, dic, fib = z2_setup
    a = galerkin_matrix(f, ob.zero(), 1.3, dic, s, fib).matrix
    b = galerkin_matrix(f, ob.re_z(), 0.0, dic, s, fib).matrix
    assert np.abs(a - b).max() <= 1e-12


@pytest.mark.parametrize("k", [-6, -4, -3, -1, 1, 2, 3, 4, 5, 6])
def test_fourier_modes(z2_setup, k):
    """Transfer of z^k on the circle is z^(k/2) for even k and 0 for odd k."""
    f, s, dic, fib = z2_setup
    m = galerkin_matrix(f, ob.zero(), 0.0, dic, s, fib).matrix
    ck = dic.coefficients(s, _power(k))
    target = dic.coefficients(s, _power(k // 2)) if k % 2 == 0 else np.zeros_like(ck)
    assert np.abs(m @ ck - target).max() <= 1e-6


def test_decompose_z2(z2_setup):
    f, s, dic, fib = z2_setup
    dec = decompose(galerkin_matrix(f, ob.re_z(), 0.0, dic, s, fib))
    assert abs(dec.leading - 1) <= 1e-6
    assert dec.gap_ok and dec.subleading_modulus <= 2 ** -0.5 + 0.05
    assert abs(np.vdot(dec.left_vector, dec.leading_vector) - 1) <= 1e-12


def test_decompose_identity():
    dec = decompose(np.eye(4))
    assert abs(dec.leading - 1) <= 1e-12
    assert dec.subleading_modulus == pytest.approx(1.0)
    assert not dec.gap_ok


def test_decompose_diagonal():
    dec = decompose(np.diag([0.9, 0.5, -0.3, 0.1]))
    assert dec.leading == pytest.approx(0.9, abs=1e-9)
    assert dec.subleading_modulus == pytest.approx(0.5, abs=1e-3)
    assert dec.gap_ok


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_decompose_matches_eigvals(seed):
    rng = np.random.default_rng(seed)
    vals = np.concatenate([[1.0], rng.uniform(-0.6, 0.6, 5)])
    p = rng.normal(size=(6, 6)) + 3 * np.eye(6)
    a = p @ np.diag(vals) @ np.linalg.inv(p)
    dec = decompose(a)
    assert abs(dec.leading - 1) <= 1e-8
    assert dec.subleading_modulus == pytest.approx(np.sort(np.abs(vals))[-2], rel=0.02)


def test_conjugate_symmetry(z2_setup):
    f, s, dic, fib = z2_setup
    h = ob.re_z()
    for t in (0.3, 0.5):
        lp = decompose(galerkin_matrix(f, h, t, dic, s, fib)).leading
        lm = decompose(galerkin_matrix(f, h, -t, dic, s, fib)).leading
        assert abs(lm - np.conj(lp)) <= 1e-8
        # weak coupling: |lambda(it)| is close to exp(-t^2 sigma^2 / 2), sigma^2 = 1/2
        assert abs(lp) == pytest.approx(math.exp(-t * t / 4), rel=0.05)


def test_derivatives_synthetic():
    ts = [-0.1, -0.05, 0.0, 0.05, 0.1]
    d1, d2 = lambda_derivatives([(t, math.exp(-t * t / 4)) for t in ts], 0.05)
    assert abs(d1) <= 1e-6 and abs(d2 - 0.5) <= 1e-6
    d1, _ = lambda_derivatives([(t, np.exp(0.3j * t)) for t in ts], 0.05)
    assert d1 == pytest.approx(0.3, abs=1e-9)
    with pytest.raises(InvalidCurve):
        lambda_derivatives([(t, 1.0) for t in ts[1:]], 0.05)


def test_lambda_curve_z2(z2_setup):
    f, s, dic, fib = z2_setup
    curve = lambda_curve(f, ob.re_z(), [-0.1, -0.05, 0.0, 0.05, 0.1], dic, s, fib)
    assert [t for t, _ in curve] == [-0.1, -0.05, 0.0, 0.05, 0.1]
    d1, d2 = lambda_derivatives(curve)
    assert abs(d1) <= 0.02
    assert abs(d2 - 0.5) <= 0.05


def test_lambda_curve_grid_rules(z2_setup):
    f, s, dic, fib = z2_setup
    with pytest.raises(InvalidCurve):
        lambda_curve(f, ob.re_z(), [0.05, 0.1], dic, s, fib)
    with pytest.raises(InvalidCurve):
        lambda_curve(f, ob.re_z(), [-0.05, 0.0, 0.1], dic, s, fib)


def test_cocycle_scan_controls(z2_setup):
    f, s, dic, fib = z2_setup
    rows, below = cocycle_scan(f, ob.zero(), [0.5, 2.0], dic, s, fib)
    assert not below and all(abs(r - 1) <= 1e-9 for _, r in rows)
    c = 1.7
    rows, below = cocycle_scan(f, ob.constant(c), [2 * math.pi / c], dic, s, fib)
    assert not below and abs(rows[0][1] - 1) <= 1e-9
    rows, below = cocycle_scan(f, ob.re_z(), [0.5, 1.0, 2.0], dic, s, fib)
    assert below
    with pytest.raises(InvalidParameter):
        cocycle_scan(f, ob.re_z(), [0.0], dic, s, fib)


def test_projector_pairing_is_integral(z2_setup):
    f, s, dic, fib = z2_setup
    dec = decompose(galerkin_matrix(f, ob.zero(), 0.0, dic, s, fib))
    for phi in ob.smooth_family():
        got = dec.projector_pairing(dic.coefficients(s, phi)) * dec.leading_vector[0]
        want, _ = integrate(s, phi)
        assert abs(got - want) <= 0.05 * abs(want)


def test_refinement_consistency(z2_setup):
    f, s, _, fib = z2_setup
    lams = []
    for deg in (3, 6):
        dic = build_dictionary(s, deg)
        lams.append(decompose(galerkin_matrix(f, ob.re_z(), 0.5, dic, s, fib)).leading)
    assert abs(lams[0] - lams[1]) <= 1e-3


def test_newton_map_accepted(newton, newton_sample):
    dic = build_dictionary(newton_sample, 4)
    m = galerkin_matrix(newton, ob.im_z(), 0.0, dic, newton_sample)
    dec = decompose(m)
    assert m.lsq_residual <= 0.2
    assert abs(dec.leading - 1) <= 1e-6 and dec.gap_ok


def test_basilica_rejected(z2m1, z2m1_sample):
    dic = build_dictionary(z2m1_sample, 6)
    with pytest.raises(DiscretizationRejected):
        galerkin_matrix(z2m1, ob.re_z_bounded(), 0.0, dic, z2m1_sample)
    m = galerkin_matrix(z2m1, ob.re_z_bounded(), 0.0, dic, z2m1_sample, check=False)
    assert m.lsq_residual > 0.2


def test_spectral_csv(z2_setup):
    f, s, dic, fib = z2_setup
    m = galerkin_matrix(f, ob.re_z(), 0.0, dic, s, fib)
    text = spectral_csv([(0.0, decompose(m), m.lsq_residual)])
    head, row = text.strip().split("\n")
    assert head == "t,re,im,subleading,lsq_residual"
    assert float(row.split(",")[1]) == pytest.approx(1.0, abs=1e-6)
