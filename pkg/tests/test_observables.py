import math

import numpy as np
import pytest

from perron import observables as ob
from perron.equilibrium import integrate
from perron.errors import EvaluationError
from perron.sphere import SpherePoint, fubini_quadrature, sobolev_norms


def test_values_and_call():
    p = SpherePoint.from_affine(2 - 1j)
    assert ob.re_z()(p) == 2.0
    assert ob.im_z()(p) == -1.0
    assert ob.constant(3.0)(p) == 3.0
    assert ob.re_rational([0, 1], [1])(p) == 2.0


def test_re_rational_through_infinity():
    phi = ob.re_rational([1, 0, 2], [1, 1, 1])  # (2z^2+1)/(z^2+z+1) -> 2 at infinity
    assert phi(SpherePoint.infinity()) == pytest.approx(2.0)
    z = 0.3 + 0.4j
    assert phi(SpherePoint.from_affine(z)) == pytest.approx(((2 * z * z + 1) / (z * z + z + 1)).real)


def test_evaluation_error_index():
    a = np.array([0.5, 1, 0.2], dtype=complex)
    b = np.array([1, 0, 1], dtype=complex)
    with pytest.raises(EvaluationError) as err:
        ob.re_z().values(a, b)
    assert err.value.index == 1


def test_sphere_coordinates_on_unit_sphere():
    q = fubini_quadrature(200)
    x = [ob.sphere_coordinate(k).values(q.a, q.b) for k in (1, 2, 3)]
    assert np.allclose(x[0] ** 2 + x[1] ** 2 + x[2] ** 2, 1.0)


def test_bump_peak_and_decay():
    phi = ob.smooth_bump(1j, 0.5)
    assert phi(SpherePoint.from_affine(1j)) == pytest.approx(1.0)
    assert phi(SpherePoint.from_affine(-1j)) == pytest.approx(math.exp(-4.0))
    inf_bump = ob.smooth_bump(math.inf, 0.5)
    assert inf_bump(SpherePoint.infinity()) == pytest.approx(1.0)


def test_arithmetic():
    p = SpherePoint.from_affine(0.5 + 0.5j)
    x, y = ob.re_z(), ob.im_z()
    assert (x + y)(p) == 1.0
    assert (x - y)(p) == 0.0
    assert (3 * x)(p) == 1.5
    assert (-x)(p) == -0.5
    assert x.shifted(2.0)(p) == 2.5


def test_coboundary_telescopes(z2):
    psi = ob.re_z_bounded()
    h = ob.coboundary_of(psi, z2)
    z = SpherePoint.from_affine(0.3 + 0.7j)
    s, w = 0.0, z
    for _ in range(5):
        s += h(w)
        w = z2(w)
    assert s == pytest.approx(psi(w) - psi(z), abs=1e-12)


def test_norm_equivalence_bounded(z2_small):
    """(|mu(phi)| + ||d phi||) / (||phi|| + ||d phi||) stays in a fixed band [1/c, c]."""
    q = fubini_quadrature(4000)
    ratios = []
    for phi in ob.smooth_family():
        m, _ = integrate(z2_small, phi)
        l2, g = sobolev_norms(phi, q)
        ratios.append((abs(m) + g) / (l2 + g))
    c = 50.0
    assert all(1 / c <= r <= c for r in ratios), ratios
    # frozen regression band from the first calibration run
    assert 0.5 <= min(ratios) and max(ratios) <= 2.0, ratios
