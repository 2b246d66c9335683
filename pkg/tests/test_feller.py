import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sepembed import feller, targets
from sepembed.errors import EndpointFinite, NoEmbeddingExists
from sepembed.model import DiffusionSpec, MartingaleModel, build_scale, to_martingale
from sepembed.presets import get_preset

from conftest import constant, zero


def natural(eta, lo=-math.inf, hi=math.inf):
    return MartingaleModel(eta=eta, start=0.0, lo=lo, hi=hi)


def q_by_quad(eta, n, x):
    return integrate.quad(lambda z: 2.0 * (x - z) / eta(z) ** 2, n, x, limit=200)[0]


@pytest.fixture(scope="module")
def bm_q():
    spec = DiffusionSpec(drift=zero, volatility=constant(1.0), start=0.0)
    return feller.make_q(to_martingale(spec, build_scale(spec)))


@settings(max_examples=40, deadline=None)
@given(st.floats(-30, 30))
def test_q_of_brownian_motion_is_square(bm_q, x):
    np.testing.assert_allclose(bm_q(np.array(x)), x * x, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(bm_q.prime(np.array(x)), 2 * x, rtol=1e-10, atol=1e-12)


def test_q_numeric_against_quadrature(quadratic_vol_spec):
    model = to_martingale(quadratic_vol_spec, build_scale(quadratic_vol_spec))
    q = feller.make_q(model)
    eta = lambda z: 1.0 + z * z
    x = np.array([-4.0, -1.0, -0.1, 0.3, 2.0, 7.0])
    want = [q_by_quad(eta, 0.0, v) for v in x]
    np.testing.assert_allclose(q(x), want, rtol=1e-9)


def test_bessel_q_numeric_matches_closed_form():
    p = get_preset("bessel3")
    numeric = to_martingale(p.spec, build_scale(p.spec, use_closed_form=False))
    qn = feller.make_q(numeric)
    qc = feller.make_q(to_martingale(p.spec, build_scale(p.spec)))
    assert qc.closed_form and not qn.closed_form
    x = np.linspace(-5, 0.95, 100)
    closed = (1 - x) ** -2 / 3 - 2 * x / 3 - 1 / 3
    np.testing.assert_allclose(qn(x), closed, rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(qc(x), closed, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(qc(np.array([0.5, -1.0])), [2 / 3, 5 / 12], rtol=1e-14)


def test_q_outside_state_is_infinite():
    q = feller.make_q(natural(constant(1.0), -1.0, 1.0))
    assert q(np.array(2.0)) == math.inf
    assert q.prime(np.array(-2.0)) == -math.inf
    np.testing.assert_allclose(q(np.array([-1.0, 1.0])), [1.0, 1.0], rtol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_rebase_identity(n, z):
    q_m = feller.make_q(natural(lambda x: np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)))
    q_n, (a, b) = feller.q_rebase(q_m, n)
    np.testing.assert_allclose(q_m(np.array(z)), q_n(np.array(z)) + a + b * (z - n),
                               rtol=1e-9, atol=1e-11)


def test_q_with_kinked_eta():
    eta = lambda x: 1.0 + np.abs(np.asarray(x, dtype=float))
    q = feller.make_q(natural(eta), base=1.0)
    x = np.array([-3.0, -0.5, 0.0, 0.5, 4.0])
    want = [q_by_quad(lambda z: 1.0 + abs(z), 1.0, v) for v in x]
    np.testing.assert_allclose(q(x), want, rtol=1e-6, atol=1e-9)


def test_linear_growth_limits():
    q = feller.make_q(natural(lambda x: 1.0 + np.abs(np.asarray(x, dtype=float))))
    np.testing.assert_allclose(feller.linear_growth_limit(q, +1), 2.0, rtol=1e-6)
    np.testing.assert_allclose(feller.linear_growth_limit(q, -1), 2.0, rtol=1e-6)
    assert feller.linear_growth_limit(feller.make_q(natural(constant(1.0))), 1) == math.inf
    bessel = feller.make_q(to_martingale(get_preset("bessel3").spec,
                                         build_scale(get_preset("bessel3").spec)))
    np.testing.assert_allclose(feller.linear_growth_limit(bessel, -1), 2 / 3, rtol=1e-6)
    with pytest.raises(EndpointFinite):
        feller.linear_growth_limit(bessel, +1)


def test_boundaries_of_bessel_and_interval():
    p = get_preset("bessel3")
    rep = feller.classify_boundaries(to_martingale(p.spec, build_scale(p.spec)))
    assert not rep.r_reachable and not rep.is_true_martingale
    rep = feller.classify_boundaries(natural(constant(1.0), -1.0, 1.0))
    assert rep.l_reachable and rep.r_reachable and rep.is_true_martingale
    rep = feller.classify_boundaries(natural(constant(1.0)))
    assert rep.is_true_martingale


def test_kotani_integrals():
    assert math.isinf(feller.kotani_integral(natural(constant(1.0)), 1))
    # eta = 1 + x^2 gives int |x| / (1 + x^2)^2 = 1/2 on each side
    model = natural(lambda x: 1.0 + np.asarray(x, dtype=float) ** 2)
    np.testing.assert_allclose(feller.kotani_integral(model, 1), 0.5, rtol=1e-6)
    assert not feller.classify_boundaries(model).is_true_martingale


def test_q_integral_vs_target(bm_q):
    np.testing.assert_allclose(feller.q_integral_vs_target(bm_q, targets.uniform(-1, 1)), 1 / 3,
                               rtol=1e-10)
    assert feller.q_integral_vs_target(bm_q, targets.atoms([(0.0, 1.0)])) == 0.0
    assert math.isinf(feller.q_integral_vs_target(bm_q, targets.student_t(2.0)))


def test_composite_mean():
    q = feller.make_q(natural(lambda x: 1.0 + np.abs(np.asarray(x, dtype=float))))
    nu = targets.atoms([(0.5, 0.5), (1.5, 0.5)])
    want = feller.q_integral_vs_target(q, nu) + 1.0 * 2.0
    np.testing.assert_allclose(feller.composite_mean_time(q, nu, 1.0), want, rtol=1e-6)
    bounded = feller.make_q(natural(lambda x: 1.0 + np.abs(np.asarray(x, dtype=float)), hi=3.0))
    with pytest.raises(NoEmbeddingExists):
        feller.composite_mean_time(bounded, targets.atoms([(-0.5, 0.5), (-1.5, 0.5)]), -1.0)


def test_q_table_columns(bm_q):
    tab = feller.q_table(bm_q, [-1.0, 0.0, 2.0])
    np.testing.assert_allclose(tab, [[-1, 1, -2], [0, 0, 0], [2, 4, 4]], atol=1e-12)
