import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepembed import classifier as C
from sepembed import feller, targets
from sepembed.errors import MissingDensity
from sepembed.model import DiffusionSpec, MartingaleModel, build_scale, to_martingale
from sepembed.presets import get_preset

from conftest import constant, zero


def bm_spec():
    return get_preset("bm").spec


def natural(eta, lo=-math.inf, hi=math.inf):
    return MartingaleModel(eta=eta, start=0.0, lo=lo, hi=hi)


@settings(max_examples=5, deadline=None)
@given(st.floats(0.05, 0.9))
def test_bounded_interval_needs_centred_target(shift):
    spec = DiffusionSpec(drift=zero, volatility=constant(1.0), start=0.0, state_lo=-1.0,
                         state_hi=1.0)
    v = C.classify(spec, targets.atoms([(shift - 0.05, 0.5), (shift + 0.05, 0.5)]))
    assert v.exists == C.NO and v.bounded.kind == "impossible"
    v = C.classify(spec, targets.uniform(-shift, shift))
    assert v.exists == C.YES


def test_one_sided_existence_in_bessel():
    p = get_preset("bessel3")
    low = C.classify(p.spec, targets.atoms([(0.5, 0.5), (2.0, 0.5)]))
    assert low.exists == C.NO
    high = C.classify(p.spec, targets.atoms([(0.5, 0.2), (2.0, 0.8)]))
    assert high.exists == C.YES and high.integrable_possible == C.YES
    # int q dnu + nu* times the slope 2/3 of q toward -inf
    q = lambda x: (1 - x) ** -2 / 3 - 2 * x / 3 - 1 / 3
    want = 0.2 * q(-1.0) + 0.8 * q(0.5) + 0.2 * 2 / 3
    np.testing.assert_allclose(high.predicted_E_tau, want, rtol=1e-6)


def test_bessel_is_strict_local_martingale_with_unreachable_top():
    p = get_preset("bessel3")
    v = C.classify(p.spec, p.targets["two_point"])
    rep = v.details["boundaries"]
    assert not rep.is_true_martingale and not rep.r_reachable
    np.testing.assert_allclose(v.predicted_E_tau, 7 / 12, rtol=1e-12)


def test_heavy_tailed_target_is_not_integrable():
    v = C.classify(bm_spec(), targets.student_t(1.0))
    assert v.exists == C.YES and v.integrable_possible == C.NO
    assert v.predicted_E_tau is None


def test_non_centred_target_in_bm_is_not_integrable():
    v = C.classify(bm_spec(), targets.atoms([(0.5, 0.5), (1.5, 0.5)]))
    assert v.exists == C.YES and v.integrable_possible == C.NO


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0))
def test_symmetric_two_point_in_bm(a):
    v = C.classify(bm_spec(), targets.two_point(a))
    assert v.integrable_possible == C.YES
    np.testing.assert_allclose(v.predicted_E_tau, a * a, rtol=1e-10)
    assert v.bounded.kind == "impossible"
    assert v.reasons[-1] == C.RULE_BOUND_ZERO


def test_mass_on_unreachable_endpoint_is_not_finite():
    model = natural(lambda x: 1.0 + np.asarray(x, dtype=float), lo=-1.0)
    rep = feller.classify_boundaries(model)
    assert not rep.l_reachable
    nu = targets.atoms([(-1.0, 0.5), (1.0, 0.5)])
    assert C.check_finite(model, nu, rep).value == C.NO
    assert C.check_finite(model, targets.uniform(-1, 1), rep).value == C.YES


def test_uniform_in_bm_is_bounded_by_two_over_pi():
    model = to_martingale(bm_spec(), build_scale(bm_spec()))
    bd, rule = C.check_bounded_sufficient(model, None, targets.uniform(-1.0, 1.0))
    assert bd.kind == "bounded_by" and rule == C.RULE_BOUND_CONCAVE
    np.testing.assert_allclose(bd.T, 2 / math.pi, rtol=1e-6)
    assert str(bd).startswith("bounded_by(")
    with pytest.raises(MissingDensity):
        C.check_bounded_sufficient(model, None, targets.two_point(1.0))


def test_gaussian_in_bm_is_bounded_by_one():
    v = C.classify(bm_spec(), targets.gaussian(0.0, 1.0))
    assert v.bounded.kind == "bounded_by"
    np.testing.assert_allclose(v.bounded.T, 1.0, rtol=1e-9)


def test_sandwich_rule_scales_by_eps_to_minus_four():
    # eta = 2 + sin(x) is not concave on [-1, 1] but sits between 1 and 3
    model = natural(lambda x: 2.0 + np.sin(np.asarray(x, dtype=float)))
    nu = targets.uniform(-1.0, 1.0)
    assert not C.is_concave(model.eta_at, -1.0, 1.0)
    bd, rule = C.check_bounded_sufficient(model, None, nu, (constant(math.sqrt(3.0)),
                                                           1 / math.sqrt(3.0)))
    K = C.sup_ratio(nu, model.eta_at)
    assert rule == C.RULE_BOUND_SANDWICH
    np.testing.assert_allclose(bd.T, K * K * 9.0, rtol=1e-12)


def test_general_rule_for_drifted_bm():
    spec = get_preset("bm_drift", gamma=1.0, theta=1.0).spec
    bd, rule = C.check_bounded_general(spec, targets.uniform(-1.0, 1.0))
    assert rule == C.RULE_BOUND_GENERAL
    np.testing.assert_allclose(bd.T, 2 / math.pi, rtol=1e-6)
    bd, _ = C.check_bounded_general(spec, targets.uniform(-1.0, 1.0), T_request=0.5)
    assert bd.kind == "no_bound_found"


def test_necessary_condition():
    eta = C.eta_envelope(natural(constant(1.0)))
    law = targets.two_point(1.0)
    viol = C.check_bounded_necessary(eta, law.cdf, 10.0, C.probe_points(law))
    assert viol and all(v["zero_mass"] for v in viol)
    assert C.check_bounded_necessary(eta, targets.uniform(-1, 1).cdf, 0.01, [0.0, 0.5]) == []


def test_rule_strings_carry_prefixes():
    v = C.classify(bm_spec(), targets.uniform(-1.0, 1.0))
    prefixes = {r.split(":")[0] for r in v.reasons}
    assert {"existence", "finite", "integrable", "bounded"} <= prefixes
