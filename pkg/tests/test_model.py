import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erfi

from sepembed import targets
from sepembed.errors import BothSidesInfinite, SupportOutsideState, ValidationError
from sepembed.model import (DiffusionSpec, build_scale, check_scale, expectation, l1_norm,
                            pushforward_target, target_mean_in_scale, to_martingale)

from conftest import constant, zero


def bessel_spec():
    return DiffusionSpec(drift=lambda x: 1.0 / np.asarray(x, dtype=float), volatility=constant(1.0),
                         start=1.0, state_lo=0.0, name="bessel_numeric")


def test_scale_of_constant_drift():
    mu = 0.7
    spec = DiffusionSpec(drift=constant(mu), volatility=constant(1.0), start=0.0)
    sc = build_scale(spec)
    x = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(sc.s(x), -np.expm1(-2 * mu * x) / (2 * mu), rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(sc.hi, 1 / (2 * mu), rtol=1e-9)
    assert sc.lo == -math.inf


def test_scale_of_mean_reverting_linear_drift():
    spec = DiffusionSpec(drift=lambda x: -np.asarray(x, dtype=float), volatility=constant(1.0),
                         start=0.0)
    sc = build_scale(spec)
    x = np.linspace(-2.5, 2.5, 51)
    np.testing.assert_allclose(sc.s(x), math.sqrt(math.pi) / 2 * erfi(x), rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(sc.s_inv(sc.s(x)), x, atol=1e-9)


def test_numeric_bessel_scale_and_eta():
    sc = build_scale(bessel_spec())
    r = np.linspace(0.2, 20, 100)
    np.testing.assert_allclose(sc.s(r), 1 - 1 / r, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(sc.hi, 1.0, atol=1e-9)
    assert sc.lo == -math.inf
    model = to_martingale(bessel_spec(), sc)
    m = np.linspace(-3, 0.9, 40)
    np.testing.assert_allclose(model.eta(m), (1 - m) ** 2, rtol=1e-8)


def test_check_scale_passes_on_numeric_scale(brownian_spec):
    sc = build_scale(brownian_spec)
    check_scale(sc, 0.0, np.linspace(-5, 5, 41))
    np.testing.assert_allclose(sc.s(np.linspace(-5, 5, 41)), np.linspace(-5, 5, 41), atol=1e-12)


def test_spec_invariants():
    with pytest.raises(ValidationError):
        DiffusionSpec(drift=zero, volatility=constant(1.0), start=2.0, state_lo=0.0, state_hi=1.0)
    spec = DiffusionSpec(drift=zero, volatility=lambda x: np.maximum(x, 0.0), start=0.5)
    with pytest.raises(ValidationError):
        spec.validate()


def test_expectation_against_known_moments():
    g = targets.gaussian(0.0, 1.0)
    np.testing.assert_allclose(expectation(g, lambda x: x ** 2), 1.0, rtol=1e-9)
    np.testing.assert_allclose(expectation(g, lambda x: x ** 4), 3.0, rtol=1e-8)
    u = targets.uniform(-1.0, 1.0)
    np.testing.assert_allclose(expectation(u, lambda x: x ** 2), 1 / 3, rtol=1e-10)
    a = targets.atoms([(0.5, 1 / 3), (2.0, 2 / 3)])
    np.testing.assert_allclose(expectation(a, lambda x: x ** 2), 0.25 / 3 + 8 / 3, rtol=1e-14)


def test_expectation_agrees_with_scipy_quad():
    law = targets.student_t(5.0)
    f = lambda x: np.abs(x) ** 1.5
    want = integrate.quad(lambda x: abs(x) ** 1.5 * law.density(np.array(x)), -np.inf, np.inf)[0]
    np.testing.assert_allclose(expectation(law, f), want, rtol=1e-6)


def test_heavy_tails_diverge():
    cauchy = targets.student_t(1.0)
    assert math.isinf(l1_norm(cauchy))
    sc = build_scale(DiffusionSpec(drift=zero, volatility=constant(1.0), start=0.0))
    with pytest.raises(BothSidesInfinite):
        target_mean_in_scale(cauchy, sc)


def test_pushforward_of_atoms_under_drifted_scale():
    spec = DiffusionSpec(drift=constant(1.0), volatility=constant(1.0), start=0.0)
    sc = build_scale(spec)
    half_ln2 = math.log(2) / 2
    rho = targets.atoms([(-half_ln2, 1 / 3), (half_ln2, 2 / 3)])
    nu = pushforward_target(rho, sc)
    locs = [a for a, _ in nu.atoms]
    np.testing.assert_allclose(locs, [-0.5, 0.25], rtol=1e-10)
    np.testing.assert_allclose(target_mean_in_scale(rho, sc), 0.0, atol=1e-10)


def test_pushforward_of_density_integrates_to_one():
    sc = build_scale(bessel_spec())
    nu = pushforward_target(targets.uniform(0.5, 3.0), sc)
    total = integrate.quad(lambda m: nu.density(np.array(m)), 1 - 1 / 0.5, 1 - 1 / 3.0)[0]
    np.testing.assert_allclose(total, 1.0, rtol=1e-8)
    np.testing.assert_allclose(nu.cdf(np.array(0.5)), (2.0 - 0.5) / 2.5, rtol=1e-9)


def test_support_outside_state_is_rejected():
    sc = build_scale(bessel_spec())
    with pytest.raises(SupportOutsideState):
        pushforward_target(targets.atoms([(-1.0, 0.5), (2.0, 0.5)]), sc)
