"""Registered diffusions with closed-form scale, volatility and ``q``.

Each preset bundles the original coefficients, exact scale maps, an exact
transition sampler, example targets and the known expected duration and
bounded-time rules. Closed forms are checked against the numerical pipeline
when a preset is loaded.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.special import erf, erfi, erfinv, ndtr

from . import _numerics as nm
from . import targets
from .errors import UnknownPreset, ValidationError
from .model import (ClosedForms, DiffusionSpec, ExactStepper, TargetLaw, build_scale,
                    expectation)

#: Disagreement allowed between the closed forms and the numerical pipeline.
CROSS_TOL = 1e-6


@dataclass(frozen=True)
class Preset:
    """A diffusion with exact natural-scale data.

    ``expected_tau(rho)`` is the mean of the composite embedding time (equal
    to ``int q dnu`` in the centred case). ``bound(rho)`` returns the bounded
    time guaranteed by the preset's Lipschitz rule, or ``None`` when the rule
    does not apply or gives no constant; ``bound_rule`` says which rule.
    """

    name: str
    spec: DiffusionSpec
    params: dict
    targets: dict = field(default_factory=dict, compare=False)
    expected_tau: Optional[Callable[[TargetLaw], float]] = None
    bound: Optional[Callable[[TargetLaw], Optional[float]]] = None
    bound_rule: str = ""

    @property
    def closed(self) -> ClosedForms:
        return self.spec.closed

    def nu_star(self, rho: TargetLaw) -> float:
        """Mean of the target in natural scale, ``int s d rho``."""
        return expectation(rho, self.closed.scale)


def _const(v):
    return lambda x: np.full(np.shape(x), float(v))


def lipschitz_constant(rho: TargetLaw, transform=None, grid=None):
    """``sup (T o g)'`` for ``g = F_rho^{-1} o Phi`` on a normal-score grid.

    The derivative is ``phi / f(g)`` times ``T'(g)``; targets without a density
    give ``inf``. ``transform`` is a pair ``(T, T')`` or ``None`` for identity.
    """
    if rho.density is None or rho.atoms:
        return math.inf
    from .bass import build_h, build_h_prime
    x = np.linspace(-8.0, 8.0, 4001) if grid is None else np.asarray(grid, dtype=float)
    g = build_h(rho)(x)
    dg = build_h_prime(rho)(x)
    if transform is not None:
        dg = dg * transform[1](g)
    return float(np.max(dg))


# ----------------------------------------------------------------------------
# Brownian motion (with drift)


def _bm_stepper(gamma, theta):
    def step(x, dt, z):
        return x + gamma * dt + theta * np.sqrt(dt) * z[:, 0]
    return ExactStepper(step, 1)


def bm(theta=1.0):
    """``X = theta W``: already in natural scale with ``q(x) = x^2 / theta^2``."""
    if not theta > 0:
        raise ValidationError("theta must be positive")
    ident = lambda x: np.asarray(x, dtype=float)
    closed = ClosedForms(scale=ident, scale_inv=ident, scale_prime=_const(1.0),
                         nat_lo=-math.inf, nat_hi=math.inf, identity=True,
                         eta=_const(theta), q=lambda x: np.asarray(x) ** 2 / theta ** 2,
                         q_prime=lambda x: 2 * np.asarray(x) / theta ** 2,
                         stepper=_bm_stepper(0.0, theta))
    spec = DiffusionSpec(drift=_const(0.0), volatility=_const(theta), start=0.0,
                         name="bm", closed=closed, volatility_prime=_const(0.0))
    exp_tau = lambda rho: expectation(rho, lambda x: np.asarray(x) ** 2) / theta ** 2
    bound = lambda rho: lipschitz_constant(rho) ** 2 / theta ** 2
    return Preset(name="bm", spec=spec, params={"theta": theta},
                  targets={"normal": targets.gaussian(0.0, 1.0),
                           "uniform": targets.uniform(-1.0, 1.0),
                           "two_point": targets.two_point(1.0)},
                  expected_tau=exp_tau, bound=bound, bound_rule="lipschitz_quantile")


def bm_drift(gamma=1.0, theta=1.0):
    """``X = gamma t + theta W`` with ``kappa = 2 gamma / theta^2``."""
    if not theta > 0:
        raise ValidationError("theta must be positive")
    kappa = 2.0 * gamma / theta ** 2
    if kappa == 0:
        return bm(theta)

    def s(x):
        return -np.expm1(-kappa * np.asarray(x, dtype=float)) / kappa

    def s_inv(m):
        with np.errstate(all="ignore"):
            return -np.log1p(-kappa * np.asarray(m, dtype=float)) / kappa

    def eta(m):
        return theta * np.abs(1.0 - kappa * np.asarray(m, dtype=float))

    def q(m):
        m = np.asarray(m, dtype=float)
        with np.errstate(all="ignore"):
            return -2.0 / (kappa * theta ** 2) * (np.log1p(-kappa * m) / kappa + m)

    def q_prime(m):
        m = np.asarray(m, dtype=float)
        with np.errstate(all="ignore"):
            return 2.0 * m / (theta ** 2 * (1.0 - kappa * m))

    lo, hi = (-math.inf, 1.0 / kappa) if kappa > 0 else (1.0 / kappa, math.inf)
    closed = ClosedForms(scale=s, scale_inv=s_inv,
                         scale_prime=lambda x: np.exp(-kappa * np.asarray(x, dtype=float)),
                         nat_lo=lo, nat_hi=hi, eta=eta, q=q, q_prime=q_prime,
                         stepper=_bm_stepper(gamma, theta))
    spec = DiffusionSpec(drift=_const(gamma), volatility=_const(theta), start=0.0,
                         name="bm_drift", closed=closed, volatility_prime=_const(0.0))
    c = math.log(2.0) / kappa
    example = targets.atoms([(-c, 1.0 / 3.0), (c, 2.0 / 3.0)], name="two_point")
    exp_tau = lambda rho: expectation(rho, lambda x: np.asarray(x, dtype=float)) / gamma
    bound = lambda rho: lipschitz_constant(rho) ** 2 / theta ** 2
    return Preset(name="bm_drift", spec=spec, params={"gamma": gamma, "theta": theta},
                  targets={"two_point": example}, expected_tau=exp_tau, bound=bound,
                  bound_rule="lipschitz_quantile")


# ----------------------------------------------------------------------------
# Bessel(3)


def _bessel_step(r, dt, z):
    sd = np.sqrt(dt)
    return np.sqrt((r + sd * z[:, 0]) ** 2 + (sd * z[:, 1]) ** 2 + (sd * z[:, 2]) ** 2)


def bessel3():
    """Radial part of 3-d Brownian motion from 1; ``s(r) = 1 - 1/r``, ``eta = (1 - x)^2``."""
    def s(r):
        with np.errstate(all="ignore"):
            return 1.0 - 1.0 / np.asarray(r, dtype=float)

    def s_inv(m):
        with np.errstate(all="ignore"):
            return 1.0 / (1.0 - np.asarray(m, dtype=float))

    def q(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return -2.0 / 3.0 * x + 1.0 / (3.0 * (1.0 - x) ** 2) - 1.0 / 3.0

    def q_prime(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return -2.0 / 3.0 + 2.0 / (3.0 * (1.0 - x) ** 3)

    closed = ClosedForms(scale=s, scale_inv=s_inv,
                         scale_prime=lambda r: 1.0 / np.asarray(r, dtype=float) ** 2,
                         nat_lo=-math.inf, nat_hi=1.0,
                         eta=lambda x: (1.0 - np.asarray(x, dtype=float)) ** 2,
                         q=q, q_prime=q_prime, stepper=ExactStepper(_bessel_step, 3))
    spec = DiffusionSpec(drift=lambda r: 1.0 / np.asarray(r, dtype=float), volatility=_const(1.0),
                         start=1.0, state_lo=0.0, name="bessel3", closed=closed,
                         volatility_prime=_const(0.0))
    example = targets.atoms([(0.5, 1.0 / 3.0), (2.0, 2.0 / 3.0)], name="two_point")
    exp_tau = lambda rho: (expectation(rho, lambda r: np.asarray(r, dtype=float) ** 2) - 1.0) / 3.0
    return Preset(name="bessel3", spec=spec, params={}, targets={"two_point": example},
                  expected_tau=exp_tau, bound=lambda rho: None,
                  bound_rule="log_quantile_lipschitz_no_constant")


# ----------------------------------------------------------------------------
# Ornstein-Uhlenbeck


def _ou_stepper(xi, sigma):
    def step(x, dt, z):
        if xi == 0:
            return x + sigma * np.sqrt(dt) * z[:, 0]
        sd = sigma * np.sqrt(np.expm1(2.0 * xi * dt) / (2.0 * xi))
        return x * np.exp(xi * dt) + sd * z[:, 0]
    return ExactStepper(step, 1)


def ou(xi=1.0, sigma=1.0):
    """``dX = xi X dt + sigma dW`` from 0; ``s(x) = int_0^x exp(-(xi/sigma^2) y^2) dy``.

    ``xi > 0`` repels from 0 and gives a bounded scale; ``xi < 0`` reverts.
    ``q`` has no elementary form and is computed numerically.
    """
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    if xi == 0:
        p = bm(sigma)
        return Preset(name="ou", spec=p.spec, params={"xi": 0.0, "sigma": sigma},
                      targets=p.targets, expected_tau=p.expected_tau, bound=p.bound,
                      bound_rule=p.bound_rule)
    a = math.sqrt(abs(xi)) / sigma
    c = math.sqrt(math.pi) / (2.0 * a)
    if xi > 0:
        s = lambda x: c * erf(a * np.asarray(x, dtype=float))
        s_inv = lambda m: erfinv(np.asarray(m, dtype=float) / c) / a
        s_prime = lambda x: np.exp(-(a * np.asarray(x, dtype=float)) ** 2)
        lo, hi = -c, c
    else:
        s = lambda x: c * erfi(a * np.asarray(x, dtype=float))
        s_prime = lambda x: np.exp((a * np.asarray(x, dtype=float)) ** 2)

        def s_inv(m):
            m = np.asarray(m, dtype=float)
            y = m / c
            # erfi(v) grows like exp(v^2); start from the matching asymptote
            guess = np.sign(y) * np.sqrt(np.log1p(np.abs(y)))
            v = nm.solve_increasing(lambda v: erfi(v), y, guess,
                                    fprime=lambda v: 2.0 / math.sqrt(math.pi) * np.exp(v * v),
                                    max_expand=30.0, xtol=0.0, rtol=1e-15)
            return v / a
        lo, hi = -math.inf, math.inf

    eta = lambda m: sigma * s_prime(s_inv(m))
    closed = ClosedForms(scale=s, scale_inv=s_inv, scale_prime=s_prime, nat_lo=lo, nat_hi=hi,
                         eta=eta, stepper=_ou_stepper(xi, sigma))
    spec = DiffusionSpec(drift=lambda x: xi * np.asarray(x, dtype=float), volatility=_const(sigma),
                         start=0.0, name="ou", closed=closed, volatility_prime=_const(0.0))
    if xi > 0:
        bound = lambda rho: lipschitz_constant(rho) ** 2 / sigma ** 2
        rule = "lipschitz_quantile_mean_repelling"
    else:
        bound = lambda rho: lipschitz_constant(rho, (s, s_prime)) ** 2 / sigma ** 2
        rule = "lipschitz_scaled_quantile_mean_reverting"
    return Preset(name="ou", spec=spec, params={"xi": xi, "sigma": sigma},
                  targets={"normal": targets.gaussian(0.0, 0.5)}, bound=bound, bound_rule=rule)


# ----------------------------------------------------------------------------
# reciprocal Bessel(3): a strict local martingale


def reciprocal_bessel_law(t=1.0):
    """Law of ``1/R_t`` for a Bessel(3) process ``R`` started at 1."""
    sq = math.sqrt(t)

    def r_cdf(r):
        r = np.asarray(r, dtype=float)
        a, b = (r - 1.0) / sq, (r + 1.0) / sq
        pdf = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        return np.where(r > 0, ndtr(a) + ndtr(b) - 1.0 - sq * (pdf(a) - pdf(b)), 0.0)

    def r_density(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            val = r / math.sqrt(2 * math.pi * t) * (np.exp(-(r - 1) ** 2 / (2 * t))
                                                    - np.exp(-(r + 1) ** 2 / (2 * t)))
        return np.where(r > 0, val, 0.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.where(x > 0, 1.0 - r_cdf(1.0 / np.where(x > 0, x, 1.0)), 0.0)

    def density(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            xx = np.where(x > 0, x, 1.0)
            return np.where(x > 0, r_density(1.0 / xx) / xx ** 2, 0.0)

    law = targets.from_cdf(cdf, 0.0, math.inf, density=density, name="reciprocal_bessel")
    from dataclasses import replace
    return replace(law, l1_moment=float(expectation(law, lambda x: np.asarray(x, dtype=float))))


def reciprocal_bessel3():
    """``dM = M^2 dW`` on ``(0, inf)`` from 1, i.e. ``1/R`` for a Bessel(3) process ``R``.

    The natural coordinate is ``x - 1`` so that the start sits at 0.
    """
    def step(x, dt, z):
        return 1.0 / _bessel_step(1.0 / x, dt, z)

    def q(m):
        x = 1.0 + np.asarray(m, dtype=float)
        with np.errstate(all="ignore"):
            return 2.0 / 3.0 * x + 1.0 / (3.0 * x ** 2) - 1.0

    def q_prime(m):
        x = 1.0 + np.asarray(m, dtype=float)
        with np.errstate(all="ignore"):
            return 2.0 / 3.0 - 2.0 / (3.0 * x ** 3)

    closed = ClosedForms(scale=lambda x: np.asarray(x, dtype=float) - 1.0,
                         scale_inv=lambda m: np.asarray(m, dtype=float) + 1.0,
                         scale_prime=_const(1.0), nat_lo=-1.0, nat_hi=math.inf,
                         eta=lambda m: (1.0 + np.asarray(m, dtype=float)) ** 2, q=q,
                         q_prime=q_prime, stepper=ExactStepper(step, 3))
    spec = DiffusionSpec(drift=_const(0.0), volatility=lambda x: np.asarray(x, dtype=float) ** 2,
                         start=1.0, state_lo=0.0, name="reciprocal_bessel3", closed=closed,
                         volatility_prime=lambda x: 2.0 * np.asarray(x, dtype=float))

    def exp_tau(rho):
        return (expectation(rho, lambda x: np.asarray(x, dtype=float) ** -2.0) - 1.0) / 3.0

    return Preset(name="reciprocal_bessel3", spec=spec, params={},
                  targets={"time_one": reciprocal_bessel_law(1.0)}, expected_tau=exp_tau,
                  bound=lambda rho: None, bound_rule="none")


# ----------------------------------------------------------------------------
# registry

_FACTORIES = {
    "bm": bm,
    "bm_drift": bm_drift,
    "bessel3": bessel3,
    "ou": ou,
    "reciprocal_bessel3": reciprocal_bessel3,
}


def preset_registry():
    """Names of the registered presets mapped to their factories."""
    return dict(_FACTORIES)


def cross_validate(preset: Preset, tol=CROSS_TOL, n=101):
    """Compare the closed-form scale and ``eta`` with the numerical pipeline.

    Returns the largest relative disagreement; raises ``ValidationError`` above ``tol``.
    """
    from .model import to_martingale
    spec = preset.spec
    numeric = build_scale(spec, use_closed_form=False)
    x0 = spec.start
    lo = x0 - 3.0 if math.isinf(spec.state_lo) else spec.state_lo + 0.05 * (x0 - spec.state_lo)
    hi = x0 + 3.0 if math.isinf(spec.state_hi) else spec.state_hi - 0.05 * (spec.state_hi - x0)
    x = np.linspace(lo, hi, n)
    s_num, s_cf = numeric.s(x), spec.closed.scale(x)
    err = np.max(np.abs(s_num - s_cf) / np.maximum(np.abs(s_cf), 1.0))
    m = s_cf[1:-1]
    eta_num = to_martingale(spec, numeric).eta(m)
    eta_cf = spec.closed.eta(m)
    err = max(err, float(np.max(np.abs(eta_num - eta_cf) / np.abs(eta_cf))))
    if err > tol:
        raise ValidationError(f"preset {preset.name}: closed forms disagree with numerics ({err:.3g})")
    return float(err)


@lru_cache(maxsize=None)
def _load(name, items):
    preset = _FACTORIES[name](**dict(items))
    cross_validate(preset)
    return preset


def get_preset(name, **params) -> Preset:
    """Look up and build a preset, validating its closed forms once per parameter set."""
    if name not in _FACTORIES:
        raise UnknownPreset(f"unknown preset {name!r}; known: {', '.join(sorted(_FACTORIES))}")
    try:
        return _load(name, tuple(sorted((k, float(v)) for k, v in params.items())))
    except TypeError as exc:
        raise ValidationError(f"bad parameters for preset {name!r}: {exc}") from None
