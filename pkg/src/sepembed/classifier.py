"""Decision procedures: does an embedding exist, and can it be finite, integrable, bounded.

Each check returns a :class:`Finding` carrying the verdict and a short rule
citation; :func:`classify` runs the whole pipeline from a diffusion and a
target law.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import feller
from .bass import build_h, build_h_prime
from .errors import BothSidesInfinite, MissingDensity, SEPError
from .model import (DiffusionSpec, MartingaleModel, TargetLaw, build_scale, l1_norm,
                    pushforward_target, target_mean_in_scale, to_martingale)

YES, NO, UNKNOWN = "yes", "no", "unknown"

RULE_EXISTS_BOTH_FINITE = "existence: bounded natural interval requires nu* = m"
RULE_EXISTS_UPPER = "existence: interval bounded above only requires nu* >= m"
RULE_EXISTS_LOWER = "existence: interval bounded below only requires nu* <= m"
RULE_EXISTS_ALL = "existence: unbounded natural interval embeds every law"
RULE_FINITE_MASS = "finite: mass on an unreachable finite endpoint forces tau = inf"
RULE_FINITE_OK = "finite: no mass on unreachable endpoints, delta(1) is finite"
RULE_INT_L1 = "integrable: target not in L1, no integrable embedding"
RULE_INT_CENTRED = "integrable: centred, E[delta(1)] = int q dnu"
RULE_INT_NONCENTRED = "integrable: non-centred, needs int q dnu < inf and finite slope of q"
RULE_BOUND_ZERO = "bounded: zero-mass window violates the small-ball necessary condition"
RULE_BOUND_NECESSARY = "bounded: small-ball necessary condition violated"
RULE_BOUND_CONCAVE = "bounded: eta concave and sup h'/eta(h) <= sqrt(T)"
RULE_BOUND_SANDWICH = "bounded: concave sandwich eps xi <= eta <= xi/eps, bound T eps^-4"
RULE_BOUND_GENERAL = "bounded: -2 beta/alpha + alpha' non-increasing and sup g'/alpha(g) <= sqrt(T)"
RULE_BOUND_PRESET = "bounded: preset Lipschitz rule"
RULE_BOUND_NONCENTRED = "bounded: composite time is unbounded; other bounded embeddings may exist"
RULE_BOUND_NONE = "bounded: no sufficient condition applies (not a proof of unboundedness)"
RULE_MINIMAL = "minimality of delta(1) is a theorem, not checked numerically"


@dataclass(frozen=True)
class Finding:
    value: str
    reason: str
    data: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Bounded:
    """``impossible``, ``no_bound_found`` or ``bounded_by`` with a horizon ``T``."""

    kind: str
    T: Optional[float] = None

    def __str__(self):
        return f"bounded_by({self.T!r})" if self.kind == "bounded_by" else self.kind


@dataclass
class EmbeddabilityVerdict:
    exists: str
    finite_possible: str
    integrable_possible: str
    predicted_E_tau: Optional[float]
    bounded: Bounded
    reasons: List[str]
    details: dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# existence, finiteness, integrability


def check_existence(model: MartingaleModel, nu_star, tol=1e-8) -> str:
    """``"yes"``/``"no"`` from the endpoint trichotomy; ``nu_star`` may be infinite."""
    return existence_finding(model, nu_star, tol).value


def existence_finding(model: MartingaleModel, nu_star, tol=1e-8) -> Finding:
    m = model.start
    lo_fin, hi_fin = math.isfinite(model.lo), math.isfinite(model.hi)
    if lo_fin and hi_fin:
        ok = nu_star is not None and abs(nu_star - m) <= tol * (1 + abs(m))
        return Finding(YES if ok else NO, RULE_EXISTS_BOTH_FINITE)
    if not lo_fin and hi_fin:
        ok = nu_star is not None and nu_star >= m - tol
        return Finding(YES if ok else NO, RULE_EXISTS_UPPER)
    if lo_fin and not hi_fin:
        ok = nu_star is not None and nu_star <= m + tol
        return Finding(YES if ok else NO, RULE_EXISTS_LOWER)
    return Finding(YES, RULE_EXISTS_ALL)


def check_finite(model: MartingaleModel, nu: TargetLaw, boundaries: feller.BoundaryReport) -> Finding:
    """``no`` iff a finite unreachable endpoint carries mass."""
    bad = []
    for end, reach in ((model.lo, boundaries.l_reachable), (model.hi, boundaries.r_reachable)):
        if math.isfinite(end) and not reach and _mass_at(nu, end) > 0:
            bad.append(end)
    if bad:
        return Finding(NO, RULE_FINITE_MASS, {"endpoints": bad})
    return Finding(YES, RULE_FINITE_OK)


def _mass_at(nu, x, tol=1e-12):
    return sum(p for a, p in nu.atoms if abs(a - x) <= tol * (1 + abs(x)))


def check_integrable(model: MartingaleModel, q: feller.QFunction, nu: TargetLaw, nu_star) -> Finding:
    """Integrability verdict with the predicted mean duration in ``data["E_tau"]``."""
    if not math.isfinite(l1_norm(nu)):
        return Finding(NO, RULE_INT_L1)
    centred = abs(nu_star - model.start) <= 1e-8 * (1 + abs(model.start))
    rule = RULE_INT_CENTRED if centred else RULE_INT_NONCENTRED
    integral = feller.q_integral_vs_target(q, nu)
    if not math.isfinite(integral):
        return Finding(NO, rule, {"int_q": integral})
    if centred:
        return Finding(YES, rule, {"int_q": integral, "E_tau": integral})
    direction = -1 if nu_star > model.start else 1
    slope = feller.linear_growth_limit(q, direction)
    data = {"int_q": integral, "slope": slope, "direction": direction}
    if not math.isfinite(slope):
        return Finding(NO, rule, data)
    data["E_tau"] = integral + abs(nu_star - model.start) * slope
    return Finding(YES, rule, data)


# ----------------------------------------------------------------------------
# bounded embeddings

PI2_8 = math.pi ** 2 / 8.0
EPS_GRID = 2.0 ** -np.arange(4, 15)


def eta_envelope(model: MartingaleModel, n=33):
    """Windowed maximum ``eta*(x, eps) = max_{|z - x| <= eps} eta(z)``, vectorised over ``eps``."""
    def eta_star(x, eps):
        eps = np.asarray(eps, dtype=float)
        z = x + eps[..., None] * np.linspace(-1.0, 1.0, n)
        return np.max(model.eta_at(z), axis=-1)
    return eta_star


def check_bounded_necessary(eta_star, F, T, probe, eps_grid=EPS_GRID, margin=0.1):
    """Probe the small-ball condition ``-eps^2 ln(F(x+eps) - F(x-eps)) <= (pi^2/8) T eta*(x)^2``.

    Parameters
    ----------
    eta_star : callable
        ``eta_star(x, eps)``, an upper envelope of ``eta`` near ``x`` for an
        array of window radii ``eps``.
    F : callable
        Target distribution function.
    T : float
        Candidate horizon.
    probe : array_like
        Points ``x``; those with ``F(x)`` in ``{0, 1}`` are skipped.

    Returns
    -------
    list of dict
        One entry per violating point, with ``zero_mass`` set when some window
        carries no mass (a violation for every ``T``).
    """
    out = []
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    for x in np.asarray(probe, dtype=float):
        Fx = float(F(np.array(x)))
        if not 0.0 < Fx < 1.0:
            continue
        mass = np.asarray(F(x + eps_grid), dtype=float) - np.asarray(F(x - eps_grid), dtype=float)
        if np.any(mass <= 0):
            out.append({"x": float(x), "zero_mass": True, "lhs": math.inf})
            continue
        lhs = -eps_grid ** 2 * np.log(mass)
        bound = PI2_8 * T * np.asarray(eta_star(x, eps_grid), dtype=float) ** 2
        tail = slice(-3, None)
        if np.all(lhs[tail] > bound[tail] * (1 + margin)):
            out.append({"x": float(x), "zero_mass": False, "lhs": float(lhs[-1]),
                        "bound": float(bound[-1])})
    return out


def probe_points(nu: TargetLaw, n=49):
    """Quantile probes plus midpoints between atoms (where zero-mass windows live)."""
    u = np.linspace(0.02, 0.98, n)
    pts = list(np.asarray(nu.quantile(u), dtype=float))
    locs = sorted(a for a, _ in nu.atoms)
    pts += [0.5 * (a + b) for a, b in zip(locs[:-1], locs[1:])]
    return np.unique(np.array(pts))


def is_concave(fun, lo, hi, n=401, tol=1e-8):
    """Second differences of ``fun`` on ``[lo, hi]`` are ``>= -tol * scale``."""
    x = np.linspace(lo, hi, n)
    y = np.asarray(fun(x), dtype=float)
    scale = max(float(np.max(np.abs(y))), 1.0)
    d2 = y[:-2] - 2 * y[1:-1] + y[2:]
    return bool(np.all(d2 <= tol * scale))


def _support_hull(nu, model):
    lo = nu.support_lo if math.isfinite(nu.support_lo) else float(nu.quantile(np.array(1e-9)))
    hi = nu.support_hi if math.isfinite(nu.support_hi) else float(nu.quantile(np.array(1 - 1e-9)))
    # stay strictly inside the model interval, where eta is defined
    w = 1e-9 * (1.0 + abs(lo) + abs(hi))
    return max(lo, model.lo + w), min(hi, model.hi - w)


def sup_ratio(nu: TargetLaw, eta, grid=None):
    """``sup_x h'(x) / eta(h(x))`` on a normal-score grid."""
    hp = build_h_prime(nu)
    if hp is None:
        raise MissingDensity("bounded-time sufficient condition needs a target density")
    x = np.linspace(-8.0, 8.0, 4001) if grid is None else np.asarray(grid, dtype=float)
    h = build_h(nu)(x)
    with np.errstate(all="ignore"):
        r = hp(x) / np.asarray(eta(h), dtype=float)
    r = r[np.isfinite(r)]
    return float(np.max(r)) if r.size else math.inf


def check_bounded_sufficient(model: MartingaleModel, maps, nu: TargetLaw, concavity_witness=None):
    """``Bounded("bounded_by", T)`` from the concavity rule, else ``no_bound_found``.

    ``concavity_witness`` is an optional pair ``(xi, eps)`` with ``xi`` concave
    and ``eps xi <= eta <= xi / eps`` on the support.
    """
    if nu.density is None or nu.atoms:
        raise MissingDensity("bounded-time sufficient condition needs a target density")
    lo, hi = _support_hull(nu, model)
    if is_concave(model.eta_at, lo, hi):
        K = sup_ratio(nu, model.eta_at)
        if math.isfinite(K):
            return Bounded("bounded_by", K * K), RULE_BOUND_CONCAVE
    if concavity_witness is not None:
        xi, eps = concavity_witness
        z = np.linspace(lo, hi, 401)
        e, x = model.eta_at(z), np.asarray(xi(z), dtype=float)
        if is_concave(xi, lo, hi) and np.all(eps * x <= e * (1 + 1e-12)) and np.all(e <= x / eps * (1 + 1e-12)):
            K = sup_ratio(nu, model.eta_at)
            if math.isfinite(K):
                return Bounded("bounded_by", K * K / eps ** 4), RULE_BOUND_SANDWICH
    return Bounded("no_bound_found"), RULE_BOUND_NONE


def check_bounded_general(spec: DiffusionSpec, rho: TargetLaw, T_request=None):
    """Rule for general diffusions: monotone ``-2 beta/alpha + alpha'`` and bounded ``g'/alpha(g)``.

    ``alpha'`` comes from ``spec.volatility_prime`` or a central difference.
    Returns ``(Bounded, rule)``; ``T_request`` only changes the verdict when the
    computed horizon exceeds it.
    """
    if rho.density is None or rho.atoms:
        raise MissingDensity("bounded-time rule needs a target density")
    lo = spec.state_lo if math.isfinite(spec.state_lo) else float(rho.quantile(np.array(1e-9)))
    hi = spec.state_hi if math.isfinite(spec.state_hi) else float(rho.quantile(np.array(1 - 1e-9)))
    lo = max(lo, float(rho.quantile(np.array(1e-9))))
    hi = min(hi, float(rho.quantile(np.array(1 - 1e-9))))
    x = np.linspace(lo, hi, 801)
    x = x[(x > spec.state_lo) & (x < spec.state_hi)]
    a = np.asarray(spec.volatility(x), dtype=float) * np.ones_like(x)
    b = np.asarray(spec.drift(x), dtype=float) * np.ones_like(x)
    if spec.volatility_prime is not None:
        da = np.asarray(spec.volatility_prime(x), dtype=float) * np.ones_like(x)
    else:
        e = 1e-6 * (1 + np.abs(x))
        da = (np.asarray(spec.volatility(x + e)) - np.asarray(spec.volatility(x - e))) / (2 * e)
    k = -2.0 * b / a + da
    if np.any(np.diff(k) > 1e-8 * max(1.0, float(np.max(np.abs(k))))):
        return Bounded("no_bound_found"), RULE_BOUND_NONE
    K = sup_ratio(rho, lambda y: np.abs(np.asarray(spec.volatility(y), dtype=float)))
    if not math.isfinite(K):
        return Bounded("no_bound_found"), RULE_BOUND_NONE
    T = K * K
    if T_request is not None and T > T_request:
        return Bounded("no_bound_found"), RULE_BOUND_NONE
    return Bounded("bounded_by", T), RULE_BOUND_GENERAL


# ----------------------------------------------------------------------------
# orchestration


def classify(spec: DiffusionSpec, rho: TargetLaw, options=None) -> EmbeddabilityVerdict:
    """Full pipeline: scale, natural model, boundaries, existence, finite, integrable, bounded.

    ``options`` may hold ``scale`` (prebuilt), ``preset`` (for its Lipschitz
    rule), ``witness`` (concave sandwich) and ``probe`` (necessary-condition points).
    """
    options = dict(options or {})
    reasons = [RULE_MINIMAL]
    details = {}
    scale = options.get("scale") or build_scale(spec)
    model = to_martingale(spec, scale)
    nu = pushforward_target(rho, scale)
    try:
        nu_star = float(target_mean_in_scale(rho, scale))
    except BothSidesInfinite:
        nu_star = None
    details["nu_star"] = nu_star
    boundaries = feller.classify_boundaries(model)
    details["boundaries"] = boundaries

    ex = existence_finding(model, nu_star)
    reasons.append(ex.reason)
    if ex.value == NO:
        return EmbeddabilityVerdict(NO, NO, NO, None, Bounded("impossible"), reasons, details)

    fin = check_finite(model, nu, boundaries)
    reasons.append(fin.reason)
    q = feller.make_q(model)
    if nu_star is None or not math.isfinite(nu_star):
        integ = Finding(NO, RULE_INT_L1)
    else:
        integ = check_integrable(model, q, nu, nu_star)
    if fin.value == NO:
        integ = Finding(NO, integ.reason, integ.data)
    reasons.append(integ.reason)
    details["integrable"] = integ.data
    E_tau = integ.data.get("E_tau") if integ.value == YES else None

    bounded, rule = _bounded(spec, rho, model, nu, nu_star, options, details)
    if bounded.kind == "bounded_by" and integ.value != YES:
        bounded, rule = Bounded("no_bound_found"), RULE_BOUND_NONE
    reasons.append(rule)
    return EmbeddabilityVerdict(ex.value, fin.value, integ.value, E_tau, bounded, reasons, details)


def _bounded(spec, rho, model, nu, nu_star, options, details):
    centred = nu_star is not None and abs(nu_star - model.start) <= 1e-8
    probe = options.get("probe")
    probe = probe_points(nu) if probe is None else probe
    eta_star = eta_envelope(model)
    zero = [v for v in check_bounded_necessary(eta_star, nu.cdf, 1.0, probe) if v["zero_mass"]]
    if zero:
        details["necessary_violations"] = zero
        return Bounded("impossible"), RULE_BOUND_ZERO
    if not centred:
        return Bounded("no_bound_found"), RULE_BOUND_NONCENTRED
    candidates = []
    if nu.density is not None and not nu.atoms:
        try:
            bd, rule = check_bounded_sufficient(model, None, nu, options.get("witness"))
            candidates.append((bd, rule))
        except (SEPError, ValueError):
            pass
        try:
            candidates.append(check_bounded_general(spec, rho))
        except (SEPError, ValueError):
            pass
    preset = options.get("preset")
    if preset is not None and preset.bound is not None and rho.density is not None:
        T = preset.bound(rho)
        if T is not None and math.isfinite(T):
            candidates.append((Bounded("bounded_by", T), RULE_BOUND_PRESET))
    found = [c for c in candidates if c[0].kind == "bounded_by"]
    if not found:
        return Bounded("no_bound_found"), RULE_BOUND_NONE
    best = min(found, key=lambda c: c[0].T)
    violations = check_bounded_necessary(eta_star, nu.cdf, best[0].T, probe)
    if violations:
        # the two conditions disagree: numerics are not trustworthy here
        details["necessary_violations"] = violations
        return Bounded("no_bound_found"), RULE_BOUND_NECESSARY
    return best
