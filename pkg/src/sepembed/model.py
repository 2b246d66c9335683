"""Diffusions, target laws and the reduction to natural scale.

A general diffusion ``dX = beta(X) dt + alpha(X) dW`` is mapped through its
scale function ``s`` to a driftless local martingale ``dM = eta(M) dW`` with
``eta = (s' alpha) o s^{-1}`` and ``M_0 = s(x_0) = 0``. Target laws are pushed
forward through the same map.

Extended reals are plain floats; ``+-inf`` stand for infinite endpoints.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from . import _numerics as nm
from .errors import (BothSidesInfinite, NonMonotone, QuadratureDivergence,
                     SupportOutsideState, ValidationError)

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ClosedForms:
    """Exact expressions attached to a registered preset.

    ``scale``/``scale_inv``/``scale_prime`` act on the original coordinate;
    ``eta``, ``q`` and ``q_prime`` act on natural scale with ``q`` based at 0.
    ``stepper`` advances the original process exactly over a step ``dt``.
    """

    scale: Func
    scale_inv: Func
    scale_prime: Func
    nat_lo: float
    nat_hi: float
    identity: bool = False
    eta: Optional[Func] = None
    q: Optional[Func] = None
    q_prime: Optional[Func] = None
    stepper: Optional["ExactStepper"] = None


@dataclass(frozen=True)
class ExactStepper:
    """Exact transition sampler for the original process.

    ``step(x, dt, z)`` maps current states and standard normals of shape
    ``(n, n_normals)`` to the states after ``dt``.
    """

    step: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    n_normals: int = 1


@dataclass(frozen=True)
class DiffusionSpec:
    drift: Func
    volatility: Func
    start: float
    state_lo: float = -math.inf
    state_hi: float = math.inf
    name: str = ""
    closed: Optional[ClosedForms] = None
    # derivative of the volatility, used by the bounded-time test for general diffusions
    volatility_prime: Optional[Func] = None

    def __post_init__(self):
        if not (self.state_lo < self.start < self.state_hi):
            raise ValidationError(
                f"start {self.start} must lie strictly inside ({self.state_lo}, {self.state_hi})")

    def validate(self, n=257):
        """Check the coefficient invariants on a sample grid of the state interval."""
        x = _interior_grid(self.state_lo, self.state_hi, self.start, n)
        a = np.asarray(self.volatility(x), dtype=float) * np.ones_like(x)
        if np.any(a == 0) or not np.all(np.isfinite(a)):
            raise ValidationError("volatility vanishes or is non-finite inside the state interval")
        b = np.asarray(self.drift(x), dtype=float) * np.ones_like(x)
        if not np.all(np.isfinite((1 + np.abs(b)) / a ** 2)):
            raise ValidationError("(1 + |drift|) / volatility^2 is not finite on the sample grid")


@dataclass(frozen=True)
class TargetLaw:
    """A probability law on the line given by its CDF/quantile pair.

    ``atoms`` lists point masses ``(location, mass)``; they are integrated
    exactly. ``isf`` (inverse survival function) is optional and only used to
    resolve upper tails beyond double precision in ``u``.
    """

    cdf: Func
    quantile: Func
    support_lo: float
    support_hi: float
    density: Optional[Func] = None
    atoms: Tuple[Tuple[float, float], ...] = ()
    l1_moment: Optional[float] = None
    isf: Optional[Func] = None
    name: str = ""
    # parameters of the shipped family, used by closed-form smoothers
    family: str = "generic"
    params: dict = field(default_factory=dict, compare=False)

    @property
    def is_atomic(self):
        return bool(self.atoms) and abs(sum(p for _, p in self.atoms) - 1.0) < 1e-12

    @property
    def is_dirac(self):
        return self.is_atomic and len(self.atoms) == 1

    def mass_at(self, x):
        return float(sum(p for a, p in self.atoms if a == x))

    def validate(self, n=201, tol=1e-9):
        """Check monotonicity and generalized-inverse consistency on a grid."""
        if self.is_dirac:
            raise ValidationError("target is a Dirac mass")
        u = np.linspace(0.0, 1.0, n + 2)[1:-1]
        x = np.asarray(self.quantile(u), dtype=float)
        if np.any(np.diff(x) < -tol):
            raise ValidationError("quantile function is not monotone")
        F = np.asarray(self.cdf(x), dtype=float)
        if np.any(F < u - tol):
            raise ValidationError("cdf(quantile(u)) < u")
        below = np.asarray(self.cdf(x - 1e-6 * (1 + np.abs(x))), dtype=float)
        if np.any(below > u + tol):
            raise ValidationError("cdf exceeds u left of quantile(u)")
        grid = np.sort(x)
        if np.any(np.diff(np.asarray(self.cdf(grid), dtype=float)) < -tol):
            raise ValidationError("cdf is not monotone")


@dataclass(frozen=True)
class ScaleMap:
    s: Func
    s_inv: Func
    s_prime: Func
    lo: float  # s(l_X+)
    hi: float  # s(r_X-)
    x_lo: float
    x_hi: float
    closed_form: bool = False
    # s(x) = x exactly; targets then pass through unchanged
    identity: bool = False
    knots: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    inner: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class MartingaleModel:
    """Driftless diffusion ``dM = eta(M) dW`` on ``(lo, hi)`` started at ``start``.

    ``q``/``q_prime`` are optional closed forms of the Feller function based at
    ``q_base``. ``scale`` links back to the original coordinate when the model
    came from a general diffusion.
    """

    eta: Func
    start: float
    lo: float = -math.inf
    hi: float = math.inf
    q: Optional[Func] = None
    q_prime: Optional[Func] = None
    q_base: float = 0.0
    scale: Optional[ScaleMap] = None
    stepper: Optional[ExactStepper] = None
    name: str = ""

    def __post_init__(self):
        if not (self.lo < self.start < self.hi):
            raise ValidationError(
                f"start {self.start} must lie strictly inside ({self.lo}, {self.hi})")

    def eta_at(self, x):
        """Volatility with the convention ``eta = 0`` outside ``(lo, hi)``."""
        x = np.asarray(x, dtype=float)
        inside = (x > self.lo) & (x < self.hi)
        with np.errstate(all="ignore"):
            val = np.abs(np.asarray(self.eta(np.where(inside, x, self.start)), dtype=float))
        return np.where(inside, val * np.ones_like(x), 0.0)

    def restart(self, start):
        return replace(self, start=float(start))

    def to_original(self, m):
        if self.scale is None:
            return np.asarray(m, dtype=float)
        return self.scale.s_inv(m)


# ----------------------------------------------------------------------------
# scale function


def _interior_grid(lo, hi, x0, n):
    left = x0 - (10.0 if math.isinf(lo) else 0.999 * (x0 - lo))
    right = x0 + (10.0 if math.isinf(hi) else 0.999 * (hi - x0))
    return np.linspace(left, right, n)


def _side_knots(x0, end, n):
    """Knots from x0 toward ``end``, log-clustered toward a finite end."""
    if math.isinf(end):
        sign = 1.0 if end > 0 else -1.0
        unit = 1.0 + abs(x0)
        offs = np.geomspace(1e-4 * unit, 1e12 * unit, n)
        return x0 + sign * offs
    width = end - x0
    g = np.geomspace(1.0, 1e-14, n)[1:]  # distance to the end, as a fraction
    return end - width * g


def _scale_from_closed(spec):
    c = spec.closed
    return ScaleMap(s=c.scale, s_inv=c.scale_inv, s_prime=c.scale_prime,
                    lo=c.nat_lo, hi=c.nat_hi, x_lo=spec.state_lo, x_hi=spec.state_hi,
                    closed_form=True, identity=c.identity)


def build_scale(spec: DiffusionSpec, n_side=2048, use_closed_form=True) -> ScaleMap:
    """Scale function ``s(x) = int_{x0}^x exp(-int_{x0}^y 2 beta/alpha^2) dy``.

    The inner antiderivative is cached at ``n_side`` knots per side of ``x0``
    and refined with nested Gauss-Legendre panels between knots. The closed
    form is returned instead when the DiffusionSpec carries one.
    """
    if use_closed_form and spec.closed is not None:
        return _scale_from_closed(spec)
    x0 = float(spec.start)

    def weight(z):
        z = np.asarray(z, dtype=float)
        return 2.0 * np.asarray(spec.drift(z)) / np.asarray(spec.volatility(z)) ** 2 * np.ones_like(z)

    left = _side_knots(x0, spec.state_lo, n_side)[::-1]
    right = _side_knots(x0, spec.state_hi, n_side)
    knots = np.concatenate([left, [x0], right])
    i0 = left.size
    with np.errstate(all="ignore"):
        cell_inner = nm.gauss_legendre(weight, knots[:-1], knots[1:])
    if not np.all(np.isfinite(cell_inner)):
        raise QuadratureDivergence("inner scale integral diverges on a compact subinterval")
    inner = nm.cumulate_from(cell_inner, i0)

    def locate(x):
        k = np.searchsorted(knots, x, side="right") - 1
        return np.clip(k, 0, knots.size - 1)

    def s_prime(x):
        x = np.asarray(x, dtype=float)
        k = locate(x)
        with np.errstate(all="ignore"):
            return np.exp(-(inner[k] + nm.gauss_legendre(weight, knots[k], x)))

    with np.errstate(all="ignore"):
        cell_s = nm.gauss_legendre(s_prime, knots[:-1], knots[1:])
        S = nm.cumulate_from(cell_s, i0)
    finite = np.isfinite(S)
    # flat stretches are floating-point saturation of s far out, not a failure
    if np.any(np.diff(S[finite]) < 0):
        raise NonMonotone("numerical scale function is not strictly increasing")

    def s(x):
        x = np.asarray(x, dtype=float)
        k = locate(x)
        with np.errstate(all="ignore"):
            return S[k] + nm.gauss_legendre(s_prime, knots[k], x)

    def s_inv(m):
        m = np.asarray(m, dtype=float)
        inside = (m > np.nanmin(S[finite])) & (m < np.nanmax(S[finite]))
        mm = np.where(inside, m, 0.0)
        k = np.clip(np.searchsorted(S, mm, side="right") - 1, 0, knots.size - 2)
        out = nm.solve_increasing(s, mm, 0.5 * (knots[k] + knots[k + 1]), fprime=s_prime,
                                  lo=knots[k], hi=knots[k + 1], xtol=0, rtol=1e-12)
        return np.where(inside, out, np.where(m <= np.nanmin(S[finite]), spec.state_lo, spec.state_hi))

    lo = _scale_endpoint(s, x0, spec.state_lo, knots[0])
    hi = _scale_endpoint(s, x0, spec.state_hi, knots[-1])
    return ScaleMap(s=s, s_inv=s_inv, s_prime=s_prime, lo=lo, hi=hi,
                    x_lo=spec.state_lo, x_hi=spec.state_hi, knots=knots, inner=inner)


def _scale_endpoint(s, x0, end, last_knot):
    if math.isinf(end):
        sign = 1.0 if end > 0 else -1.0
        pts = x0 + sign * (1.0 + abs(x0)) * 2.0 ** np.arange(0, 40)
    else:
        pts = end - (end - x0) * 2.0 ** -np.arange(1, 46)
    with np.errstate(all="ignore"):
        vals = np.asarray(s(pts), dtype=float)
    return nm.endpoint_limit(vals)


def to_martingale(spec: DiffusionSpec, scale: ScaleMap) -> MartingaleModel:
    """Driftless natural-scale model with ``eta = (s' alpha) o s^{-1}`` and ``m = 0``."""
    closed = spec.closed if scale.closed_form else None
    if closed is not None and closed.eta is not None:
        eta = closed.eta
        q, q_prime = closed.q, closed.q_prime
    else:
        def eta(m):
            x = scale.s_inv(m)
            return np.abs(scale.s_prime(x) * spec.volatility(x))
        q = q_prime = None
    return MartingaleModel(eta=eta, start=0.0, lo=scale.lo, hi=scale.hi, q=q,
                           q_prime=q_prime, q_base=0.0, scale=scale,
                           stepper=closed.stepper if closed is not None else None,
                           name=spec.name)


def pushforward_target(rho: TargetLaw, scale: ScaleMap) -> TargetLaw:
    """Law of ``s(Y)`` for ``Y ~ rho``."""
    tol = 1e-12
    if rho.support_lo < scale.x_lo - tol or rho.support_hi > scale.x_hi + tol:
        raise SupportOutsideState(
            f"target support [{rho.support_lo}, {rho.support_hi}] is not inside "
            f"the state interval [{scale.x_lo}, {scale.x_hi}]")
    if scale.identity:
        return rho

    def s_ext(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = scale.s(np.clip(x, scale.x_lo, scale.x_hi))
        out = np.where(x <= scale.x_lo, scale.lo, out)
        return np.where(x >= scale.x_hi, scale.hi, out)

    def cdf(m):
        m = np.asarray(m, dtype=float)
        inside = (m > scale.lo) & (m < scale.hi)
        x = scale.s_inv(np.where(inside, m, 0.0))
        out = np.asarray(rho.cdf(x), dtype=float)
        return np.where(inside, out, np.where(m <= scale.lo, rho.cdf(scale.x_lo) if
                                              np.isfinite(scale.x_lo) else 0.0, 1.0))

    def quantile(u):
        return s_ext(rho.quantile(u))

    density = None
    if rho.density is not None:
        def density(m):
            m = np.asarray(m, dtype=float)
            inside = (m > scale.lo) & (m < scale.hi)
            x = scale.s_inv(np.where(inside, m, 0.0))
            with np.errstate(all="ignore"):
                val = rho.density(x) / scale.s_prime(x)
            return np.where(inside, val, 0.0)

    isf = None
    if rho.isf is not None:
        def isf(p):
            return s_ext(rho.isf(p))

    atoms = tuple((float(s_ext(a)), p) for a, p in rho.atoms)
    return TargetLaw(cdf=cdf, quantile=quantile, support_lo=float(s_ext(rho.support_lo)),
                     support_hi=float(s_ext(rho.support_hi)), density=density, atoms=atoms,
                     isf=isf, name=f"s#{rho.name}" if rho.name else "",
                     family="atoms" if rho.is_atomic else "generic",
                     params={"atoms": atoms} if rho.is_atomic else {})


# ----------------------------------------------------------------------------
# expectations against a target


def _atom_intervals(nu):
    """u-intervals occupied by atoms, as (u_lo, u_hi, location)."""
    out = []
    for a, p in sorted(nu.atoms):
        hi = float(nu.cdf(a))
        out.append((hi - p, hi, a))
    return out


def _continuous_intervals(nu):
    if nu.is_atomic:
        return []
    cuts = [(0.0, 0.0)]
    for lo, hi, _ in _atom_intervals(nu):
        cuts.append((lo, hi))
    cuts.append((1.0, 1.0))
    out = []
    for (_, a), (b, _) in zip(cuts[:-1], cuts[1:]):
        if b - a > 1e-14:
            out.append((a, b))
    return out


def _eval_scalar(fun, x):
    with np.errstate(all="ignore"):
        return float(np.asarray(fun(np.asarray(x, dtype=float))))


def _tail_pieces(g, p0, p_min):
    """Integrate ``g(p)`` over ``(0, p0]`` in two-decade pieces in log space."""
    pieces = []
    hi = p0
    while hi > p_min:
        lo = max(hi * 1e-2, p_min)
        val = integrate.quad(lambda v: g(math.exp(v)) * math.exp(v), math.log(lo), math.log(hi),
                             limit=100)[0]
        pieces.append(val)
        total, diverged = nm.series_limit(np.abs(pieces))
        if diverged:
            return pieces, True
        if len(pieces) >= 3 and abs(pieces[-1]) <= 1e-16 * max(abs(total), 1e-300) \
                and abs(pieces[-2]) <= 1e-13 * max(abs(total), 1e-300):
            return pieces, False
        hi = lo
    return pieces, nm.series_limit(np.abs(pieces))[1]


def _continuous_part(nu, fun, a, b):
    """int_a^b fun(F^{-1}(u)) du with tail resolution at u = 0 and u = 1.

    Returns ``(value_lower_tail, value_mid, value_upper_tail)`` where diverged
    tails are reported as signed infinities.
    """
    g_lo = lambda u: _eval_scalar(fun, nu.quantile(u))
    ca = a if a > 0 else min(1e-2, 0.5 * b)
    cb = b if b < 1 else max(1 - 1e-2, 0.5 * (ca + 1))
    mid = integrate.quad(g_lo, ca, cb, limit=200)[0]
    lower = upper = 0.0
    if a == 0:
        pieces, div = _tail_pieces(g_lo, ca, 1e-300)
        lower = math.copysign(math.inf, sum(pieces) or -1.0) if div else float(sum(pieces))
    if b == 1:
        if nu.isf is not None:
            g_hi = lambda p: _eval_scalar(fun, nu.isf(p))
            pmin = 1e-300
        else:
            g_hi = lambda p: _eval_scalar(fun, nu.quantile(1.0 - p))
            pmin = 2e-16
        pieces, div = _tail_pieces(g_hi, 1.0 - cb, pmin)
        upper = math.copysign(math.inf, sum(pieces) or 1.0) if div else float(sum(pieces))
    return lower, mid, upper


def expectation_parts(nu: TargetLaw, fun: Func) -> Tuple[float, float]:
    """``(int fun^- dnu, int fun^+ dnu)`` split at the median region.

    The first entry collects atoms and lower-tail mass where ``fun`` is
    negative; divergence is reported per side as an infinity.
    """
    neg = pos = 0.0
    for a, p in nu.atoms:
        v = _eval_scalar(fun, a) * p
        if v < 0:
            neg += v
        else:
            pos += v
    for a, b in _continuous_intervals(nu):
        lower, mid, upper = _continuous_part(nu, fun, a, b)
        for v in (lower, mid, upper):
            if v < 0:
                neg += v
            else:
                pos += v
    return neg, pos


def expectation(nu: TargetLaw, fun: Func) -> float:
    """``int fun dnu``; ``+-inf`` when one side diverges.

    Raises :class:`BothSidesInfinite` when both signs diverge.
    """
    neg, pos = expectation_parts(nu, fun)
    if math.isinf(neg) and math.isinf(pos):
        raise BothSidesInfinite("both one-sided integrals diverge")
    return neg + pos


def target_mean_in_scale(rho: TargetLaw, scale: ScaleMap) -> float:
    """Mean of the pushed-forward target, ``int s(x) rho(dx)``."""
    return expectation(rho, lambda x: _s_clipped(scale, x))


def _s_clipped(scale, x):
    x = np.asarray(x, dtype=float)
    out = scale.s(np.clip(x, scale.x_lo, scale.x_hi))
    out = np.where(x <= scale.x_lo, scale.lo, out)
    return np.where(x >= scale.x_hi, scale.hi, out)


def l1_norm(nu: TargetLaw) -> float:
    """``int |x| nu(dx)``, possibly ``inf``."""
    if nu.l1_moment is not None:
        return nu.l1_moment
    return expectation(nu, np.abs)


def first_moment(nu: TargetLaw) -> float:
    return expectation(nu, lambda x: np.asarray(x, dtype=float))


def check_scale(scale: ScaleMap, x0: float, grid: Sequence[float], tol=1e-6):
    """Assert the scale invariants (normalisation, monotonicity, round trip)."""
    grid = np.asarray(grid, dtype=float)
    if abs(float(scale.s(np.array(x0)))) > tol:
        raise ValidationError("s(x0) != 0")
    vals = scale.s(grid)
    if np.any(np.diff(vals) <= 0):
        raise NonMonotone("s not strictly increasing on the grid")
    back = scale.s_inv(vals)
    if np.max(np.abs(back - grid)) > tol * (1 + np.max(np.abs(grid))):
        raise ValidationError("s_inv(s(x)) round trip failed")
