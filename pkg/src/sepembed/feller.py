"""The Feller function ``q_n(x) = int_n^x int_n^y 2 / eta(z)^2 dz dy`` and boundary tests.

``q`` is convex with ``q'' = 2 / eta^2``; ``int q dnu`` is the expected
duration of integrable minimal embeddings, ``q(l+) = inf`` decides whether
``l`` is reached, and Kotani's integrals decide whether the local martingale
is a true martingale.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _numerics as nm
from .errors import EndpointFinite, NoEmbeddingExists, OutsideNaturalState
from .model import MartingaleModel, TargetLaw, expectation


def _knots(base, lo, hi, n_side, n_near=256):
    """Knots geometric toward the endpoints plus a uniform layer near ``base``.

    The uniform layer keeps panels short where ``eta`` may have kinks at
    moderate distance; returns the sorted knots and the index of ``base``.
    """
    unit = 1.0 + abs(base)

    def side(end, n_near):
        d = math.copysign(1.0, end)
        if math.isinf(end):
            pts = base + d * np.geomspace(1e-4 * unit, 1e12 * unit, n_side)
            reach = 8.0 * unit
        else:
            pts = end - (end - base) * np.geomspace(1.0, 1e-14, n_side + 1)[1:]
            reach = 0.5 * abs(end - base)
        near = base + d * np.linspace(0.0, reach, n_near + 1)[1:]
        return np.unique(np.concatenate([pts, near]))

    k = np.concatenate([side(lo, n_near), [base], side(hi, n_near)])
    k = np.unique(k)
    return k, int(np.searchsorted(k, base))


@dataclass(frozen=True)
class QFunction:
    """``q_n`` for one model and base point ``n``, with vectorised evaluation.

    Numerically, ``q_n'`` and ``q_n`` are cached at knots clustered toward the
    endpoints; between knots the exact Taylor remainder
    ``int_k^x 2 (x - z) / eta(z)^2 dz`` is added by Gauss-Legendre. A closed
    form attached to the model is rebased to ``n`` instead.
    """

    model: MartingaleModel
    base: float
    n_side: int = 512
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        m = self.model
        if not (m.lo < self.base < m.hi):
            raise OutsideNaturalState(f"base {self.base} outside ({m.lo}, {m.hi})")
        if m.q is None:
            self._build()

    @property
    def closed_form(self):
        return self.model.q is not None

    def _w(self, z):
        with np.errstate(all="ignore"):
            return 2.0 / self.model.eta_at(z) ** 2

    def _build(self):
        k, i0 = _knots(self.base, self.model.lo, self.model.hi, self.n_side)
        z, wt = nm.gauss_legendre_nodes(k[:-1], k[1:])
        with np.errstate(all="ignore"):
            wz = wt * self._w(z)
            a = np.sum(wz, axis=-1)
            c = np.sum(wz * z, axis=-1)
        A = nm.cumulate_from(a, i0)
        C = nm.cumulate_from(c, i0)
        with np.errstate(all="ignore"):
            Q = k * A - C
        Q[i0] = 0.0
        self._cache.update(knots=k, A=A, Q=Q)

    # -- closed form rebased to self.base

    def _closed(self, x):
        m = self.model
        n = self.base
        qn = float(m.q(np.array(n)))
        dn = float(m.q_prime(np.array(n)))
        with np.errstate(all="ignore"):
            return m.q(x) - qn - dn * (x - n), m.q_prime(x) - dn

    # -- evaluation

    def _interior(self, x):
        if self.closed_form:
            return self._closed(x)
        k, A, Q = self._cache["knots"], self._cache["A"], self._cache["Q"]
        j = np.clip(np.searchsorted(k, x, side="right") - 1, 0, k.size - 1)
        # expand from the knot nearer to the base so the remainder panel is short
        kk = k[j]
        with np.errstate(all="ignore"):
            rem_p = nm.gauss_legendre(self._w, kk, x)
            rem_q = nm.gauss_legendre(lambda z: (x[..., None] - z) * self._w(z), kk, x)
            return Q[j] + A[j] * (x - kk) + rem_q, A[j] + rem_p

    def _eval(self, x, which):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = np.atleast_1d(x).astype(float)
        m = self.model
        out = np.full(x.shape, math.inf)
        inside = (x > m.lo) & (x < m.hi)
        if np.any(inside):
            vals = self._interior(x[inside])[which]
            out[inside] = vals
        if which == 1:
            out[x <= m.lo] = -math.inf
        for end in (m.lo, m.hi):
            at = x == end
            if np.any(at):
                out[at] = self.endpoint(end)[which]
        return out.reshape(shape)

    def __call__(self, x):
        return self._eval(x, 0)

    def prime(self, x):
        return self._eval(x, 1)

    def endpoint(self, end):
        """``(q(end -+), q'(end -+))`` as limits along a geometric approach."""
        key = ("end", end)
        if key not in self._cache:
            n = self.base
            if math.isinf(end):
                pts = n + math.copysign(1.0, end) * (1.0 + abs(n)) * 2.0 ** np.arange(0, 40)
            else:
                pts = end - (end - n) * 2.0 ** -np.arange(1, 47)
            q, dq = self._interior(pts)
            self._cache[key] = (nm.endpoint_limit(q), nm.endpoint_limit(dq))
        return self._cache[key]


def make_q(model: MartingaleModel, base=None) -> QFunction:
    return QFunction(model, float(model.start if base is None else base))


def q_eval(model: MartingaleModel, base, x):
    """``q_base(x)``; ``+inf`` outside the closed natural state interval."""
    return make_q(model, base)(x)


def q_rebase(q_m: QFunction, n):
    """``(q_n, (q_m(n), q_m'(n)))`` with ``q_m(z) = q_n(z) + q_m(n) + q_m'(n)(z - n)``."""
    q_n = QFunction(q_m.model, float(n), q_m.n_side)
    offsets = (float(q_m(np.array(n))), float(q_m.prime(np.array(n))))
    return q_n, offsets


def q_integral_vs_target(q: QFunction, nu: TargetLaw) -> float:
    """``int q dnu`` (atoms exactly, continuous part by quantile quadrature); may be ``inf``."""
    if nu.is_dirac and nu.atoms[0][0] == q.base:
        return 0.0
    return expectation(nu, q)


def linear_growth_limit(q: QFunction, direction=1) -> float:
    """``lim q(n)/|n|`` along the unbounded side ``direction`` (``+1`` or ``-1``).

    Convexity makes this the limit of the one-sided slope, reported as a
    non-negative number (``+inf`` when unbounded).
    """
    end = q.model.hi if direction > 0 else q.model.lo
    if not math.isinf(end):
        raise EndpointFinite("linear growth limit needs an infinite endpoint")
    n = q.base + direction * (1.0 + abs(q.base)) * 2.0 ** np.arange(0, 40)
    slopes = direction * q.prime(n)
    return max(nm.endpoint_limit(slopes), 0.0)


@dataclass(frozen=True)
class BoundaryReport:
    l_reachable: bool
    r_reachable: bool
    is_true_martingale: bool
    diagnostics: dict


def kotani_integral(model: MartingaleModel, direction):
    """``int^{+-inf} |x| / eta(x)^2 dx`` beyond the start point; ``inf`` if divergent."""
    start = model.start
    with np.errstate(all="ignore"):
        return nm.tail_integral(lambda x: abs(x) / float(model.eta_at(np.array(x))) ** 2,
                                start, direction=direction, unit=1.0 + abs(start))


def classify_boundaries(model: MartingaleModel) -> BoundaryReport:
    """Feller reachability of ``l``, ``r`` and Kotani's true-martingale criterion."""
    q = make_q(model)
    q_l = q.endpoint(model.lo)[0] if not math.isinf(model.lo) else math.inf
    q_r = q.endpoint(model.hi)[0] if not math.isinf(model.hi) else math.inf
    l_reach = not math.isinf(model.lo) and math.isfinite(q_l)
    r_reach = not math.isinf(model.hi) and math.isfinite(q_r)
    k_lo = kotani_integral(model, -1) if math.isinf(model.lo) else None
    k_hi = kotani_integral(model, +1) if math.isinf(model.hi) else None
    left_ok = not math.isinf(model.lo) or math.isinf(k_lo)
    right_ok = not math.isinf(model.hi) or math.isinf(k_hi)
    return BoundaryReport(l_reachable=l_reach, r_reachable=r_reach,
                          is_true_martingale=bool(left_ok and right_ok),
                          diagnostics={"q_l": q_l, "q_r": q_r, "kotani_lo": k_lo,
                                       "kotani_hi": k_hi})


def q_table(q: QFunction, xs):
    """Rows ``(x, q(x), q'(x))``."""
    xs = np.asarray(xs, dtype=float)
    return np.column_stack([xs, q(xs), q.prime(xs)])


def composite_mean_time(q: QFunction, nu: TargetLaw, nu_star: float) -> float:
    """Expected duration of "hit ``nu*``, then run the centred construction".

    With ``m`` the base of ``q``, the mean equals
    ``int q_m dnu + |nu* - m| L`` where ``L`` is the linear growth of ``q`` on
    the unbounded side facing away from ``nu*``. For ``nu* = m`` this is
    ``int q dnu``.
    """
    total = q_integral_vs_target(q, nu)
    gap = nu_star - q.base
    if gap == 0 or math.isinf(total):
        return total
    direction = -1 if gap > 0 else 1
    end = q.model.lo if direction < 0 else q.model.hi
    if not math.isinf(end):
        raise NoEmbeddingExists("nu* sits on the side of a bounded endpoint pair; no embedding")
    return total + abs(gap) * linear_growth_limit(q, direction)
