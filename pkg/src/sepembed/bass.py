"""Bass maps: ``h = F^{-1} o Phi``, its heat smoothing ``b``, ``b_x`` and the inverse ``B``.

``b(t, x) = E[h(x + sqrt(1 - t) Z)]`` is the martingale ``N_t = b(t, W_t)``
that ends in the target law at ``t = 1``. Closed forms are used for the
shipped families whose smoothing is explicit (atoms, uniform, Gaussian);
everything else goes through Gauss-Hermite quadrature.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from . import _numerics as nm
from .errors import DegenerateDerivative, DiracTarget, EtaZero, OutOfRange
from .model import MartingaleModel, TargetLaw

#: Terminal cutoff: time-dependent maps are evaluated on ``[0, 1 - EPS_T]``.
EPS_T = 1e-6
#: Floor below which ``b_x`` is treated as degenerate.
EPS_BX = 1e-15
N_GH = 64

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_U_MIN = 1e-300


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT2PI


def build_h(nu: TargetLaw):
    """``h(x) = F^{-1}(Phi(x))``, using the inverse survival function in the upper tail."""
    if nu.is_dirac:
        raise DiracTarget("cannot embed a Dirac mass with the Bass construction")

    def h(x):
        x = np.asarray(x, dtype=float)
        u = np.clip(ndtr(x), _U_MIN, 1.0 - 2.0 ** -53)
        out = np.asarray(nu.quantile(u), dtype=float) * np.ones_like(x)
        if nu.isf is not None:
            pos = x > 0
            if np.any(pos):
                p = np.clip(ndtr(-x[pos]) if out.ndim else ndtr(-x), _U_MIN, 0.5)
                upper = np.asarray(nu.isf(p), dtype=float)
                if out.ndim:
                    out[pos] = upper
                else:
                    out = upper
        return out

    return h


def build_h_prime(nu: TargetLaw):
    """``h' = phi / (f o h)``, or ``None`` when the target has no density."""
    if nu.density is None or nu.atoms:
        return None
    h = build_h(nu)

    def h_prime(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = _phi(x) / np.asarray(nu.density(h(x)), dtype=float)
        return np.where(np.isfinite(out), out, 0.0)

    return h_prime


def h_pseudo_inverse(nu: TargetLaw):
    """Generalized inverse of ``h`` with the midpoint convention on flats."""
    def h_inv(y):
        y = np.asarray(y, dtype=float)
        upper = np.asarray(nu.cdf(y), dtype=float)
        lower = np.asarray(nu.cdf(y - 1e-12 * (1 + np.abs(y))), dtype=float)
        return ndtri(np.clip(0.5 * (upper + lower), _U_MIN, 1 - 1e-16))
    return h_inv


# ----------------------------------------------------------------------------
# smoothers


class _Smoother:
    def b(self, sig, x):
        raise NotImplementedError

    def bx(self, sig, x):
        raise NotImplementedError

    def B(self, sig, y, x0):
        return None  # no closed form; caller inverts numerically

    def bracket(self, sig, y):
        return None


class _Gaussian(_Smoother):
    def __init__(self, mean, std):
        self.mean, self.std = mean, std

    def b(self, sig, x):
        return self.mean + self.std * x

    def bx(self, sig, x):
        return np.full(np.shape(x), self.std)

    def B(self, sig, y, x0):
        return (y - self.mean) / self.std


class _Uniform(_Smoother):
    def __init__(self, lo, hi):
        self.lo, self.w = lo, hi - lo

    def b(self, sig, x):
        v = np.sqrt(1.0 + sig * sig)
        return self.lo + self.w * ndtr(x / v)

    def bx(self, sig, x):
        v = np.sqrt(1.0 + sig * sig)
        return self.w * _phi(x / v) / v

    def B(self, sig, y, x0):
        v = np.sqrt(1.0 + sig * sig)
        return v * ndtri((y - self.lo) / self.w)


class _Atomic(_Smoother):
    """Step function ``h`` with jumps ``d_j`` at ``z_j = Phi^{-1}(F(a_j))``."""

    def __init__(self, atoms):
        locs = np.array([a for a, _ in atoms])
        mass = np.array([p for _, p in atoms])
        self.a0 = locs[0]
        self.jumps = np.diff(locs)
        self.z = ndtri(np.cumsum(mass)[:-1])
        self.levels = np.concatenate([[locs[0]], locs[0] + np.cumsum(self.jumps)])

    def b(self, sig, x):
        sig = np.asarray(sig)[..., None]
        x = np.asarray(x)[..., None]
        return self.a0 + np.sum(self.jumps * ndtr((x - self.z) / sig), axis=-1)

    def bx(self, sig, x):
        sig = np.asarray(sig)[..., None]
        x = np.asarray(x)[..., None]
        return np.sum(self.jumps * _phi((x - self.z) / sig) / sig, axis=-1)

    def B(self, sig, y, x0):
        if self.jumps.size == 1:
            return self.z[0] + sig * ndtri((y - self.a0) / self.jumps[0])
        return None

    def bracket(self, sig, y):
        return self.z[0] - 40.0 * sig - 1.0, self.z[-1] + 40.0 * sig + 1.0


class _Quadrature(_Smoother):
    """Gauss-Hermite smoothing of a generic ``h``."""

    def __init__(self, h, h_prime, n=N_GH):
        nodes, weights = np.polynomial.hermite.hermgauss(n)
        self.nodes = nodes * _SQRT2  # standard-normal abscissae
        self.weights = weights / math.sqrt(math.pi)
        self.h, self.h_prime = h, h_prime

    def b(self, sig, x):
        pts = np.asarray(x)[..., None] + np.asarray(sig)[..., None] * self.nodes
        return np.sum(self.weights * self.h(pts), axis=-1)

    def bx(self, sig, x):
        sig = np.asarray(sig)
        pts = np.asarray(x)[..., None] + sig[..., None] * self.nodes
        if self.h_prime is not None:
            return np.sum(self.weights * self.h_prime(pts), axis=-1)
        with np.errstate(all="ignore"):
            return np.sum(self.weights * self.nodes * self.h(pts), axis=-1) / sig

    def bx_by_parts(self, sig, x):
        sig = np.asarray(sig)
        pts = np.asarray(x)[..., None] + sig[..., None] * self.nodes
        return np.sum(self.weights * self.nodes * self.h(pts), axis=-1) / sig


@dataclass(frozen=True)
class BassMaps:
    """Evaluators for ``h``, ``b``, ``b_x``, ``B`` for one target law.

    All evaluators take ``t`` (scalar or array) in ``[0, 1)`` and clamp it to
    ``1 - eps_t``. ``lo``/``hi`` are the support endpoints, which bound the
    range of ``b(t, .)``.
    """

    nu: TargetLaw
    h: object
    h_prime: Optional[object]
    smoother: _Smoother = field(repr=False)
    lo: float
    hi: float
    eps_t: float = EPS_T
    kind: str = "quadrature"

    def _sig(self, t):
        t = np.minimum(np.asarray(t, dtype=float), 1.0 - self.eps_t)
        return np.sqrt(1.0 - t)

    def b(self, t, x):
        return self.smoother.b(self._sig(t), np.asarray(x, dtype=float))

    def bx(self, t, x, check=False):
        val = self.smoother.bx(self._sig(t), np.asarray(x, dtype=float))
        if check and np.any(val <= EPS_BX):
            raise DegenerateDerivative("b_x underflowed; t too close to 1 over a flat of h")
        return val

    def in_range(self, y):
        y = np.asarray(y, dtype=float)
        return (y > self.lo) & (y < self.hi)

    def B(self, t, y, x0=None, strict=True):
        """Inverse of ``b(t, .)``; out-of-range inputs raise or give NaN."""
        y = np.asarray(y, dtype=float)
        ok = self.in_range(y)
        if strict and not np.all(ok):
            raise OutOfRange("value outside the open support of the target")
        sig = np.broadcast_to(self._sig(t), y.shape)
        fill = float(self.smoother.b(np.array(1.0), np.array(0.0)))
        yy = np.where(ok, y, fill)
        out = self.smoother.B(sig, yy, x0)
        if out is None:
            guess = np.zeros(y.shape) if x0 is None else np.broadcast_to(
                np.nan_to_num(np.asarray(x0, dtype=float)), y.shape)
            br = self.smoother.bracket(sig, yy)
            lo, hi = br if br is not None else (None, None)
            if br is not None:
                guess = np.clip(guess, lo, hi)
            sm = self.smoother
            out = nm.solve_increasing(lambda v, s: sm.b(s, v), yy, guess,
                                      fprime=lambda v, s: sm.bx(s, v),
                                      lo=lo, hi=hi, xtol=1e-13, rtol=1e-13, args=(sig,))
        return np.where(ok, out, np.nan)

    def Lambda(self, t, y, model: MartingaleModel, x0=None):
        """``Lambda(t, y) = b_x(t, B(t, y)) / eta(y)``."""
        y = np.asarray(y, dtype=float)
        eta = model.eta_at(y)
        if np.any(eta <= 0):
            raise EtaZero("eta vanishes at the evaluation point")
        return self.bx(t, self.B(t, y, x0)) / eta

    def terminal(self, t, y, x0=None):
        """Projection ``h(B(t, y))`` of a current value onto the terminal law."""
        return self.h(self.B(t, y, x0, strict=False))


def build_maps(nu: TargetLaw, eps_t=EPS_T, n_gh=N_GH, closed_form=True) -> BassMaps:
    """Assemble the Bass maps for ``nu``; closed-form smoothers when available."""
    h = build_h(nu)
    h_prime = build_h_prime(nu)
    fam = nu.family if closed_form else "generic"
    if fam == "gaussian":
        sm, kind = _Gaussian(nu.params["mean"], nu.params["std"]), "gaussian"
    elif fam == "uniform":
        sm, kind = _Uniform(nu.params["lo"], nu.params["hi"]), "uniform"
    elif fam == "atoms" or (closed_form and nu.is_atomic):
        sm, kind = _Atomic(sorted(nu.atoms)), "atoms"
    else:
        sm, kind = _Quadrature(h, h_prime, n_gh), "quadrature"
    return BassMaps(nu=nu, h=h, h_prime=h_prime, smoother=sm, lo=nu.support_lo,
                    hi=nu.support_hi, eps_t=eps_t, kind=kind)


def eval_b(maps: BassMaps, t, x):
    return maps.b(t, x)


def eval_bx(maps: BassMaps, t, x):
    return maps.bx(t, x, check=True)


def eval_B(maps: BassMaps, t, x, x0=None):
    return maps.B(t, x, x0, strict=True)


def eval_Lambda(maps: BassMaps, model: MartingaleModel, t, y):
    return maps.Lambda(t, y, model)


def tabulate(maps: BassMaps, t_grid, x_grid):
    """Rows ``(t, x, b, b_x)`` on a tensor grid, for debugging dumps."""
    T, X = np.meshgrid(np.asarray(t_grid, float), np.asarray(x_grid, float), indexing="ij")
    return np.column_stack([T.ravel(), X.ravel(), maps.b(T.ravel(), X.ravel()),
                            maps.bx(T.ravel(), X.ravel())])
