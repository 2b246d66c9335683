"""Target law families: atoms, uniform, Gaussian, Student t, CDF tables."""

import math

import numpy as np
from scipy import stats
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtr, ndtri

from . import _numerics as nm
from .errors import ValidationError
from .model import TargetLaw


def atoms(points, name="atoms"):
    """Finite discrete law from ``(location, mass)`` pairs.

    Masses must be positive and sum to one (up to 1e-12); equal locations are
    merged.
    """
    merged = {}
    for loc, mass in points:
        if mass < 0:
            raise ValidationError("negative atom mass")
        if mass > 0:
            merged[float(loc)] = merged.get(float(loc), 0.0) + float(mass)
    if not merged:
        raise ValidationError("no atoms with positive mass")
    total = sum(merged.values())
    if abs(total - 1.0) > 1e-12:
        raise ValidationError(f"atom masses sum to {total!r}, not 1")
    locs = np.array(sorted(merged))
    mass = np.array([merged[x] for x in locs])
    cum = np.cumsum(mass)
    cum[-1] = 1.0

    def cdf(x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(locs, x, side="right")
        return np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)

    def quantile(u):
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(cum, u, side="left")
        return locs[np.clip(k, 0, locs.size - 1)]

    pts = tuple((float(a), float(p)) for a, p in zip(locs, mass))
    return TargetLaw(cdf=cdf, quantile=quantile, support_lo=float(locs[0]),
                     support_hi=float(locs[-1]), atoms=pts,
                     l1_moment=float(np.sum(np.abs(locs) * mass)), name=name,
                     family="atoms", params={"atoms": pts})


def two_point(a, b=None, p=0.5):
    """``p delta_a + (1 - p) delta_b``; with one argument, uniform on ``{-a, +a}``."""
    if b is None:
        a, b = -abs(a), abs(a)
    return atoms([(a, p), (b, 1.0 - p)], name="two_point")


def uniform(lo=-1.0, hi=1.0):
    if not hi > lo:
        raise ValidationError("uniform needs hi > lo")
    w = hi - lo
    return TargetLaw(
        cdf=lambda x: np.clip((np.asarray(x, dtype=float) - lo) / w, 0.0, 1.0),
        quantile=lambda u: lo + w * np.asarray(u, dtype=float),
        isf=lambda p: hi - w * np.asarray(p, dtype=float),
        density=lambda x: np.where((np.asarray(x) >= lo) & (np.asarray(x) <= hi), 1.0 / w, 0.0),
        support_lo=float(lo), support_hi=float(hi),
        l1_moment=_uniform_abs_mean(lo, hi), name="uniform",
        family="uniform", params={"lo": float(lo), "hi": float(hi)})


def _uniform_abs_mean(lo, hi):
    if lo >= 0 or hi <= 0:
        return abs(0.5 * (lo + hi))
    return (lo * lo + hi * hi) / (2 * (hi - lo))


def gaussian(mean=0.0, std=1.0):
    if not std > 0:
        raise ValidationError("gaussian needs std > 0")
    return TargetLaw(
        cdf=lambda x: ndtr((np.asarray(x, dtype=float) - mean) / std),
        quantile=lambda u: mean + std * ndtri(np.asarray(u, dtype=float)),
        isf=lambda p: mean - std * ndtri(np.asarray(p, dtype=float)),
        density=lambda x: stats.norm.pdf(x, loc=mean, scale=std),
        support_lo=-math.inf, support_hi=math.inf,
        l1_moment=float(stats.foldnorm(abs(mean) / std, scale=std).mean()) if mean else std * math.sqrt(2 / math.pi),
        name="gaussian", family="gaussian", params={"mean": float(mean), "std": float(std)})


def from_scipy(dist, name=None):
    """Wrap a frozen continuous ``scipy.stats`` distribution."""
    lo, hi = dist.support()
    try:
        l1 = float(dist.expect(abs)) if np.isfinite(dist.mean()) else math.inf
    except Exception:
        l1 = None
    return TargetLaw(cdf=dist.cdf, quantile=dist.ppf, isf=dist.isf, density=dist.pdf,
                     support_lo=float(lo), support_hi=float(hi), l1_moment=l1,
                     name=name or dist.dist.name)


def student_t(df, loc=0.0, scale=1.0):
    """Student t law; not in L^1 for ``df <= 1``."""
    dist = stats.t(df, loc=loc, scale=scale)
    law = from_scipy(dist, name="student_t")
    if df <= 1:
        law = _with(law, l1_moment=math.inf)
    return law


def _with(law, **changes):
    from dataclasses import replace
    return replace(law, **changes)


def from_table(x, F, name="table"):
    """Piecewise-linear CDF through the points ``(x_i, F_i)``.

    ``F`` must be non-decreasing from 0 to 1. The quantile is the generalized
    (left-continuous) inverse of the interpolant.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    if x.ndim != 1 or x.size < 2 or x.shape != F.shape:
        raise ValidationError("table needs two equal-length 1-D columns")
    if np.any(np.diff(x) <= 0):
        raise ValidationError("table x column must be strictly increasing")
    if np.any(np.diff(F) < 0) or abs(F[0]) > 1e-12 or abs(F[-1] - 1) > 1e-12:
        raise ValidationError("table F column must increase from 0 to 1")
    F = F.copy()
    F[0], F[-1] = 0.0, 1.0
    # strip leading/trailing flats so the support is tight
    first = np.nonzero(F > 0)[0][0] - 1
    last = np.nonzero(F < 1)[0][-1] + 1
    x, F = x[first:last + 1], F[first:last + 1]
    slope = np.diff(F) / np.diff(x)

    def cdf(v):
        return np.interp(np.asarray(v, dtype=float), x, F, left=0.0, right=1.0)

    def quantile(u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(F, u, side="left"), 1, F.size - 1)
        with np.errstate(all="ignore"):
            t = np.where(slope[k - 1] > 0, (u - F[k - 1]) / (F[k] - F[k - 1]), 1.0)
        return x[k - 1] + t * (x[k] - x[k - 1])

    def density(v):
        v = np.asarray(v, dtype=float)
        k = np.clip(np.searchsorted(x, v, side="right"), 1, x.size - 1)
        return np.where((v >= x[0]) & (v <= x[-1]), slope[k - 1], 0.0)

    absmean = float(np.sum(np.diff(F) * 0.5 * (np.abs(x[1:]) + np.abs(x[:-1]))))
    return TargetLaw(cdf=cdf, quantile=quantile, density=density, support_lo=float(x[0]),
                     support_hi=float(x[-1]), l1_moment=absmean, name=name)


def load_table(path):
    """Read a two-column ``x,F`` CSV (header optional) into :func:`from_table`."""
    data = np.genfromtxt(path, delimiter=",", dtype=float)
    if np.isnan(data[0]).any():
        data = data[1:]
    return from_table(data[:, 0], data[:, 1], name=str(path))


def from_cdf(cdf, lo, hi, density=None, name="cdf", n=4097):
    """Continuous law from a CDF alone; the quantile is synthesized by inversion.

    A monotone interpolant of ``u -> F^{-1}(u)`` in normal-score coordinates
    seeds the refinement: two Newton steps when the density is known, else a
    bracketed bisection between neighbouring tabulated points.
    """
    z = np.linspace(-8.2, 8.2, n)
    u = ndtr(z)
    a = -1e6 if math.isinf(lo) else lo
    b = 1e6 if math.isinf(hi) else hi
    xs = nm.solve_increasing(lambda v: np.asarray(cdf(v), dtype=float) - 0.0, u,
                             np.full(u.shape, 0.5 * (a + b)), fprime=density,
                             lo=np.full(u.shape, a), hi=np.full(u.shape, b))
    xs = np.maximum.accumulate(xs)
    keep = np.concatenate([[True], np.diff(xs) > 0])
    seed = PchipInterpolator(z[keep], xs[keep], extrapolate=True)
    # tabulated points bracket every u inside the grid, which keeps refinement short
    grid_u = np.concatenate([[0.0], u, [1.0]])
    grid_x = np.concatenate([[a], xs, [b]])

    def quantile(uu):
        uu = np.asarray(uu, dtype=float)
        k = np.clip(np.searchsorted(grid_u, uu, side="left"), 1, grid_u.size - 1)
        lo_b, hi_b = grid_x[k - 1], grid_x[k]
        guess = np.clip(seed(ndtri(np.clip(uu, 1e-300, 1 - 1e-16))), lo_b, hi_b)
        if density is None:
            return nm.solve_increasing(cdf, uu, guess, lo=lo_b, hi=hi_b)
        # the seed is accurate to interpolation order, so two Newton steps suffice
        x = guess
        for _ in range(2):
            with np.errstate(all="ignore"):
                step = (np.asarray(cdf(x), dtype=float) - uu) / np.asarray(density(x), dtype=float)
            x = np.clip(np.where(np.isfinite(step), x - step, x), lo_b, hi_b)
        return x

    return TargetLaw(cdf=cdf, quantile=quantile, density=density, support_lo=float(lo),
                     support_hi=float(hi), name=name)
