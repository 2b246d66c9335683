"""Shared numerical helpers: monotone inversion and divergence-aware quadrature."""

import math

import numpy as np
from scipy import integrate

from .errors import BracketFailure

#: Partial integrals beyond this are declared divergent.
DIVERGENCE_THRESHOLD = 1e12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def gauss_legendre(fun, a, b):
    """Fixed 16-point Gauss-Legendre rule on ``[a, b]``, vectorised over arrays a, b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[..., None] + half[..., None] * _GL_NODES
    return half * np.sum(_GL_WEIGHTS * fun(x), axis=-1)


def gauss_legendre_nodes(a, b):
    """Nodes ``x`` and weights ``w`` with ``sum(w * f(x), -1)`` the 16-point rule on ``[a, b]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    x = 0.5 * (b + a)[..., None] + half[..., None] * _GL_NODES
    return x, half[..., None] * _GL_WEIGHTS


def cumulate_from(cells, i0):
    """Antiderivative at knots from per-cell integrals, anchored at knot ``i0``.

    Sums run outward from the anchor so values near it carry no cancellation
    from distant cells.
    """
    cells = np.asarray(cells, dtype=float)
    return np.concatenate([-np.cumsum(cells[:i0][::-1])[::-1], [0.0], np.cumsum(cells[i0:])])


def solve_increasing(f, y, x0, fprime=None, lo=None, hi=None, xtol=1e-12,
                     rtol=1e-12, max_expand=1e6, maxiter=200, args=()):
    """Solve ``f(x, *args) = y`` elementwise for a strictly increasing, vectorised ``f``.

    Bracketed bisection with Newton acceleration. ``lo``/``hi`` are optional
    initial brackets; missing brackets are found by expanding outward from
    ``x0`` with doubling steps, up to ``max_expand``. ``args`` are arrays
    broadcast to the shape of ``y`` and passed elementwise to ``f``/``fprime``.
    """
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.ravel()
    x = np.broadcast_to(np.asarray(x0, dtype=float), shape).ravel().copy()
    args = tuple(np.broadcast_to(np.asarray(a, dtype=float), shape).ravel() for a in args)
    if lo is None or hi is None:
        lo, hi = _expand_bracket(lambda v: f(v, *args), y, x, max_expand)
    else:
        lo = np.broadcast_to(np.asarray(lo, dtype=float), shape).ravel().copy()
        hi = np.broadcast_to(np.asarray(hi, dtype=float), shape).ravel().copy()
    x = np.clip(x, lo, hi)
    idx = np.arange(y.size)
    for _ in range(maxiter):
        if idx.size == 0:
            break
        xa, ya, la, ha = x[idx], y[idx], lo[idx], hi[idx]
        sub = tuple(a[idx] for a in args)
        g = f(xa, *sub) - ya
        la = np.where(g < 0, xa, la)
        ha = np.where(g > 0, xa, ha)
        if fprime is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = xa - g / fprime(xa, *sub)
            bad = ~np.isfinite(xn) | (xn <= la) | (xn >= ha)
        else:
            xn = xa
            bad = np.ones(xa.shape, dtype=bool)
        xn = np.where(bad, 0.5 * (la + ha), xn)
        xn = np.where(g == 0, xa, xn)
        tol = xtol + rtol * np.abs(xn)
        done = (g == 0) | (np.abs(xn - xa) <= tol) | ((ha - la) <= tol)
        x[idx], lo[idx], hi[idx] = xn, la, ha
        idx = idx[~done]
    return x.reshape(shape)


def _expand_bracket(f, y, x, max_expand):
    lo = x.copy()
    hi = x.copy()
    step = np.maximum(1.0, np.abs(x)) * 1e-2
    for _ in range(200):
        need_lo = f(lo) > y
        need_hi = f(hi) < y
        if not (need_lo.any() or need_hi.any()):
            return lo, hi
        lo = np.where(need_lo, lo - step, lo)
        hi = np.where(need_hi, hi + step, hi)
        step = step * 2.0
        if np.any(np.abs(lo - x) > max_expand) or np.any(np.abs(hi - x) > max_expand):
            break
    raise BracketFailure(f"bracket expansion exceeded {max_expand:g}")


def series_limit(increments, ratio_cut=0.9, patience=3, rel_tol=1e-12):
    """Decide whether a series of non-negative pieces converges.

    Returns ``(total, diverged)``. Divergence is declared when the partial sum
    exceeds :data:`DIVERGENCE_THRESHOLD`, or when the last ``patience`` pieces
    fail to shrink geometrically (ratio >= ``ratio_cut``) while still
    contributing more than ``rel_tol`` relative to the sum.
    """
    pieces = np.asarray(list(increments), dtype=float)
    total = float(np.sum(pieces))
    if not np.isfinite(total) or abs(total) > DIVERGENCE_THRESHOLD:
        return math.inf, True
    if pieces.size < patience + 1:
        return total, False
    tail = np.abs(pieces[-(patience + 1):])
    if tail[-1] <= rel_tol * max(abs(total), 1e-300):
        return total, False
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = tail[1:] / tail[:-1]
    if np.all(ratios >= ratio_cut):
        return math.inf, True
    return total, False


def tail_integral(fun, start, direction=1, unit=1.0, max_doublings=400):
    """Integrate a non-negative ``fun`` from ``start`` to ``direction * inf``.

    The half-line is cut into dyadic pieces ``[start + unit(2^k - 1), start + unit(2^(k+1) - 1)]``
    and :func:`series_limit` decides convergence. Returns ``inf`` on divergence.
    """
    pieces = []
    for k in range(max_doublings):
        a = start + direction * unit * (2.0 ** k - 1.0)
        b = start + direction * unit * (2.0 ** (k + 1) - 1.0)
        lo, hi = (a, b) if direction > 0 else (b, a)
        val = integrate.quad(fun, lo, hi, limit=200)[0]
        pieces.append(abs(val))
        if not np.isfinite(val):
            return math.inf
        total, diverged = series_limit(pieces)
        if diverged:
            return math.inf
        if k >= 8 and pieces[-1] <= 1e-13 * max(total, 1e-300) and pieces[-2] <= 1e-10 * max(total, 1e-300):
            return total
    # Exhausted the doubling budget: a slowly convergent tail is reported divergent.
    total, diverged = series_limit(pieces, ratio_cut=0.5)
    return math.inf if diverged else total


def endpoint_limit(values):
    """Limit of a monotone sequence sampled along a geometric approach to an endpoint.

    Returns ``inf`` (signed) if the increments do not shrink geometrically.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return math.copysign(math.inf, values[np.isfinite(values)][-1] if np.any(np.isfinite(values)) else 1.0)
    incs = np.diff(values)
    sign = 1.0 if values[-1] >= values[0] else -1.0
    total, diverged = series_limit(np.abs(incs), rel_tol=1e-14)
    if diverged:
        return sign * math.inf
    # geometric tail correction from the last two increments
    if incs.size >= 2 and abs(incs[-2]) > 0:
        r = abs(incs[-1] / incs[-2])
        if r < 1:
            return float(values[-1] + incs[-1] * r / (1 - r))
    return float(values[-1])
