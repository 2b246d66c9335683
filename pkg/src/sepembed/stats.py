"""One-sample Kolmogorov-Smirnov statistic and small summary helpers."""

import math

import numpy as np


def ks_statistic(sample, cdf, cdf_left=None):
    """``sup_x |F_n(x) - F(x)|`` from order statistics.

    Parameters
    ----------
    sample : array_like
        Observations (sorted internally).
    cdf : callable
        Target distribution function, right-continuous.
    cdf_left : callable, optional
        Left limit ``F(x-)``. Needed for targets with atoms; defaults to
        ``cdf`` which is exact for continuous targets.

    Returns
    -------
    float
        ``max_i max(i/n - F(x_(i)), F(x_(i)-) - (i-1)/n)`` in ``[0, 1]``.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    Fl = F if cdf_left is None else np.asarray(cdf_left(x), dtype=float)
    i = np.arange(1, n + 1)
    # with ties only the last index of a run matters for the upper term and
    # the first for the lower one, which the max over i already handles
    d = max(np.max(i / n - F), np.max(Fl - (i - 1) / n))
    return float(min(max(d, 0.0), 1.0))


def target_cdf_pair(law):
    """``(F, F(.-))`` for a :class:`~sepembed.model.TargetLaw`."""
    if not law.atoms:
        return law.cdf, None
    locs = np.array([a for a, _ in law.atoms])
    mass = np.array([p for _, p in law.atoms])

    def left(x):
        x = np.asarray(x, dtype=float)
        jump = np.sum(np.where(x[..., None] == locs, mass, 0.0), axis=-1)
        return np.asarray(law.cdf(x), dtype=float) - jump

    return law.cdf, left


def mean_stderr(values):
    """Sample mean and its standard error (``nan`` stderr for one value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), math.nan
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))


def ks_critical(n, level=0.99):
    """Asymptotic Kolmogorov critical value ``c(level) / sqrt(n)``."""
    from scipy.special import kolmogi
    return float(kolmogi(1.0 - level) / math.sqrt(n))
