"""Report and plot-data emission.

The report is line-oriented ``key = value`` text in the configuration
grammar, so reports diff cleanly and parse back with :func:`parse_report`.
Every verdict field is followed by ``<key>.rule`` naming the rule behind it.
"""

import csv
import math
import os
from typing import Optional

import numpy as np

from .classifier import RULE_MINIMAL, EmbeddabilityVerdict
from .engine import EmbeddingReport, fmt, write_paths_csv
from .model import TargetLaw

RULE_KS = "distribution: one-sample Kolmogorov-Smirnov of x_tau against the target"
RULE_MEAN = "duration: sample mean of tau, compared with int q dnu"
RULE_ABSORBED = "boundary: fraction of paths stopped on a state endpoint"
FILES = {"report": "report.txt", "paths": "paths.csv", "cdf": "cdf_overlay.csv",
         "hist": "tau_hist.csv", "qtable": "qtable.csv", "maps": "maps.csv"}


def _value(v):
    if v is None:
        return '"none"'
    if isinstance(v, str):
        return '"' + v.replace('"', "'") + '"'
    return fmt(v)


def _rule_for(verdict, prefix):
    for r in verdict.reasons:
        if r.startswith(prefix + ":"):
            return r
    return "not evaluated"


def format_report(verdict: Optional[EmbeddabilityVerdict] = None,
                  mc: Optional[EmbeddingReport] = None, mode="classify", extra=None):
    """Report lines as a single string (trailing newline included)."""
    rows = [("mode", mode)]
    if verdict is not None:
        rows += [
            ("existence", verdict.exists), ("existence.rule", _rule_for(verdict, "existence")),
            ("finite", verdict.finite_possible), ("finite.rule", _rule_for(verdict, "finite")),
            ("integrable", verdict.integrable_possible),
            ("integrable.rule", _rule_for(verdict, "integrable")),
            ("predicted_E_tau", verdict.predicted_E_tau),
            ("predicted_E_tau.rule", _rule_for(verdict, "integrable")),
            ("bounded", str(verdict.bounded)), ("bounded.rule", _rule_for(verdict, "bounded")),
            ("minimality.rule", RULE_MINIMAL),
            ("nu_star", verdict.details.get("nu_star")),
        ]
    if mc is not None:
        rows += [
            ("ks_statistic", mc.ks_statistic), ("ks_statistic.rule", RULE_KS),
            ("mean_tau", mc.mean_tau), ("mean_tau.rule", RULE_MEAN),
            ("stderr_tau", mc.stderr_tau), ("stderr_tau.rule", RULE_MEAN),
            ("frac_absorbed", mc.frac_absorbed), ("frac_absorbed.rule", RULE_ABSORBED),
            ("max_tau", mc.max_tau),
            ("frac_terminated_by_cap", mc.frac_terminated_by_cap),
            ("frac_range_exit", mc.frac_range_exit),
            ("n_ok", mc.n_ok), ("n_horizon", mc.n_horizon), ("n_error", mc.n_error),
            ("max_projection_gap", mc.max_projection_gap),
            ("predicted_mean_tau", mc.predicted_mean_tau),
        ]
        if mode == "verify":
            rows.append(("z_score", mc.z_score))
        rows += [(f"engine.{k}", v) for k, v in sorted(mc.config.items())]
    rows += list(extra or [])
    return "".join(f"{k} = {_value(v)}\n" for k, v in rows)


def parse_report(text):
    """Report text back to a ``dict`` (values through the config evaluator)."""
    from .config import parse_value
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip() and not line.lstrip().startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = parse_value(v, lineno)
    return out


def cdf_overlay(rho: TargetLaw, empirical, max_rows=2000):
    """Rows ``(x, F_target, F_empirical)`` at (a thinned set of) sample points."""
    x = np.sort(np.asarray(empirical, dtype=float))
    pts = np.unique(x)
    if pts.size > max_rows:
        pts = pts[np.linspace(0, pts.size - 1, max_rows).round().astype(int)]
    F_emp = np.searchsorted(x, pts, side="right") / x.size
    return np.column_stack([pts, np.asarray(rho.cdf(pts), dtype=float), F_emp])


def tau_histogram(tau, bins=50):
    """Rows ``(bin_lo, bin_hi, count)``."""
    tau = np.asarray(tau, dtype=float)
    tau = tau[np.isfinite(tau)]
    if tau.size == 0:
        return []
    counts, edges = np.histogram(tau, bins=bins)
    return [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, int) else fmt(float(v)) for v in row])


def emit_report(verdict, mc_report, paths_csv=True, out_dir=".", mode="classify", rho=None,
                qtable=None, maps_table=None, extra=None):
    """Write the report and its companion CSV files into ``out_dir``.

    Parameters
    ----------
    verdict : EmbeddabilityVerdict or None
    mc_report : EmbeddingReport or None
        Monte Carlo results; when present the paths CSV, CDF overlay (needs
        ``rho``) and ``tau`` histogram are written too.
    paths_csv : bool
        Whether to write the per-path CSV.
    qtable, maps_table : ndarray, optional
        Rows for ``qtable.csv`` (x, q, q_prime) and ``maps.csv`` (t, x, b, b_x).

    Returns
    -------
    dict
        Kind to written path.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = {}

    def path(kind):
        written[kind] = os.path.join(out_dir, FILES[kind])
        return written[kind]

    with open(path("report"), "w") as fh:
        fh.write(format_report(verdict, mc_report, mode, extra))
    if mc_report is not None:
        if paths_csv:
            write_paths_csv(mc_report.records, path("paths"))
        if rho is not None and mc_report.empirical.size:
            write_rows(path("cdf"), ("x", "F_target", "F_empirical"),
                       cdf_overlay(rho, mc_report.empirical))
        tau = [r.tau for r in mc_report.records if r.status == "ok"]
        write_rows(path("hist"), ("bin_lo", "bin_hi", "count"), tau_histogram(tau))
    if qtable is not None:
        write_rows(path("qtable"), ("x", "q", "q_prime"), qtable)
    if maps_table is not None:
        write_rows(path("maps"), ("t", "x", "b", "b_x"), maps_table)
    return written
