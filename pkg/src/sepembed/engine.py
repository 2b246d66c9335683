"""Monte Carlo embedding: simulate ``M`` and integrate the inverse time change.

Along each path the clock ``Delta`` solves
``Delta'(s) = eta(M_s)^2 / b_x(Delta, B(Delta, M_s))^2`` and the path stops
when ``Delta`` reaches 1. Paths run in lockstep chunks of fixed size, each
with its own counter-based normal stream keyed by ``(seed, path_id)``, so
results do not depend on the number of worker threads.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import ndtr

from . import feller
from .bass import BassMaps, build_h, build_maps
from .errors import HorizonExceeded, NoConvergence, NoEmbeddingExists, SEPError
from .model import (DiffusionSpec, MartingaleModel, ScaleMap, TargetLaw, build_scale,
                    pushforward_target, target_mean_in_scale, to_martingale)
from .stats import ks_statistic, mean_stderr, target_cdf_pair

CSV_HEADER = ("path_id", "tau", "x_tau", "m_tau", "terminal_delta", "absorbed", "steps")


@dataclass(frozen=True)
class EngineConfig:
    """Simulation parameters.

    ``dt`` is the base step in model time; steps are halved (down to
    ``dt / 2**max_halvings``) until the increment of ``Delta`` is at most
    ``max_delta_step``. ``scheme`` is ``"exact"`` (preset transition sampler,
    falling back to Euler when there is none) or ``"euler"``.
    """

    n_paths: int = 10_000
    dt: float = 1e-4
    max_time: float = 100.0
    delta_cap: float = 1.0 - 1e-6
    max_delta_step: float = 1e-3
    seed: int = 0
    scheme: str = "exact"
    max_halvings: int = 40
    chunk_size: int = 8192
    centred_tol: float = 1e-8

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.delta_cap < 1:
            raise ValueError("delta_cap must lie in (0, 1)")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.scheme not in ("exact", "euler"):
            raise ValueError("scheme must be 'exact' or 'euler'")


@dataclass
class StopRecord:
    path_id: int
    tau: float
    x_tau: float
    m_tau: float
    terminal_delta: float
    absorbed: bool
    steps: int
    hit_phase: str = "direct"
    status: str = "ok"  # ok | horizon | error
    stop: str = "cap"  # cap | range
    m_raw: float = math.nan
    phase1_time: float = 0.0


@dataclass(frozen=True)
class EmbeddingProblem:
    """Everything a simulation needs, derived once from ``(spec, rho)``."""

    spec: DiffusionSpec
    scale: ScaleMap
    model: MartingaleModel
    rho: TargetLaw
    nu: TargetLaw
    maps: BassMaps
    h_rho: object = field(repr=False)
    nu_star: float = 0.0

    @property
    def centred(self):
        return abs(self.nu_star - self.model.start) <= 1e-8


def prepare(spec: DiffusionSpec, rho: TargetLaw, scale: Optional[ScaleMap] = None,
            maps: Optional[BassMaps] = None) -> EmbeddingProblem:
    scale = build_scale(spec) if scale is None else scale
    model = to_martingale(spec, scale)
    nu = pushforward_target(rho, scale)
    nu_star = float(target_mean_in_scale(rho, scale))
    if abs(nu_star) <= 1e-12 * (1.0 + abs(nu_star)):
        nu_star = 0.0
    maps = build_maps(nu) if maps is None else maps
    return EmbeddingProblem(spec=spec, scale=scale, model=model, rho=rho, nu=nu, maps=maps,
                            h_rho=build_h(rho), nu_star=nu_star)


# ----------------------------------------------------------------------------
# the clock


def delta_rate(maps: BassMaps, model: MartingaleModel, delta, m, x0=None, eta=None):
    """``(Delta', B(Delta, M))``; the rate is ``inf`` where ``M`` leaves the range of ``b``."""
    B = maps.B(delta, m, x0, strict=False)
    eta = model.eta_at(m) if eta is None else eta
    with np.errstate(all="ignore"):
        ok = np.isfinite(B)
        bx = maps.bx(delta, np.where(ok, B, 0.0))
        rate = np.where(ok, eta * eta / (bx * bx), math.inf)
    return rate, B


def step_delta(maps: BassMaps, model: MartingaleModel, state, dt, max_delta_step=1e-3,
               max_halvings=40, x0=None, eta=None):
    """One explicit step of the clock with adaptive dyadic halving.

    Parameters
    ----------
    state : tuple
        ``(s, M_s, Delta)``, scalars or arrays.
    dt : float
        Base step; the step used is ``dt / 2**k`` for the smallest ``k`` with
        ``Delta' * dt / 2**k <= max_delta_step`` (``k <= max_halvings``).

    Returns
    -------
    new_delta, dt_used, rate, B
    """
    _, m, delta = state
    rate, B = delta_rate(maps, model, np.asarray(delta, dtype=float), np.asarray(m, dtype=float),
                         x0, eta)
    with np.errstate(all="ignore"):
        k = np.ceil(np.log2(rate * (dt / max_delta_step)))
        k = np.where(k > 0, np.minimum(k, max_halvings), 0.0)
    dt_used = dt * np.exp2(-k)
    return delta + rate * dt_used, dt_used, rate, B


def _crossing_time(t, dt, delta, rate, level):
    """Time at which ``delta + rate * u`` reaches ``level`` and then 1, linearly extrapolated."""
    with np.errstate(all="ignore"):
        u = np.where(np.isfinite(rate) & (rate > 0), (level - delta) / rate, 0.0)
        tail = np.where(np.isfinite(rate) & (rate > 0), (1.0 - level) / rate, 0.0)
    return t + np.clip(u, 0.0, dt) + tail


def integrate_delta_on_path(maps, model, times, path, level=1.0):
    """Explicit-Euler clock on a fixed path ``(times, M)`` with ``M`` frozen per cell.

    Returns the time at which the clock reaches ``level``, or ``nan``.
    """
    times = np.asarray(times, dtype=float)
    path = np.asarray(path, dtype=float)
    delta = 0.0
    B = None
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        rate, B = delta_rate(maps, model, np.array(delta), np.array(path[k]), B)
        rate = float(rate)
        if not math.isfinite(rate):
            return float(times[k])
        if delta + rate * dt >= level:
            return float(times[k] + (level - delta) / rate)
        delta += rate * dt
    return math.nan


def picard_solve(maps, model, times, path, level=1.0, tol=1e-8, max_iter=1000, window=32):
    """Clock values on the path grid by Picard iteration.

    ``Delta_{n+1}(t) = 1 ^ (Delta(t_0) + int_{t_0}^t eta(M)^2 / b_x(Delta_n, B(Delta_n, M))^2 ds)``
    on successive windows of ``window`` cells, each started from the
    converged value at its left end, until the sup-norm change is below
    ``tol``. The integral uses the trapezoidal rule. Right next to an atom of
    the target the rate is so steep in ``Delta`` that the trapezoidal fixed
    point can cycle; such a window is redone with the left-point rule, whose
    iteration terminates after at most ``window + 1`` sweeps.

    Returns
    -------
    delta : ndarray
        Clock values (iteration stops once ``level`` is reached).
    n_fallback : int
        Number of windows that needed the left-point rule.
    """
    times = np.asarray(times, dtype=float)
    path = np.asarray(path, dtype=float)
    delta = np.zeros(times.size)
    B_all = np.full(times.size, math.nan)
    n_fallback = 0
    for a in range(0, times.size - 1, window):
        b = min(a + window, times.size - 1)
        sl = slice(a, b + 1)
        d, B = _picard_window(maps, model, times[sl], path[sl], delta[a], B_all[sl], tol,
                              max_iter, "trapezoid")
        if d is None:
            n_fallback += 1
            d, B = _picard_window(maps, model, times[sl], path[sl], delta[a], B_all[sl], tol,
                                  b - a + 2, "left")
            if d is None:
                raise NoConvergence(f"Picard iteration did not settle in {max_iter} iterations")
        delta[sl] = d
        B_all[sl] = B
        if d[-1] >= level:
            delta[b + 1:] = 1.0
            break
    return delta, n_fallback


def _picard_window(maps, model, t, m, d0, B, tol, max_iter, rule):
    h = np.diff(t)
    d = np.full(t.size, d0)
    for _ in range(max_iter):
        rate, B = delta_rate(maps, model, d, m, B)
        rate = np.where(np.isfinite(rate), rate, 1e300)
        with np.errstate(over="ignore", invalid="ignore"):
            cells = 0.5 * h * (rate[:-1] + rate[1:]) if rule == "trapezoid" else h * rate[:-1]
            new = np.minimum(1.0, d0 + np.concatenate([[0.0], np.cumsum(cells)]))
        change = np.max(np.abs(new - d))
        d = new
        if change < tol:
            return d, B
    return None, B


def picard_delta(maps, model, times, path, level=1.0, tol=1e-8, max_iter=1000, window=32):
    """Time ``a`` with ``Delta(a) = level`` from :func:`picard_solve`.

    If the grid ends first, the clock is extended linearly with ``M`` frozen
    at its last value, as the stepper does within its final step. An infinite
    rate there (``M`` at the edge of the target support) means the level is
    reached at the last grid time. ``nan`` when it cannot reach ``level``.
    """
    times = np.asarray(times, dtype=float)
    delta, _ = picard_solve(maps, model, times, path, level, tol, max_iter, window)
    a = crossing_from_grid(times, delta, level)
    if math.isnan(a):
        rate, _ = delta_rate(maps, model, np.array(delta[-1]), np.array(float(path[-1])))
        rate = float(rate)
        if rate == math.inf:
            a = float(times[-1])
        elif math.isfinite(rate) and rate > 0:
            a = float(times[-1] + (level - delta[-1]) / rate)
    return a


def crossing_from_grid(times, delta, level):
    """Linear interpolation of the first grid crossing of ``level``."""
    hit = np.nonzero(delta >= level)[0]
    if hit.size == 0:
        return math.nan
    k = hit[0]
    if k == 0:
        return float(times[0])
    d0, d1 = delta[k - 1], delta[k]
    return float(times[k - 1] + (times[k] - times[k - 1]) * (level - d0) / (d1 - d0))


# ----------------------------------------------------------------------------
# random streams


class _Normals:
    """Per-path Philox streams of standard normals, drawn in buffered blocks."""

    def __init__(self, seed, path_ids, width, block=512):
        self.gens = [np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=int(seed), spawn_key=(int(p),)))) for p in path_ids]
        self.width = width
        self.block = block
        self.buf = np.empty((len(self.gens), block, width))
        self.ptr = np.full(len(self.gens), block)

    def take(self, idx):
        stale = idx[self.ptr[idx] >= self.block]
        for i in stale:
            self.buf[i] = self.gens[i].standard_normal((self.block, self.width))
            self.ptr[i] = 0
        out = self.buf[idx, self.ptr[idx]]
        self.ptr[idx] += 1
        return out


# ----------------------------------------------------------------------------
# simulation


class _Chunk:
    """Lockstep state of a block of paths."""

    def __init__(self, prob: EmbeddingProblem, cfg: EngineConfig, path_ids, record=False):
        self.prob, self.cfg = prob, cfg
        model = prob.model
        stepper = model.stepper if cfg.scheme == "exact" else None
        self.stepper = stepper
        self.ids = np.asarray(path_ids)
        n = self.ids.size
        self.normals = _Normals(cfg.seed, self.ids, (stepper.n_normals if stepper else 1) + 1)
        self.x = np.full(n, float(prob.spec.start))
        self.m = np.full(n, float(model.start))
        self.t = np.zeros(n)
        self.delta = np.zeros(n)
        self.steps = np.zeros(n, dtype=np.int64)
        self.B = np.full(n, math.nan)
        self.phase1 = np.zeros(n)
        self.record = record
        self.trace = [[] for _ in range(n)] if record else None
        self.out = [None] * n
        self.active = np.arange(n)

    # -- process increments

    def _advance(self, idx, dt, eta=None):
        z = self.normals.take(idx)
        m = self.m[idx]
        eta = self.prob.model.eta_at(m) if eta is None else eta
        if self.stepper is not None:
            x_new = self.stepper.step(self.x[idx], dt, z[:, :-1])
            with np.errstate(all="ignore"):
                m_new = np.asarray(self.prob.scale.s(x_new), dtype=float)
        else:
            x_new = None
            m_new = m + eta * np.sqrt(dt) * z[:, 0]
        return m, m_new, x_new, eta, ndtr(z[:, -1])

    @staticmethod
    def _barrier(m, m_new, eta, dt, u, level, below):
        """Boolean hit flags and fractional hitting times for a level, bridge-corrected."""
        if not math.isfinite(level):
            return None, None
        with np.errstate(all="ignore"):
            crossed = (m_new <= level) if below else (m_new >= level)
            p = np.exp(-2.0 * (m - level) * (m_new - level) / (eta * eta * dt))
            hit = crossed | (u < p)
            if not hit.any():
                return None, None
            frac = np.where(crossed, (m - level) / (m - m_new), 0.5)
            frac = np.where((frac >= 0) & (frac <= 1), frac, 0.5)
        return hit, frac

    def _finish(self, i, tau, m_tau, x_tau, delta, stop, absorbed=False, status="ok"):
        prob = self.prob
        self.out[i] = StopRecord(
            path_id=int(self.ids[i]), tau=float(tau), x_tau=float(x_tau), m_tau=float(m_tau),
            terminal_delta=float(delta), absorbed=bool(absorbed), steps=int(self.steps[i]),
            hit_phase="after_hitting_nu_star" if self.phase1[i] > 0 or not prob.centred else "direct",
            status=status, stop=stop, m_raw=float(self.m[i]), phase1_time=float(self.phase1[i]))

    # -- phase 1: reach nu* from m

    def run_to_nu_star(self):
        prob, cfg = self.prob, self.cfg
        target = prob.nu_star
        idx = self.active
        while idx.size:
            dt = cfg.dt
            m, m_new, x_new, eta, u = self._advance(idx, dt)
            below = m > target
            none = (np.zeros(m.shape, dtype=bool), np.full(m.shape, 0.5))
            hit_lo, f_lo = self._barrier(m, m_new, eta, dt, u, target, True)
            hit_hi, f_hi = self._barrier(m, m_new, eta, dt, u, target, False)
            hit_lo, f_lo = (hit_lo, f_lo) if hit_lo is not None else none
            hit_hi, f_hi = (hit_hi, f_hi) if hit_hi is not None else none
            hit = np.where(below, hit_lo, hit_hi)
            frac = np.where(below, f_lo, f_hi)
            self.steps[idx] += 1
            self.t[idx] += np.where(hit, frac * dt, dt)
            keep = ~hit
            self.m[idx] = np.where(hit, target, m_new)
            if x_new is not None:
                self.x[idx] = np.where(hit, float(prob.scale.s_inv(np.array(target))), x_new)
            over = keep & (self.t[idx] > cfg.max_time)
            for i in idx[over]:
                self._finish(i, self.t[i], math.nan, math.nan, 0.0, "horizon", status="horizon")
            idx = idx[keep & ~over]
        self.phase1[:] = self.t
        self.active = np.array([i for i in self.active if self.out[i] is None], dtype=int)

    # -- phase 2: the centred construction

    def run_clock(self):
        prob, cfg = self.prob, self.cfg
        maps, model = prob.maps, prob.model
        lo_v, hi_v = maps.lo, maps.hi
        cap = cfg.delta_cap
        idx = self.active
        while idx.size:
            m = self.m[idx]
            d = self.delta[idx]
            eta = model.eta_at(m)
            d_new, dt, rate, B = step_delta(maps, model, (self.t[idx], m, d), cfg.dt,
                                            cfg.max_delta_step, cfg.max_halvings,
                                            x0=self.B[idx], eta=eta)
            if self.record:
                for j, i in enumerate(idx):
                    self.trace[i].append((self.t[i], m[j]))
            self.B[idx] = B
            # clock reaches the cap within this step
            crossing = d_new >= cap
            if np.any(crossing):
                ci = idx[crossing]
                tau = _crossing_time(self.t[ci], dt[crossing], d[crossing], rate[crossing], cap)
                Bc = B[crossing]
                m_tau = np.where(np.isfinite(Bc), maps.h(np.nan_to_num(Bc)), m[crossing])
                x_tau = np.where(np.isfinite(Bc), prob.h_rho(np.nan_to_num(Bc)),
                                 model.to_original(m[crossing]))
                self.steps[ci] += 1
                dtc = dt[crossing]
                for j, i in enumerate(ci):
                    if self.record:
                        self.trace[i].append((self.t[i] + dtc[j], m[crossing][j]))
                    self._finish(i, tau[j], m_tau[j], x_tau[j], cap, "cap")
            go = ~crossing
            if not go.all():
                idx, m, d, d_new, dt, rate, eta = (idx[go], m[go], d[go], d_new[go], dt[go],
                                                   rate[go], eta[go])
            if idx.size == 0:
                break
            m, m_new, x_new, eta, u = self._advance(idx, dt, eta)
            hit_lo, f_lo = self._barrier(m, m_new, eta, dt, u, lo_v, True)
            hit_hi, f_hi = self._barrier(m, m_new, eta, dt, u, hi_v, False)
            self.steps[idx] += 1
            if hit_lo is not None or hit_hi is not None:
                no = np.zeros(idx.shape, dtype=bool)
                hit_lo = no if hit_lo is None else hit_lo
                hit_hi = no if hit_hi is None else hit_hi
                exit_ = hit_lo | hit_hi
                frac = np.where(hit_lo, f_lo if f_lo is not None else 0.5,
                                f_hi if f_hi is not None else 0.5)
            else:
                exit_ = None
            if exit_ is not None:
                ei = idx[exit_]
                fr = frac[exit_]
                tau = self.t[ei] + fr * dt[exit_]
                dl = d[exit_] + rate[exit_] * fr * dt[exit_]
                at_lo = hit_lo[exit_]
                for j, i in enumerate(ei):
                    level = lo_v if at_lo[j] else hi_v
                    x_end = prob.rho.support_lo if at_lo[j] else prob.rho.support_hi
                    absorbed = level in (model.lo, model.hi)
                    self.m[i] = level
                    if self.record:
                        self.trace[i].append((tau[j], level))
                    self._finish(i, tau[j], level, x_end, min(dl[j], cap), "range", absorbed)
                go = ~exit_
                idx, m_new, d_new, dt = idx[go], m_new[go], d_new[go], dt[go]
                x_new = None if x_new is None else x_new[go]
            self.m[idx] = m_new
            if x_new is not None:
                self.x[idx] = x_new
            self.delta[idx] = d_new
            self.t[idx] += dt
            over = self.t[idx] > cfg.max_time
            if over.any():
                for i in idx[over]:
                    self._finish(i, self.t[i], math.nan, math.nan, self.delta[i], "horizon",
                                 status="horizon")
                idx = idx[~over]
        self.active = np.array([], dtype=int)


def _run_chunk(prob, cfg, path_ids, record=False):
    chunk = _Chunk(prob, cfg, path_ids, record)
    if not prob.centred:
        chunk.run_to_nu_star()
    chunk.run_clock()
    return chunk.out, chunk.trace


def _run_chunk_safe(prob, cfg, path_ids, record=False):
    """Run a chunk; if it fails, rerun its paths one by one and tally the failures."""
    try:
        return _run_chunk(prob, cfg, path_ids, record)
    except (SEPError, FloatingPointError, ValueError):
        out, trace = [], []
        for p in path_ids:
            try:
                o, tr = _run_chunk(prob, cfg, [p], record)
                out.extend(o)
                trace.extend(tr or [None])
            except (SEPError, FloatingPointError, ValueError) as exc:
                out.append(StopRecord(path_id=int(p), tau=math.nan, x_tau=math.nan, m_tau=math.nan,
                                      terminal_delta=math.nan, absorbed=False, steps=0,
                                      status="error", stop=type(exc).__name__))
                trace.append(None)
        return out, (trace if record else None)


def worker_count():
    """Worker threads from ``SEP_THREADS`` (default: all cores)."""
    env = os.environ.get("SEP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def simulate_paths(prob: EmbeddingProblem, cfg: EngineConfig, path_ids=None, record=False,
                   threads=None):
    """StopRecords (and optionally ``(t, M)`` traces) for the given path ids, in order."""
    ids = np.arange(cfg.n_paths) if path_ids is None else np.asarray(path_ids)
    chunks = [ids[k:k + cfg.chunk_size] for k in range(0, ids.size, cfg.chunk_size)]
    threads = worker_count() if threads is None else threads
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_chunk_safe(prob, cfg, c, record), chunks))
    else:
        results = [_run_chunk_safe(prob, cfg, c, record) for c in chunks]
    records, traces = [], []
    for out, tr in results:
        records.extend(out)
        if record:
            traces.extend(tr)
    return (records, traces) if record else records


def simulate_centred(prob: EmbeddingProblem, cfg: EngineConfig, path_id=0) -> StopRecord:
    """One path of the centred construction; requires ``nu* = m``."""
    if not prob.centred:
        raise NoEmbeddingExists("target is not centred; use simulate_noncentred")
    rec = _run_chunk(prob, cfg, [path_id])[0][0]
    if rec.status == "horizon":
        raise HorizonExceeded(f"path {path_id} passed max_time={cfg.max_time}")
    return rec


def simulate_noncentred(prob: EmbeddingProblem, cfg: EngineConfig, path_id=0) -> StopRecord:
    """One path of the composite time: hit ``nu*``, then run the construction from there."""
    from .classifier import check_existence
    if check_existence(prob.model, prob.nu_star) != "yes":
        raise NoEmbeddingExists("existence conditions fail for this target")
    chunk = _Chunk(prob, cfg, [path_id])
    chunk.run_to_nu_star()
    chunk.run_clock()
    rec = chunk.out[0]
    if rec.status == "horizon":
        raise HorizonExceeded(f"path {path_id} passed max_time={cfg.max_time}")
    return rec


# ----------------------------------------------------------------------------
# aggregation


@dataclass
class EmbeddingReport:
    records: List[StopRecord] = field(repr=False)
    empirical: np.ndarray = field(repr=False)
    ks_statistic: float
    mean_tau: float
    stderr_tau: float
    max_tau: float
    frac_absorbed: float
    frac_terminated_by_cap: float
    frac_range_exit: float
    n_ok: int
    n_horizon: int
    n_error: int
    predicted_mean_tau: Optional[float]
    max_projection_gap: float
    config: dict

    @property
    def z_score(self):
        if self.predicted_mean_tau is None or not math.isfinite(self.predicted_mean_tau):
            return None
        if not self.stderr_tau > 0:
            return math.inf if self.mean_tau != self.predicted_mean_tau else 0.0
        return abs(self.mean_tau - self.predicted_mean_tau) / self.stderr_tau


def predicted_mean(prob: EmbeddingProblem) -> Optional[float]:
    """``int q dnu`` (centred) or the composite mean; ``None`` when infinite."""
    try:
        q = feller.make_q(prob.model)
        val = feller.composite_mean_time(q, prob.nu, 0.0 if prob.centred else prob.nu_star)
    except SEPError:
        return None
    return val if math.isfinite(val) else None


def aggregate(prob: EmbeddingProblem, records: List[StopRecord], cfg: EngineConfig,
              predicted=None) -> EmbeddingReport:
    ok = [r for r in records if r.status == "ok"]
    n = len(records)
    tau = np.array([r.tau for r in ok])
    m_tau = np.array([r.m_tau for r in ok])
    mean, se = mean_stderr(tau)
    cdf, left = target_cdf_pair(prob.nu)
    ks = ks_statistic(m_tau, cdf, left) if ok else math.nan
    gaps = [abs(r.m_tau - r.m_raw) for r in ok if r.stop == "cap"]
    return EmbeddingReport(
        records=records, empirical=np.sort(np.array([r.x_tau for r in ok])), ks_statistic=ks,
        mean_tau=mean, stderr_tau=se, max_tau=float(np.max(tau)) if ok else math.nan,
        frac_absorbed=sum(r.absorbed for r in ok) / n,
        frac_terminated_by_cap=sum(r.stop == "cap" for r in ok) / n,
        frac_range_exit=sum(r.stop == "range" for r in ok) / n,
        n_ok=len(ok), n_horizon=sum(r.status == "horizon" for r in records),
        n_error=sum(r.status == "error" for r in records), predicted_mean_tau=predicted,
        max_projection_gap=float(max(gaps)) if gaps else 0.0, config=asdict(cfg))


def run_monte_carlo(prob: EmbeddingProblem, cfg: EngineConfig, threads=None) -> EmbeddingReport:
    """Simulate ``cfg.n_paths`` paths and aggregate them into an :class:`EmbeddingReport`."""
    from .classifier import check_existence
    if check_existence(prob.model, prob.nu_star) != "yes":
        raise NoEmbeddingExists("existence conditions fail for this target")
    records = simulate_paths(prob, cfg, threads=threads)
    return aggregate(prob, records, cfg, predicted_mean(prob))


def fmt(v):
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_paths_csv(records: List[StopRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.path_id, fmt(r.tau), fmt(r.x_tau), fmt(r.m_tau), fmt(r.terminal_delta),
                        fmt(r.absorbed), r.steps])
