"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one PASS/FAIL line, printed at the end of the session.
The 10^4-path runs are shared between criteria 2, 3 and 6, and the first 100
paths of each are re-simulated with their ``(t, M)`` traces for criterion 7.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepembed import classifier as C
from sepembed import engine, feller, targets
from sepembed.model import DiffusionSpec, build_scale, to_martingale
from sepembed.presets import get_preset, preset_registry

RESULTS = {}
N_PATHS = 10_000
DT = 1e-4
HALF_LN2 = math.log(2.0) / 2.0


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def cases():
    bessel = get_preset("bessel3")
    drift = get_preset("bm_drift", gamma=1.0, theta=1.0)
    return {
        "a_uniform_bm": (get_preset("bm"), targets.uniform(-1.0, 1.0)),
        "b_bessel3": (bessel, targets.atoms([(0.5, 1 / 3), (2.0, 2 / 3)])),
        "c_bm_drift": (drift, targets.atoms([(-HALF_LN2, 1 / 3), (HALF_LN2, 2 / 3)])),
    }


@pytest.fixture(scope="module")
def problems():
    return {k: engine.prepare(p.spec, rho) for k, (p, rho) in cases().items()}


@pytest.fixture(scope="module")
def runs(problems):
    cfg = engine.EngineConfig(n_paths=N_PATHS, dt=DT, seed=0)
    return {k: engine.run_monte_carlo(prob, cfg) for k, prob in problems.items()}


def test_criterion_1_identity_embedding():
    t0 = time.perf_counter()
    prob = engine.prepare(get_preset("bm").spec, targets.gaussian(0.0, 1.0))
    rep = engine.run_monte_carlo(prob, engine.EngineConfig(n_paths=1000, dt=DT, seed=0))
    elapsed = time.perf_counter() - t0
    tau = np.array([r.tau for r in rep.records])
    worst = float(np.max(np.abs(tau - 1.0)))
    ok = worst <= 1e-3 and rep.ks_statistic <= 0.06 and elapsed < 60 and rep.n_ok == 1000
    record(1, ok, f"max|tau-1|={worst:.2e} KS={rep.ks_statistic:.4f} runtime={elapsed:.1f}s")
    assert ok


def test_criterion_2_distributional_correctness(runs):
    ks = {k: r.ks_statistic for k, r in runs.items()}
    complete = all(r.n_ok == N_PATHS for r in runs.values())
    ok = complete and all(v <= 0.03 for v in ks.values())
    record(2, ok, " ".join(f"{k}:KS={v:.4f}" for k, v in ks.items()))
    assert ok


# registered (preset, example target) pairs not among the criterion 2 runs
EXTRA_MEAN_CASES = {("bm", "two_point"): (2000, 1e-4), ("reciprocal_bessel3", "time_one"): (400, 1e-3)}
# the target is the law of the process at a fixed time T, so tau = T on every path
# and the standard error vanishes; these are covered by criterion 1 instead
DETERMINISTIC = {("bm", "normal"), ("ou", "normal")}
CRITERION_2_PAIRS = {("bm", "uniform"): "a_uniform_bm", ("bessel3", "two_point"): "b_bessel3",
                     ("bm_drift", "two_point"): "c_bm_drift"}


def test_criterion_3_mean_stopping_time(runs):
    lines, ok = [], True
    for key, want in (("b_bessel3", 7 / 12), ("c_bm_drift", math.log(2) / 6)):
        r = runs[key]
        tol = max(0.05 * want, 3 * r.stderr_tau)
        ok &= abs(r.mean_tau - want) <= tol
        lines.append(f"{key}:mean={r.mean_tau:.5f}/{want:.5f}(tol {tol:.4f})")
    # E[tau] = int q dnu for every preset target with finite int q, within three standard errors
    finite = set()
    for name in preset_registry():
        preset = get_preset(name)
        for tname, rho in preset.targets.items():
            prob = engine.prepare(preset.spec, rho)
            pred = engine.predicted_mean(prob)
            if pred is not None and math.isfinite(pred):
                finite.add((name, tname))
    assert finite == set(CRITERION_2_PAIRS) | set(EXTRA_MEAN_CASES) | DETERMINISTIC
    checked = {pair: runs[key] for pair, key in CRITERION_2_PAIRS.items()}
    for (name, tname), (n, dt) in EXTRA_MEAN_CASES.items():
        preset = get_preset(name)
        prob = engine.prepare(preset.spec, preset.targets[tname])
        checked[(name, tname)] = engine.run_monte_carlo(prob, engine.EngineConfig(n_paths=n, dt=dt,
                                                                                  seed=0))
    for (name, tname), r in sorted(checked.items()):
        ok &= r.n_ok == r.config["n_paths"]
        ok &= abs(r.mean_tau - r.predicted_mean_tau) <= 3 * r.stderr_tau
        lines.append(f"{name}/{tname}:z={r.z_score:.2f}")
    record(3, ok, " ".join(lines))
    assert ok


def test_criterion_4_q_closed_forms():
    errs = {}
    p = get_preset("bm_drift", gamma=1.0, theta=1.0)
    model = to_martingale(p.spec, build_scale(p.spec, use_closed_form=False))
    m = np.linspace(-3.0, 0.49, 100)
    closed = -(np.log1p(-2.0 * m) / 2.0 + m)
    got = feller.q_eval(model, 0.0, m)
    errs["bm_drift"] = float(np.max(np.abs(got - closed) / np.maximum(np.abs(closed), 1e-300)
                                    * (closed != 0)))
    p = get_preset("bessel3")
    model = to_martingale(p.spec, build_scale(p.spec, use_closed_form=False))
    x = np.linspace(-5.0, 0.99, 100)
    closed = (1.0 - x) ** -2 / 3.0 - 2.0 * x / 3.0 - 1.0 / 3.0
    got = feller.q_eval(model, 0.0, x)
    errs["bessel3"] = float(np.max(np.abs(got - closed) / np.maximum(np.abs(closed), 1e-300)
                                   * (closed != 0)))
    ok = all(e <= 1e-6 for e in errs.values())
    record(4, ok, " ".join(f"{k}:max_rel_err={v:.2e}" for k, v in errs.items()))
    assert ok


_TRUTH = {}


@settings(max_examples=5, deadline=None)
@given(st.floats(0.05, 0.8))
def test_criterion_5i_bounded_interval_not_centred(shift):
    spec = DiffusionSpec(drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                         volatility=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                         start=0.0, state_lo=-1.0, state_hi=1.0)
    v = C.classify(spec, targets.atoms([(shift - 0.04, 0.5), (shift + 0.04, 0.5)]))
    good = v.exists == C.NO
    _TRUTH["i"] = _TRUTH.get("i", True) and good
    assert good


def test_criterion_5ii_bessel_strict_local_martingale():
    p = get_preset("bessel3")
    rep = feller.classify_boundaries(to_martingale(p.spec, build_scale(p.spec)))
    good = (not rep.is_true_martingale) and (not rep.r_reachable)
    _TRUTH["ii"] = good
    assert good


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 1.5))
def test_criterion_5iii_not_integrable_outside_l1(df):
    v = C.classify(get_preset("bm").spec, targets.student_t(df))
    good = v.integrable_possible == C.NO
    _TRUTH["iii"] = _TRUTH.get("iii", True) and good
    assert good


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 4.0))
def test_criterion_5iv_two_point_in_bm(a):
    v = C.classify(get_preset("bm").spec, targets.two_point(a))
    good = (v.bounded.kind == "impossible" and v.integrable_possible == C.YES
            and abs(v.predicted_E_tau - a * a) <= 1e-9 * a * a)
    _TRUTH["iv"] = _TRUTH.get("iv", True) and good
    assert good


def test_criterion_5_summary():
    parts = ("i", "ii", "iii", "iv")
    ok = all(_TRUTH.get(k, False) for k in parts)
    record(5, ok, " ".join(f"({k})={'ok' if _TRUTH.get(k) else 'FAIL'}" for k in parts))
    assert ok


def test_criterion_6_bounded_coherence(runs):
    spec = get_preset("bm").spec
    model = to_martingale(spec, build_scale(spec))
    bd, _ = C.check_bounded_sufficient(model, None, targets.uniform(-1.0, 1.0))
    r = runs["a_uniform_bm"]
    tau = np.array([x.tau for x in r.records])
    frac = float(np.mean(tau <= 2 / math.pi + 1e-3))
    ok = (bd.kind == "bounded_by" and abs(bd.T - 2 / math.pi) <= 1e-6 and frac == 1.0
          and tau.size == N_PATHS)
    record(6, ok, f"{bd} frac(tau<=2/pi+1e-3)={frac} max_tau={tau.max():.6f}")
    assert ok


def test_criterion_7_solver_cross_validation(problems, runs):
    cfg = engine.EngineConfig(n_paths=N_PATHS, dt=DT, seed=0)
    worst, ok = {}, True
    for key, prob in problems.items():
        recs, traces = engine.simulate_paths(prob, cfg, path_ids=np.arange(100), record=True)
        # tracing must not perturb the simulation
        ok &= recs == runs[key].records[:100]
        gaps = []
        for r, tr in zip(recs, traces):
            t = np.array([a for a, _ in tr])
            m = np.array([b for _, b in tr])
            a = engine.picard_delta(prob.maps, prob.model, t, m, level=cfg.delta_cap)
            gaps.append(abs(a - r.tau) / DT)
        worst[key] = float(np.max(gaps))
        ok &= worst[key] <= 10.0
    record(7, ok, " ".join(f"{k}:max_gap={v:.3f}dt" for k, v in worst.items()))
    assert ok


def test_criterion_8_determinism(tmp_path):
    cfg = tmp_path / "det.cfg"
    cfg.write_text('preset = "bessel3"\ntarget.atoms = (0.5, 1/3), (2, 2/3)\n'
                   "engine.n_paths = 400\nengine.dt = 1e-3\nengine.chunk_size = 37\n"
                   "engine.seed = 21\n")
    outs = []
    for threads in ("1", "8", "1", "8"):
        out = tmp_path / f"out{len(outs)}_{threads}"
        env = {**os.environ, "SEP_THREADS": threads}
        proc = subprocess.run([sys.executable, "-m", "sepembed.cli", "verify", str(cfg),
                               "--out-dir", str(out), "--quiet"], env=env, capture_output=True)
        assert proc.returncode == 0, proc.stderr.decode()
        outs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))})
    ok = all(o == outs[0] for o in outs) and len(outs[0]) == 4
    record(8, ok, f"files={sorted(outs[0])} identical across SEP_THREADS=1,8 (x2)")
    assert ok
