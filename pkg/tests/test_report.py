import numpy as np
import pytest

from sepembed import classifier, engine, targets
from sepembed.presets import get_preset
from sepembed.report import cdf_overlay, emit_report, format_report, parse_report, tau_histogram


@pytest.fixture(scope="module")
def run():
    p = get_preset("bm")
    rho = targets.uniform(-1.0, 1.0)
    prob = engine.prepare(p.spec, rho)
    verdict = classifier.classify(p.spec, rho, {"scale": prob.scale, "preset": p})
    mc = engine.run_monte_carlo(prob, engine.EngineConfig(n_paths=200, dt=1e-3, seed=4))
    return rho, verdict, mc


def test_classify_only_report_has_no_mc_fields(run):
    rho, verdict, _ = run
    rep = parse_report(format_report(verdict, None, "classify"))
    assert rep["existence"] == "yes" and rep["integrable"] == "yes"
    assert rep["bounded"].startswith("bounded_by(")
    assert "ks_statistic" not in rep and "mean_tau" not in rep
    assert rep["existence.rule"].startswith("existence:")


def test_verify_report_carries_z_score(run):
    rho, verdict, mc = run
    rep = parse_report(format_report(verdict, mc, "verify"))
    for key in ("ks_statistic", "mean_tau", "stderr_tau", "frac_absorbed", "predicted_E_tau"):
        assert key in rep and f"{key}.rule" in rep
    np.testing.assert_allclose(rep["z_score"], abs(mc.mean_tau - 1 / 3) / mc.stderr_tau,
                               rtol=1e-12)
    assert "z_score" not in parse_report(format_report(verdict, mc, "embed"))


def test_emitted_files_are_reproducible(tmp_path, run):
    rho, verdict, mc = run
    a = emit_report(verdict, mc, True, str(tmp_path / "a"), "verify", rho)
    b = emit_report(verdict, mc, True, str(tmp_path / "b"), "verify", rho)
    assert set(a) == {"report", "paths", "cdf", "hist"}
    for kind in a:
        assert open(a[kind], "rb").read() == open(b[kind], "rb").read()
    header = open(a["cdf"]).readline().strip()
    assert header == "x,F_target,F_empirical"
    assert open(a["hist"]).readline().strip() == "bin_lo,bin_hi,count"


def test_overlay_and_histogram():
    law = targets.uniform(0.0, 1.0)
    rows = cdf_overlay(law, [0.25, 0.5, 0.5, 0.75])
    np.testing.assert_allclose(rows, [[0.25, 0.25, 0.25], [0.5, 0.5, 0.75], [0.75, 0.75, 1.0]])
    hist = tau_histogram(np.linspace(0, 1, 101), bins=4)
    assert sum(c for _, _, c in hist) == 101 and hist[0][0] == 0.0 and hist[-1][1] == 1.0
