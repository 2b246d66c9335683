import os

import numpy as np
import pytest

from sepembed.cli import main
from sepembed.report import parse_report


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_classify_exit_zero(tmp_path, capsys):
    cfg = write(tmp_path, 'preset = "bm"\ntarget.family = "uniform"\nclassify.T = 1\n')
    assert main(["classify", cfg, "--out-dir", str(tmp_path / "o"), "--quiet"]) == 0
    rep = parse_report(open(tmp_path / "o" / "report.txt").read())
    assert rep["mode"] == "classify" and rep["bounded_within_T"] == "yes"


def test_verify_writes_all_files(tmp_path):
    cfg = write(tmp_path, 'preset = "bm"\ntarget.family = "uniform"\nengine.n_paths = 50\n'
                          'engine.dt = 1e-3\n')
    out = tmp_path / "v"
    assert main(["verify", cfg, "--out-dir", str(out), "--seed", "3", "--dump-maps",
                 "--quiet"]) == 0
    assert sorted(os.listdir(out)) == ["cdf_overlay.csv", "maps.csv", "paths.csv", "report.txt",
                                       "tau_hist.csv"]
    rep = parse_report(open(out / "report.txt").read())
    assert rep["engine.seed"] == 3 and "z_score" in rep


def test_qtable(tmp_path):
    cfg = write(tmp_path, 'preset = "bessel3"\ntarget.atoms = (0.5, 1/3), (2, 2/3)\n')
    out = tmp_path / "q"
    assert main(["qtable", cfg, "--range=-1:0.5:4", "--out-dir", str(out), "--quiet"]) == 0
    data = np.genfromtxt(out / "qtable.csv", delimiter=",", names=True)
    x = data["x"]
    np.testing.assert_allclose(data["q"], (1 - x) ** -2 / 3 - 2 * x / 3 - 1 / 3, atol=1e-14)
    assert main(["qtable", cfg, "--out-dir", str(out), "--quiet"]) == 2


def test_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, 'preset = "bm"\npreset = "bm"\n')
    assert main(["classify", bad]) == 2
    assert "duplicate key" in capsys.readouterr().err
    assert main(["classify", str(tmp_path / "missing.cfg")]) == 2
    impossible = write(tmp_path, 'preset = "bessel3"\ntarget.atoms = (0.5, 0.5), (2, 0.5)\n',
                       "imp.cfg")
    assert main(["embed", impossible, "--out-dir", str(tmp_path), "--quiet"]) == 2
    # a horizon too short for any path: flagged in the report, not an error
    short = write(tmp_path, 'preset = "bm"\ntarget.family = "uniform"\nengine.n_paths = 2\n'
                            'engine.max_time = 1e-3\nengine.dt = 1e-3\n', "short.cfg")
    assert main(["embed", short, "--out-dir", str(tmp_path / "s"), "--quiet"]) == 0
    rep = parse_report(open(tmp_path / "s" / "report.txt").read())
    assert rep["n_horizon"] == 2
