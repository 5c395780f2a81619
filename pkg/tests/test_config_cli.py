import json
import os

import numpy as np
import pytest

from civr import ConfigError, load_config
from civr.cli import main
from civr.config import DEFAULT_CONFIG, apply_overrides
from civr.runner import run_propagate, run_scan_width

SMALL = """
[times]
T = 0.25

[civr]
a = 1.0
n_q1 = 8
n_p1 = 10

[zf_grid]
n_q = 10
n_p = 12

[x_grid]
n_x = 128

[oracle]
n_x = 256
dt = 0.002

[report]
figures = false
"""


def write_small(tmp_path, extra=""):
    path = tmp_path / "small.ini"
    path.write_text(SMALL + extra)
    return str(path)


# -- config parsing -------------------------------------------------------------


def test_defaults_reproduce_benchmark_setup():
    cfg = load_config()
    assert cfg.quartic.Omega == 1.0
    assert cfg.quartic.lam == 0.4
    assert cfg.quartic.scaling.b == 1.0 and cfg.quartic.scaling.hbar == 1.0
    assert cfg.q0 == 0.0 and cfg.p0 == -2.0
    assert cfg.times == [1.0, 2.5, 4.5, 6.5, 8.5]
    assert cfg.a_values[0] == 1.5 and cfg.a_values[-1] == 0.4
    assert cfg.c == 1.0
    assert cfg.mode == "smooth"
    assert (cfg.grid1.q.lo, cfg.grid1.q.hi, cfg.grid1.q.n) == (-3.0, 3.0, 30)
    assert (cfg.grid1.p.lo, cfg.grid1.p.hi, cfg.grid1.p.n) == (-4.0, 4.0, 40)
    assert (cfg.zf_grid.q.n, cfg.zf_grid.p.n) == (40, 60)
    assert cfg.dt == 1e-3


def test_user_file_overrides_defaults(tmp_path):
    cfg = load_config(write_small(tmp_path))
    assert cfg.times == [0.25]
    assert cfg.a_values == [1.0]
    assert cfg.grid1.q.n == 8
    # untouched values fall back to the defaults
    assert cfg.quartic.lam == 0.4


def test_single_width_broadcasts_over_times(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[times]\nT = 1.0, 2.0, 3.0\n\n[civr]\na = 0.9\n")
    cfg = load_config(str(path))
    assert cfg.a_values == [0.9, 0.9, 0.9]


def test_width_count_mismatch_reports_file_and_line(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[times]\nT = 1.0, 2.0\n\n[civr]\na = 1.0, 2.0, 3.0\n")
    with pytest.raises(ConfigError) as err:
        load_config(str(path))
    msg = str(err.value)
    assert "bad.ini:4" in msg and "[civr] a" in msg


def test_bad_number_reports_line(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[initial]\nq0 = zero\n")
    with pytest.raises(ConfigError) as err:
        load_config(str(path))
    assert "bad.ini:2" in str(err.value)


def test_mode_validation(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[civr]\nmode = fuzzy\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_overrides_apply_on_top():
    text = apply_overrides(DEFAULT_CONFIG, ["run.workers=3", "civr.c=2.5"])
    assert "workers = 3" in text
    cfg = load_config(None, overrides=None)
    assert cfg.workers == 1


def test_override_requires_section_key_form():
    with pytest.raises(ConfigError):
        apply_overrides(DEFAULT_CONFIG, ["workers=3"])


def test_missing_file_is_config_error():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/path.ini")


# -- pipelines ------------------------------------------------------------------


def test_propagate_writes_all_artifacts(tmp_path):
    cfg = load_config(write_small(tmp_path))
    out = tmp_path / "out"
    manifest = run_propagate(cfg, str(out))
    assert (out / "propagator_T0.25.csv").exists()
    assert (out / "wavefunction_T0.25.csv").exists()
    assert (out / "contributions_T0.25.csv").exists()
    assert (out / "manifest.json").exists()
    assert (out / "timings.json").exists()
    assert (out / "resolved_config.ini").exists()
    entry = manifest["results"]["0.25"]
    assert entry["accepted"] + entry["rejected"] + entry["invalid"] \
        + entry["caustic"] == entry["n_trajectories"]
    assert 0.0 < entry["norm_before_renormalization"] < 2.0
    # manifest carries every knob needed to reproduce the run
    assert manifest["config"]["run"]["dt"] == cfg.dt
    assert manifest["config"]["civr"]["grid1"]["n_q"] == 8


def test_propagate_outputs_are_reproducible(tmp_path):
    cfg = load_config(write_small(tmp_path))
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    run_propagate(cfg, str(out1))
    run_propagate(cfg, str(out2))
    for name in ("propagator_T0.25.csv", "wavefunction_T0.25.csv",
                 "contributions_T0.25.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_propagate_worker_count_does_not_change_outputs(tmp_path):
    base = write_small(tmp_path)
    cfg1 = load_config(base)
    cfg4 = load_config(base, overrides=["run.workers=4"])
    out1, out4 = tmp_path / "w1", tmp_path / "w4"
    run_propagate(cfg1, str(out1))
    run_propagate(cfg4, str(out4))
    for name in ("propagator_T0.25.csv", "wavefunction_T0.25.csv",
                 "contributions_T0.25.csv"):
        assert (out1 / name).read_bytes() == (out4 / name).read_bytes()


def test_propagate_empty_times_is_noop_with_warning(tmp_path, caplog):
    path = tmp_path / "cfg.ini"
    path.write_text(SMALL + "\n[times]\nT =\n")
    cfg = load_config(str(path))
    assert cfg.times == []
    out = tmp_path / "out"
    manifest = run_propagate(cfg, str(out))
    assert "warning" in manifest
    assert (out / "manifest.json").exists()


def test_compare_reports_fidelity(tmp_path):
    rc = main(["compare", "-c", write_small(tmp_path),
               "-o", str(tmp_path / "cmp")])
    assert rc == 0
    report = json.loads((tmp_path / "cmp" / "compare_report.json").read_text())
    assert report["0.25"]["fidelity"] > 0.9
    assert 0.0 < report["0.25"]["norm_before_renormalization"] < 2.0
    assert 0.0 < report["0.25"]["accepted_fraction"] <= 1.0


def test_scan_width_single_step_degenerates_to_compare(tmp_path):
    cfg = load_config(write_small(tmp_path))
    out = tmp_path / "scan"
    res = run_scan_width(cfg, str(out), T=0.25, a_lo=1.0, a_hi=1.0, steps=1)
    assert res["a_values"] == [1.0]
    assert res["best_a"] == 1.0
    assert res["best_fidelity"] > 0.9
    assert (out / "scan_width.csv").exists()


def test_cli_propagate_and_figures(tmp_path):
    cfgf = write_small(tmp_path)
    out = tmp_path / "figs"
    rc = main(["propagate", "-c", cfgf, "-o", str(out),
               "--set", "report.figures=true"])
    assert rc == 0
    assert (out / "wavefunction_T0.25.png").exists()
    assert (out / "contributions_T0.25.png").exists()


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[civr]\nmode = fuzzy\n")
    rc = main(["propagate", "-c", str(bad), "-o", str(tmp_path / "x")])
    assert rc == 2


def test_cli_numerical_failure_exit_code(tmp_path):
    # an impossible cutoff leaves no contributing trajectories
    rc = main(["propagate", "-c", write_small(tmp_path),
               "-o", str(tmp_path / "nf"), "--set", "civr.c=-1e12"])
    assert rc == 3


def test_cli_trajectories_dump(tmp_path):
    out = tmp_path / "traj"
    rc = main(["trajectories", "-c", write_small(tmp_path), "-o", str(out),
               "--launch", "0.5,-1.5", "--stride", "5"])
    assert rc == 0
    files = sorted(os.listdir(out))
    assert "trajectory_q1_0.5_p1_-1.5.csv" in files
    header = (out / "trajectory_q1_0.5_p1_-1.5.csv").read_text().splitlines()[0]
    assert header == "t,Q1,Q2,P1,P2,re_S,im_S,re_Mvv,im_Mvv,xi"


def test_cli_trajectories_singular_launch_exit_code(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text(SMALL + "\n[times]\nT = 8.5\n")
    rc = main(["trajectories", "-c", str(path), "-o", str(tmp_path / "sing"),
               "--launch", "3.0,4.0"])
    assert rc == 3


def test_cli_eigen(tmp_path):
    out = tmp_path / "eig"
    rc = main(["eigen", "-c", write_small(tmp_path), "-o", str(out),
               "--states", "2"])
    assert rc == 0
    data = json.loads((out / "eigen.json").read_text())
    assert abs(data["energies"][0] - 0.559) < 0.002


def test_dump_trajectories_flag(tmp_path):
    cfgf = write_small(tmp_path)
    out = tmp_path / "dumps"
    rc = main(["propagate", "-c", cfgf, "-o", str(out),
               "--set", "run.dump_trajectories=true",
               "--set", "run.dump_stride=50"])
    assert rc == 0
    dump_dir = out / "trajectories"
    assert (dump_dir / "index.csv").exists()
    assert (dump_dir / "traj_00000.csv").exists()
    n_traj = 8 * 10
    assert len(list(dump_dir.iterdir())) == n_traj + 1
