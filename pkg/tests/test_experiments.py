import csv
import json

import numpy as np
import pytest

from relaxctl import cli
from relaxctl import experiments as ex
from relaxctl.errors import ConfigError

SMALL = {"N": "3", "n_max": "5", "restricted_grid": "16"}


@pytest.fixture
def small(tmp_path):
    return ex.load_config(None, output_dir=str(tmp_path / "out"), **SMALL)


def test_config_file_with_comments_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# reference run\nN = 3\nalpha = 0.5  # range exponent\nsweep_h_x = 0.25:4:4\nsweep_alpha = 0.5, 2\n")
    cfg = ex.load_config(path, n_max="6")
    assert cfg.model.N == 3 and cfg.model.alpha == 0.5 and cfg.n_max == 6
    assert cfg.sweep_h_x == (0.25, 1.5, 2.75, 4.0)
    assert cfg.sweep_alpha == (0.5, 2.0)


@pytest.mark.parametrize("bad", [{"n_max": "1"}, {"n_min": "1"}, {"d_min": "2"}, {"typo": "1"},
                                 {"N": "1", "n_max": "5"}, {"slowdown_root_choice": "x"}, {"t_points": "abc"}])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ex.load_config(None, **bad)


def test_spectrum_reports_unique_steady_state(small):
    report = ex.run_spectrum(small)
    assert report["d_s"] == 1 and report["lambda_1"] == [0.0, 0.0]
    manifest = json.loads(open(f"{small.output_dir}/spectrum/manifest.json").read())
    assert manifest["assumed"]["initial_state"] == "all spins down"
    assert manifest["config"]["model"]["alpha"] == 1.0


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_speedup_outputs_parse(small):
    report = ex.run_speedup(small)
    assert report["n_star"] == 5
    out = f"{small.output_dir}/speedup"
    rows = read_rows(f"{out}/trajectories.csv")
    labels = {r["label"] for r in rows}
    assert labels == {"rho0"} | {f"perp_n{n}" for n in range(2, 6)}
    assert all(float(r["distance"]) > 0 for r in rows)
    ratios = read_rows(f"{out}/ratios.csv")
    assert float(ratios[0]["ratio"]) == 1.0
    for run in report["runs"]:
        assert run["relative_error"] < 0.1


def test_runs_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        cfg = ex.load_config(None, output_dir=str(tmp_path / f"o{k}"), **SMALL)
        ex.run_speedup(cfg)
        outs.append(tmp_path / f"o{k}" / "speedup")
    for name in ("trajectories.csv", "runs.csv", "spectrum.csv", "cost_n3.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_sweep_parallel_matches_serial(tmp_path):
    base = {"sweep_N": "2", "sweep_alpha": "1", "sweep_h_x": "0.5, 2", "sweep_J": "1", "sweep_n_max": "6"}
    serial = ex.load_config(None, output_dir=str(tmp_path / "a"), **base)
    parallel = ex.load_config(None, output_dir=str(tmp_path / "b"), workers="2", **base)
    rep, rows = ex.run_sweep(serial)
    ex.run_sweep(parallel)
    assert rep["points"] == 2 and not any(r["error"] for r in rows)
    a = (tmp_path / "a/sweep/sweep.csv").read_bytes()
    assert a == (tmp_path / "b/sweep/sweep.csv").read_bytes()
    assert read_rows(tmp_path / "a/sweep/sweep.csv")[0].keys() == set(ex.SWEEP_COLUMNS)


def test_sweep_point_records_failures(small, monkeypatch):
    def broken(*args, **kwargs):
        from relaxctl.errors import DefectiveLiouvillian
        raise DefectiveLiouvillian("synthetic")

    monkeypatch.setattr(ex, "diagonalize", broken)
    row = ex.sweep_point(small, 1.0, 1.0, 1.0)
    assert row["error"] == "DefectiveLiouvillian" and row["gain"] is None


def test_local_ops_report(small):
    report = ex.run_local_ops(small)
    assert len(report["fits"]) == 4
    assert report["annotations"]["d_min"] == 1e-3
    labels = {r["label"] for r in read_rows(f"{small.output_dir}/local_ops/trajectories.csv")}
    assert "geodesic_n5" in labels


def test_slowdown_report(small):
    report = ex.run_slowdown(small)
    assert report["root_choice"] == "plus"
    assert set(report["variants"]) == {"plus", "best"}
    assert report["kept_modes"][0] == 2


def test_distance_ratio_masks_floor():
    from relaxctl.dynamics import Trajectory

    t = np.array([0.5, 1.0, 2.0, 3.0])
    a = Trajectory(t, [1.0, 0.5, 1e-14, 1e-14])
    b = Trajectory(t, [0.5, 0.25, 1e-3, 1e-14])
    times, ratio = ex.distance_ratio(a, b, t_min=1.0)
    assert list(times) == [1.0] and list(ratio) == [2.0]


def test_cli_success_and_failure(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N = 2\nt_points = 60\n")
    code = cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o"), "--n", "4"])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["d_s"] == 1
    assert cli.main(["speedup", "--config", str(cfg), "--n", "1"]) == 2
    assert "ConfigError" in capsys.readouterr().err
    assert cli.main(["evolve", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert "FileNotFoundError" in capsys.readouterr().err
    code = cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "o"), "--n", "3", "--dmin", "0.01"])
    assert code == 0
    assert set(json.loads(capsys.readouterr().out)) == {"rho0", "perp_n3", "d_min"}


def test_cli_set_override(tmp_path, capsys):
    code = cli.main(["suppress", "--set", "N=2", "--set", "epsilon=1e-8", "--n", "3", "--out", str(tmp_path)])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["n"] == 3
    assert cli.main(["suppress", "--set", "N2"]) == 2


def test_weaker_decay_exponent_shows_cluster_then_gap(tmp_path):
    cfg = ex.load_config(None, alpha="0.5", output_dir=str(tmp_path))
    report = ex.run_spectrum(cfg)
    assert report["gap_after_12"] and report["gap_after_mode"] == 12
    assert report["ratio_13_2"] == pytest.approx(2.1, abs=0.05)
