import json
import os

import pytest

from swimopt import harness
from swimopt.__main__ import main


def small_nlink(name="small_nlink"):
    cfg = json.loads(json.dumps(harness.bundled_config("nlink_maxdist_y")))
    cfg["name"] = name
    cfg["controls"]["n_ctrl"] = 6
    cfg["scbo"]["budget"] = 32
    cfg["baseline"] = {"kind": "sinusoid", "frequency": 2.5}
    return cfg


def test_bundled_configs_validate():
    paths = harness.bundled_configs()
    assert len(paths) >= 10
    for p in paths:
        cfg = harness.load_config(p)
        assert cfg["name"] == os.path.splitext(os.path.basename(p))[0]
        exp = harness.Experiment(cfg)
        assert exp.spec.dim > 0


@pytest.mark.parametrize("mutate, path", [
    (lambda c: c.pop("T"), "<root>"),
    (lambda c: c.update(T=-1), "T"),
    (lambda c: c["controls"].update(set="q"), "controls/set"),
    (lambda c: c["scbo"].update(batch_size=0), "scbo/batch_size"),
    (lambda c: c["objective"].update(kind="wall_compensation"), "objective/kind"),
    (lambda c: c.update(params={"n_links": 0}), "params"),
])
def test_schema_errors_name_the_field(mutate, path):
    cfg = harness.bundled_config("nlink_maxdist_y")
    mutate(cfg)
    with pytest.raises(harness.ConfigError) as err:
        harness.validate_config(cfg)
    assert path in str(err.value)


def test_malformed_config_cli(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "bad", "model": "nlink"}))
    out = tmp_path / "runs"
    assert main(["--out-dir", str(out), "run", str(bad)]) != 0
    assert not out.exists() or not any(out.iterdir())
    assert main(["validate", str(bad)]) != 0
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["validate", str(tmp_path / "broken.json")]) != 0
    assert main(["validate", "nlink_maxdist_y"]) == 0
    assert main(["list"]) == 0
    assert "nlink_maxdist_y" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    cfg = small_nlink()
    path = tmp_path / "small.json"
    path.write_text(json.dumps(cfg))
    for d in ("a", "b"):
        assert main(["--out-dir", str(tmp_path / d), "run", str(path)]) == 0
    a, b = tmp_path / "a/small_nlink", tmp_path / "b/small_nlink"
    assert (a / "history.csv").read_bytes() == (b / "history.csv").read_bytes()
    for f in ("result.json", "best_control.json", "best_trajectory.csv", "summary.json",
              "baseline_trajectory.csv", "config.json", "timings.csv"):
        assert (a / f).exists()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["budget"] == 32 and summary["baseline"]["frequency"] == 2.5
    assert "beats_baseline" in summary
    assert not [p for p in os.listdir(tmp_path / "a") if p.startswith(".partial")]


def test_seed_override_changes_history(tmp_path):
    cfg = small_nlink()
    harness.run_experiment(cfg, str(tmp_path / "s0"), seed=0, budget=8)
    harness.run_experiment(cfg, str(tmp_path / "s1"), seed=1, budget=8)
    assert (tmp_path / "s0/history.csv").read_bytes() != (tmp_path / "s1/history.csv").read_bytes()


def test_threesphere_run_summary(tmp_path):
    cfg = harness.bundled_config("threesphere_wall_near_low")
    summary = harness.run_experiment(cfg, str(tmp_path / "w"), budget=6)
    for key in ("displacement", "delta_theta", "delta_y", "cost"):
        assert key in summary["optimized"] and key in summary["baseline"]
    assert summary["baseline"]["kind"] == "classical_stroke"
    header = (tmp_path / "w/best_trajectory.csv").read_text().splitlines()[0]
    assert header == "t,x3,y3,theta,u1,u2"


def test_failed_run_leaves_nothing(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("interrupted")
    monkeypatch.setattr(harness.scbo, "write_artifacts", boom)
    with pytest.raises(RuntimeError):
        harness.run_experiment(small_nlink(), str(tmp_path / "x"), budget=4)
    assert os.listdir(tmp_path) == []


def test_altitude_phases_and_phase_csv(tmp_path):
    rows = [("near", 1.5, 0.9), ("near", 2.0, 0.5), ("near", 4.0, -0.2), ("near", 6.0, -0.1)]
    assert harness.altitude_phases(rows, "near") == {"low": 2.0, "middle": 4.0}
    harness.write_phase_csv(tmp_path / "p.csv", rows, radius=0.1)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "h,delta_theta,regime"
    assert lines[1].endswith(",near")


def test_wall_weight_variants_bundled():
    names = {os.path.basename(p) for p in harness.bundled_configs()}
    assert "threesphere_wall_near_low_terminal.json" in names
    cfg = harness.bundled_config("threesphere_wall_near_low_terminal")
    assert cfg["objective"]["running"] is False


def test_alpha_zero_is_pure_x_tracking():
    cfg = harness.bundled_config("threesphere_wall_near_low")
    cfg["objective"]["alpha"] = 0.0
    exp = harness.Experiment(cfg)
    ctrl, _ = exp.baseline()
    traj = exp.simulate(ctrl)
    flat = traj.states.copy()
    flat[:, 1] = exp.h + 0.3
    flat[:, 2] = 0.7
    traj2 = type(traj)(traj.t, flat)
    assert exp.cost(traj) == exp.cost(traj2)


def test_unknown_study(tmp_path):
    with pytest.raises(ValueError):
        harness.run_study("nope", str(tmp_path / "study"))


def test_infeasible_best_never_beats_baseline(tmp_path):
    # a few random strokes all break the arm-rate cap
    s = harness.run_experiment(harness.bundled_config("threesphere_stroke_far"), str(tmp_path / "r"), budget=8)
    assert not s["best_feasible"]
    assert s["beats_baseline"] is False
