import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from hiemp.cli import main
from hiemp.config import ConfigError, RunConfig

FAST = {
    "env": "point_field_1d",
    "seed": 7,
    "k": 1,
    "n": [5],
    "sigma0_gc": [0.4],
    "sigma0_gs": [1.75],
    "eps": [0.15],
    "gamma": [0.95],
    "hidden": [8, 8],
    "epochs": 2,
    "gc_iters": 2,
    "gc_grad_steps": 3,
    "gs_grad_steps": 2,
    "gc_rollouts": 3,
    "gs_samples": 3,
    "gc_batch": 8,
    "gs_batch": 4,
    "refresh_skills": 2,
    "task_goal_lengths": [0.4],
    "task_n": 3,
    "task_eps": 0.1,
    "phase2_rounds": 2,
    "phase2_episodes": 2,
    "phase2_grad_steps": 2,
    "phase2_batch": 4,
    "eval_seeds": 2,
    "eval_episodes": 3,
}


def write_cfg(tmp_path, name="cfg.json", **over):
    data = dict(FAST)
    data.update(over)
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=1))
    return p


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_config_validation_errors():
    with pytest.raises(ConfigError, match="env"):
        RunConfig.from_dict({"env": "nope"})
    with pytest.raises(ConfigError, match="'n'"):
        RunConfig.from_dict({"k": 2, "n": [5]})
    with pytest.raises(ConfigError, match="unknown field"):
        RunConfig.from_dict({"nn": 4})


def test_config_json_error_names_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n "env": point_field_1d\n}\n')
    with pytest.raises(ConfigError, match="line 2"):
        RunConfig.from_file(p)


def test_malformed_config_exits_2(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{ not json }")
    rc = main(["train", "--config", str(p), "--phase", "1", "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_train_phase1_outputs(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "run"
    rc = main(["train", "--config", str(cfg), "--phase", "1", "--out", str(out)])
    assert rc == 0
    rows = read_rows(out / "metrics_phase1.csv")
    header = list(rows[0].keys())
    assert header[:5] == ["epoch", "level", "halfwidth_mean", "gc_reward_mean",
                          "gs_reward_mean"]
    assert [r["epoch"] for r in rows] == ["0", "1", "2"]
    assert (out / "checkpoint_phase1.bin").exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["seed"] == 7
    assert "metrics_phase1.csv" in manifest["output_hashes"]


def test_train_epochs_zero_emits_initial_row_only(tmp_path):
    cfg = write_cfg(tmp_path, epochs=0)
    out = tmp_path / "run0"
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(out)]) == 0
    rows = read_rows(out / "metrics_phase1.csv")
    assert len(rows) == 1 and rows[0]["epoch"] == "0"


def test_train_reruns_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(a)]) == 0
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(b)]) == 0
    assert (a / "metrics_phase1.csv").read_bytes() == (b / "metrics_phase1.csv").read_bytes()
    assert (a / "checkpoint_phase1.bin").read_bytes() == (b / "checkpoint_phase1.bin").read_bytes()


def test_seed_override_changes_outputs(tmp_path):
    cfg = write_cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(a)]) == 0
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(b),
                 "--seed", "8"]) == 0
    assert (a / "metrics_phase1.csv").read_bytes() != (b / "metrics_phase1.csv").read_bytes()


def test_phase2_requires_checkpoint(tmp_path):
    cfg = write_cfg(tmp_path)
    rc = main(["train", "--config", str(cfg), "--phase", "2", "--out", str(tmp_path / "x")])
    assert rc == 2
    rc = main(["train", "--config", str(cfg), "--phase", "2", "--out", str(tmp_path / "x"),
               "--checkpoint", str(tmp_path / "missing.bin")])
    assert rc == 2


def full_pipeline(tmp_path):
    cfg = write_cfg(tmp_path)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(run)]) == 0
    assert main(["train", "--config", str(cfg), "--phase", "2", "--out", str(run),
                 "--checkpoint", str(run / "checkpoint_phase1.bin")]) == 0
    return cfg, run


def test_phase2_and_eval_pipeline(tmp_path, capsys):
    cfg, run = full_pipeline(tmp_path)
    rows = read_rows(run / "metrics_phase2.csv")
    assert list(rows[0].keys()) == ["round", "episodes", "min_dist_mean", "reward_mean"]
    assert (run / "checkpoint_phase2.bin").exists()
    rc = main(["eval", "--checkpoint", str(run / "checkpoint_phase2.bin"),
               "--config", str(cfg), "--out", str(run)])
    assert rc == 0
    summary = capsys.readouterr().out
    assert "min_dist mean=" in summary
    erows = read_rows(run / "eval.csv")
    assert list(erows[0].keys()) == ["seed", "episode", "goal_x", "min_dist"]
    assert len(erows) == 2 * 3  # seeds x episodes
    mean = np.mean([float(r["min_dist"]) for r in erows])
    assert f"{mean:.6g}"[:6] in summary


def test_eval_single_seed_zero_std(tmp_path, capsys):
    cfg, run = full_pipeline(tmp_path)
    cfg1 = write_cfg(tmp_path, name="cfg1.json", eval_seeds=1)
    rc = main(["eval", "--checkpoint", str(run / "checkpoint_phase2.bin"),
               "--config", str(cfg1), "--out", str(run)])
    assert rc == 0
    assert "std=0" in capsys.readouterr().out
    rc = main(["eval", "--checkpoint", str(run / "nope.bin"), "--config", str(cfg1),
               "--out", str(run)])
    assert rc == 2


def test_plot_outputs_and_rect_transcription(tmp_path):
    cfg, run = full_pipeline(tmp_path)
    assert main(["oracle", "--config", str(cfg), "--out", str(run)]) == 0
    assert main(["plot", "--run", str(run)]) == 0
    svg = run / "goal_spaces.svg"
    assert svg.exists() and (run / "phase2_curve.svg").exists()
    rects = ET.parse(svg).getroot().findall(".//{http://www.w3.org/2000/svg}rect")
    labels = {r.get("data-label") for r in rects}
    assert labels == {"level0_first", "level0_last", "oracle"}
    rows = read_rows(run / "metrics_phase1.csv")
    last = [r for r in rows if r["level"] == "0"][-1]
    cx = float(last["center_0"])
    w = float(np.exp(float(last["log_halfwidth_0"])))
    rect = next(r for r in rects if r.get("data-label") == "level0_last")
    assert np.isclose(float(rect.get("x")), cx - w)
    assert np.isclose(float(rect.get("width")), 2 * w)
    # oracle overlay spans the dumped point cloud extents
    pts = np.loadtxt(run / "oracle_reach.csv", delimiter=",", skiprows=1, ndmin=2)
    orect = next(r for r in rects if r.get("data-label") == "oracle")
    assert np.isclose(float(orect.get("x")), pts.min())
    assert np.isclose(float(orect.get("x")) + float(orect.get("width")), pts.max())


def test_plot_missing_metrics_exits_2(tmp_path):
    assert main(["plot", "--run", str(tmp_path)]) == 2


def test_oracle_channel_mode_writes_mi_csv(tmp_path):
    cfg = write_cfg(tmp_path, name="chan.json", env="channel_1d", n=[5],
                    channel_noise_std=0.3)
    run = tmp_path / "chan"
    assert main(["train", "--config", str(cfg), "--phase", "1", "--out", str(run)]) == 0
    rc = main(["oracle", "--config", str(cfg), "--out", str(run),
               "--checkpoint", str(run / "checkpoint_phase1.bin")])
    assert rc == 0
    rows = read_rows(run / "oracle_mi.csv")
    assert list(rows[0].keys()) == ["mi_nats", "bound_nats", "bound_stderr"]
    assert float(rows[0]["bound_nats"]) <= float(rows[0]["mi_nats"]) + 0.05


def test_missing_out_dir_is_config_error(tmp_path):
    cfg = write_cfg(tmp_path)
    rc = main(["train", "--config", str(cfg), "--phase", "1"])
    assert rc == 2


def test_repacked_example_configs_are_valid():
    here = Path(__file__).resolve().parent.parent / "configs"
    examples = sorted(here.glob("*.json"))
    assert examples, "expected example configs under configs/"
    for p in examples:
        RunConfig.from_file(p)
