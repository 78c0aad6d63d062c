import os

import numpy as np
import pytest

from oceanplastic import cli, scenario
from oceanplastic.scenario import parse_scenario_dump

TINY_CONFIG = """
mode = mac
area_size = 50
pebble_count = 40
comm_range = 25
episode_max_steps = 60
num_areas = 1
max_steps = 768
summary_freq = 384
buffer_size = 384
batch_size = 128
time_horizon = 32
learning_rate = 0.001
hidden_units = 8
num_layers = 1
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text(TINY_CONFIG)
    return str(path)


def test_missing_config_file_nonzero_exit(tmp_path, capsys):
    missing = str(tmp_path / "nope.txt")
    code = cli.main(["train", "--config", missing, "--out", str(tmp_path / "out")])
    assert code != 0
    assert missing in capsys.readouterr().err


def test_train_smoke_emits_summary_and_checkpoint(tmp_path, config_file, capsys):
    out = tmp_path / "run"
    code = cli.main(["train", "--config", config_file, "--out", str(out)])
    assert code == 0
    with open(out / "metrics.csv") as fh:
        lines = fh.read().strip().splitlines()
    assert len(lines) >= 2  # header + at least one summary row
    assert (out / "checkpoint_final.bin").exists()
    assert (out / "config.txt").exists()  # config snapshot copied in


def test_train_max_steps_override_single_update(tmp_path, config_file, capsys):
    out = tmp_path / "run"
    code = cli.main(
        ["train", "--config", config_file, "--max-steps", "384", "--out", str(out)]
    )
    assert code == 0
    assert "1 updates" in capsys.readouterr().out


def test_env_var_override(tmp_path, config_file, capsys, monkeypatch):
    monkeypatch.setenv("OPC_MAX_STEPS", "384")
    out = tmp_path / "run"
    code = cli.main(["train", "--config", config_file, "--out", str(out)])
    assert code == 0
    assert "trained 384 steps" in capsys.readouterr().out


def test_eval_and_report_pipeline(tmp_path, config_file, capsys):
    run = tmp_path / "run"
    assert cli.main(["train", "--config", config_file, "--out", str(run)]) == 0
    capsys.readouterr()
    eval_dir = tmp_path / "eval"
    code = cli.main(
        [
            "eval",
            str(run / "checkpoint_final.bin"),
            "--config",
            config_file,
            "--num-steps",
            "300",
            "--out",
            str(eval_dir),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "cum_reward" in out
    report_csv = (eval_dir / "report.csv").read_text()
    assert report_csv.startswith("metric,mean,std")

    logs = sorted(os.listdir(eval_dir / "logs"))
    assert logs
    log_path = str(eval_dir / "logs" / logs[0])
    assert cli.main(["report", log_path, "--out", str(tmp_path / "r.csv")]) == 0
    assert (tmp_path / "r.csv").exists()
    assert cli.main(["render-paths", log_path, "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").read_text().startswith("<?xml")


def test_dump_scenario_deterministic_and_contained(tmp_path, capsys):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    for out in (out1, out2):
        code = cli.main(
            [
                "dump-scenario",
                "--seed", "0",
                "--area-size", "100",
                "--pebble-count", "300",
                "--out", str(out),
            ]
        )
        assert code == 0
    name = "scenario_0_0.txt"
    assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    assert (out1 / "heatmap_0_0.png").read_bytes() == (out2 / "heatmap_0_0.png").read_bytes()
    _, positions = parse_scenario_dump((out1 / name).read_text())
    assert (positions > 0).all() and (positions < 100).all()


def test_dump_scenario_correlates_with_field(tmp_path, capsys):
    out = tmp_path / "s"
    assert cli.main(
        ["dump-scenario", "--seed", "3", "--pebble-count", "2000", "--out", str(out)]
    ) == 0
    _, positions = parse_scenario_dump((out / "scenario_3_0.txt").read_text())
    spec = scenario.ScenarioSpec(seed=3, pebble_count=2000)
    field = scenario.density_field(spec)
    # Pearson correlation between 5x5 pebble histogram and binned field.
    hist = np.histogram2d(
        positions[:, 0], positions[:, 1], bins=5, range=[[0, 200], [0, 200]]
    )[0]
    binned = field.values.reshape(5, 20, 5, 20).mean(axis=(1, 3)).T  # (x, y) order
    r = np.corrcoef(hist.reshape(-1), binned.reshape(-1))[0, 1]
    assert r > 0.3


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--bogus-flag", "1"])
    assert exc.value.code != 0
