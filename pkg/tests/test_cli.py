import json
import os

import numpy as np
import pytest

from nierl.cli import main
from nierl.envs.doorkey import DoorKeyEnv
from nierl.nn import Mlp, save_checkpoint


class TestRun:
    def test_tabular_run_via_flags(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([
            "run", "--experiment", "tabular_twostage", "--seed", "0", "--out", str(out),
        ] )
        assert code == 0
        assert (out / "seed_0" / "summary.json").exists()

    def test_config_file_round_trip(self, tmp_path):
        config = {
            "experiment": "tabular_twostage",
            "env": {"episodes": 1000, "snapshot_every": 200},
            "seeds": [3],
            "out_dir": str(tmp_path / "out"),
        }
        cfg_path = tmp_path / "spec.json"
        cfg_path.write_text(json.dumps(config))
        code = main(["run", "--config", str(cfg_path)])
        assert code == 0
        assert (tmp_path / "out" / "seed_3" / "summary.json").exists()

    def test_unknown_experiment_rejected(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["run", "--experiment", "nope", "--out", str(tmp_path)])

    def test_seeds_flag_parses_list(self, tmp_path):
        out = tmp_path / "out"
        main([
            "run", "--experiment", "tabular_twostage", "--seeds", "1,2", "--out", str(out),
        ])
        assert (out / "seed_1").exists() and (out / "seed_2").exists()


def _write_fake_doorkey_run(run_dir):
    env = DoorKeyEnv(size=6)
    rng = np.random.default_rng(0)
    ckpt = os.path.join(run_dir, "checkpoints")
    os.makedirs(ckpt, exist_ok=True)
    for name, (out_dim, head) in {
        "pi_a": (env.n_actions, "softmax"),
        "pi_b": (env.n_actions, "softmax"),
        "phi": (1, "sigmoid"),
    }.items():
        net = Mlp(env.obs_dim, 8, out_dim, head=head, rng=rng)
        if name == "phi":
            net.b2[:] = -3.0
        save_checkpoint(os.path.join(ckpt, name), net.parameters())


class TestEvalAndExport:
    def test_eval_then_export(self, tmp_path, capsys):
        run_dir = tmp_path / "run"
        run_dir.mkdir()
        _write_fake_doorkey_run(str(run_dir))
        code = main([
            "eval", str(run_dir), "--instances", "3", "--rollouts", "1", "--eval-seed", "5",
        ])
        assert code == 0
        report = json.loads((run_dir / "eval_report.json").read_text())
        assert "nie" in report and len(report["episodes"]) == 3

        code = main(["export", str(run_dir), "--out", str(tmp_path / "scatter.csv")])
        assert code == 0
        lines = (tmp_path / "scatter.csv").read_text().strip().split("\n")
        assert lines[0] == "episode_seed,p_z,door_opened,reward"
        assert len(lines) == 4

    def test_eval_without_checkpoints_fails(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["eval", str(tmp_path)])


class TestSeedRuns:
    def test_tabular_experiment_env_overrides(self, tmp_path):
        cfg = {
            "experiment": "tabular_twostage",
            "env": {"episodes": 500, "snapshot_every": 100},
            "seeds": [0],
            "out_dir": str(tmp_path / "o"),
        }
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        main(["run", "--config", str(path)])
        summary = json.loads((tmp_path / "o" / "seed_0" / "summary.json").read_text())
        assert summary["episodes"] == 500
