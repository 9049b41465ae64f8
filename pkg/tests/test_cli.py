import json
from pathlib import Path

import numpy as np
import pytest

from jaysim import cli, metrics, nets, trainer
from jaysim.cli import load_config, main, parse_overrides, read_seed_file
from jaysim.trainer import TrainConfig


class TestLoadConfig:
    def test_empty_file_gives_full_scale_defaults(self, tmp_path):
        p = tmp_path / "empty.toml"
        p.write_text("")
        cfg = load_config(p)
        assert cfg == TrainConfig()
        assert (cfg.n_envs, cfg.rollout_len, cfg.updates) == (512, 256, 5000)
        assert (cfg.gamma, cfg.gae_lambda, cfg.clip_eps) == (0.995, 0.95, 0.2)
        assert (cfg.entropy_coef_ped, cfg.entropy_coef_sdc) == (0.03, 0.01)
        assert cfg.grad_norm_clip == 0.5
        assert cfg.lr == 3e-4

    def test_partial_override(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("n_envs = 8\nlr = 1e-3\nmode = \"single-agent\"\n")
        cfg = load_config(p)
        assert cfg.n_envs == 8
        assert cfg.lr == 1e-3
        assert cfg.mode == "single-agent"
        assert cfg.rollout_len == 256

    def test_gamma_range_validated(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("gamma = 1.1\n")
        with pytest.raises(ValueError, match="gamma"):
            load_config(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("not_a_key = 3\n")
        with pytest.raises(ValueError, match="unknown config keys"):
            load_config(p)

    def test_duplicate_key_rejected(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("lr = 1e-3\nlr = 2e-3\n")
        with pytest.raises(ValueError):
            load_config(p)

    def test_parse_error_reports_location(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("lr = \n")
        with pytest.raises(ValueError, match="line"):
            load_config(p)


class TestOverrides:
    def test_coercion(self):
        out = parse_overrides(["n_envs=4", "lr=0.001", "mode=single-agent"])
        assert out == {"n_envs": 4, "lr": 0.001, "mode": "single-agent"}

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            parse_overrides(["bogus=1"])

    def test_malformed(self):
        with pytest.raises(ValueError):
            parse_overrides(["noequals"])


class TestSeedFiles:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "seeds.txt"
        p.write_text("5\n6\n7\n")
        assert read_seed_file(p, 3) == [5, 6, 7]

    def test_length_mismatch(self, tmp_path):
        p = tmp_path / "seeds.txt"
        p.write_text("5\n6\n")
        with pytest.raises(ValueError, match="seeds"):
            read_seed_file(p, 3)


class TestCommands:
    def test_train_tiny_and_eval_round_trip(self, tmp_path):
        out = tmp_path / "run"
        rc = main(
            [
                "train", "--desk", "--seed", "1", "--out", str(out),
                "--set", "n_envs=2", "--set", "rollout_len=8",
                "--set", "updates=2", "--set", "minibatches=2",
            ]
        )
        assert rc == 0
        ckpt = out / "checkpoints" / "ckpt_final.bin"
        assert ckpt.exists()
        meta = json.loads(ckpt.with_suffix(".json").read_text())
        assert meta["seed"] == 1
        cfg_echo = json.loads((out / "config.json").read_text())
        assert meta["config_hash"] == cfg_echo["config_hash"]

        seeds = tmp_path / "seeds.txt"
        seeds.write_text("\n".join(str(100 + i) for i in range(3)) + "\n")
        ev = tmp_path / "eval"
        rc = main(
            [
                "eval", "--sdc", str(ckpt), "--peds", str(ckpt),
                "--episodes", "3", "--seeds", str(seeds), "--out", str(ev),
            ]
        )
        assert rc == 0
        report = json.loads((ev / "report.json").read_text())
        assert report["episodes"] == 3
        assert report["seed_set_hash"] == metrics.seed_set_hash([100, 101, 102])
        assert (ev / "logs.csv").exists()
        assert (ev / "speeds.csv").exists()
        assert (ev / "seeds.txt").read_text().split() == ["100", "101", "102"]

    def test_eval_missing_checkpoint_fails(self, tmp_path, capsys):
        rc = main(["eval", "--sdc", str(tmp_path / "nope.bin"), "--episodes", "1", "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "not found" in capsys.readouterr().err

    def test_baseline_command(self, tmp_path):
        out = tmp_path / "b"
        rc = main(["baseline", "--name", "constant", "--episodes", "2", "--seed", "7", "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["sdc_policy"] == "constant"

    def test_ablate_command(self, tmp_path):
        out = tmp_path / "a"
        rc = main(
            [
                "ablate", "--sdc", "constant", "--multipliers", "0,1.0",
                "--episodes", "2", "--seed", "3", "--out", str(out),
            ]
        )
        assert rc == 0
        table = (out / "ablation.csv").read_text().splitlines()
        assert table[0].startswith("multiplier,goal_rate,collision_rate")
        assert len(table) == 3
        assert (out / "report_m0.json").exists()
        assert (out / "report_m1.json").exists()

    def test_ablate_rejects_bad_multiplier(self, tmp_path, capsys):
        rc = main(["ablate", "--sdc", "constant", "--multipliers", "2.0", "--episodes", "1", "--out", str(tmp_path)])
        assert rc == 2

    def test_identical_runs_identical_artifacts(self, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            main(
                [
                    "train", "--seed", "3", "--out", str(out),
                    "--set", "n_envs=2", "--set", "rollout_len=8",
                    "--set", "updates=2", "--set", "minibatches=2",
                ]
            )
            outs.append(out)
        a = (outs[0] / "checkpoints" / "ckpt_final.bin").read_bytes()
        b = (outs[1] / "checkpoints" / "ckpt_final.bin").read_bytes()
        assert a == b


@pytest.mark.slow
def test_selfcheck_passes():
    assert main(["selfcheck"]) == 0
