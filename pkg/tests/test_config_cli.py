"""Tests for the config grammar, layered loading and the CLI round trip."""

import json

import numpy as np
import pytest

from riskdrive import cli, config
from riskdrive.config import ConfigError


class TestParseFile:
    def write(self, tmp_path, text):
        p = tmp_path / "cfg.txt"
        p.write_text(text)
        return p

    def test_comments_blanks_and_inline_comments(self, tmp_path):
        p = self.write(tmp_path, """
# full-line comment
env.n_sv = 4   # trailing comment

learner.batch = 64
""")
        assert config.parse_file(p) == {"env.n_sv": 4, "learner.batch": 64}

    def test_missing_equals_reports_line_number(self, tmp_path):
        p = self.write(tmp_path, "env.n_sv = 4\nnot a pair\n")
        with pytest.raises(ConfigError, match=":2:"):
            config.parse_file(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = self.write(tmp_path, "env.speed = 3\n")
        with pytest.raises(ConfigError, match="env.speed"):
            config.parse_file(p)

    def test_values_typed_by_defaults(self, tmp_path):
        p = self.write(tmp_path, """
net.attn_scale_per_head = true
learner.gamma = 0.95
env.n_sv = 7
run.seeds = 0, 1, 2
run.name = trial
""")
        parsed = config.parse_file(p)
        assert parsed["net.attn_scale_per_head"] is True
        assert parsed["learner.gamma"] == 0.95
        assert parsed["env.n_sv"] == 7
        assert parsed["run.seeds"] == [0, 1, 2]
        assert parsed["run.name"] == "trial"

    def test_bad_bool_and_bad_int_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="net.attn_scale_per_head"):
            config.parse_file(self.write(tmp_path, "net.attn_scale_per_head = yes\n"))
        with pytest.raises(ConfigError, match="env.n_sv"):
            config.parse_file(self.write(tmp_path, "env.n_sv = many\n"))


class TestLoadPrecedence:
    def test_override_beats_file_beats_preset_beats_default(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("env.n_sv = 8\nenv.m_sv = 9\n")
        cfg = config.load(path=p, preset="desk",
                          overrides={"env.m_sv": "11"})
        assert cfg["env.m_sv"] == 11  # override wins over file
        assert cfg["env.n_sv"] == 8  # file wins over preset (desk: 4)
        assert cfg["learner.episodes"] == 1500  # preset wins over default
        assert cfg["learner.gamma"] == 0.99  # default

    def test_unknown_preset_rejected(self):
        with pytest.raises(ConfigError, match="preset"):
            config.load(preset="cluster")

    def test_validation_catches_bad_combinations(self):
        with pytest.raises(ConfigError, match="env.task"):
            config.load(overrides={"env.task": "uturn"})
        with pytest.raises(ConfigError, match="learner.variant"):
            config.load(overrides={"learner.variant": "ppo"})
        with pytest.raises(ConfigError, match="run.seeds"):
            config.load(overrides={"run.seeds": ""})
        with pytest.raises(ConfigError, match="eval.episodes"):
            config.load(overrides={"eval.episodes": "0"})


class TestConfigMapping:
    def test_env_config_fields_and_policy_hz_override(self):
        cfg = config.load(overrides={"env.task": "lt", "env.n_sv": "3",
                                     "cost.w": "2.0"})
        ecfg = config.env_config(cfg)
        assert ecfg.task == "LT"
        assert ecfg.n_sv == 3
        assert ecfg.policy_hz == 5
        assert ecfg.cost.w == 2.0
        assert config.env_config(cfg, policy_hz=10).policy_hz == 10

    def test_learner_config_fields_and_seed_override(self):
        cfg = config.load(preset="desk",
                          overrides={"learner.variant": "rsac",
                                     "safety.eta": "0.01"})
        lcfg = config.learner_config(cfg, seed=7)
        assert lcfg.variant == "rsac"
        assert lcfg.seed == 7
        assert lcfg.episodes == 1500
        assert lcfg.net.d == 32
        assert lcfg.correction.eta == 0.01


TINY_SETS = [
    "--set", "learner.episodes=2",
    "--set", "learner.updates_per_episode=1",
    "--set", "learner.start_steps=5",
    "--set", "learner.batch=4",
    "--set", "learner.buffer=1000",
    "--set", "learner.checkpoint_every=0",
    "--set", "net.hidden=8",
    "--set", "net.heads=2",
    "--set", "env.n_sv=2",
    "--set", "env.m_sv=2",
    "--set", "env.time_limit=3",
    "--set", "eval.episodes=2",
]


class TestOverrideRouting:
    def test_episodes_flag_targets_learner_on_train_and_eval_on_eval(self):
        parser = cli.build_parser()
        train_args = parser.parse_args(["train", "--episodes", "9"])
        assert cli._gather_overrides(train_args)["learner.episodes"] == "9"
        eval_args = parser.parse_args(["eval", "--checkpoint", "x.npz",
                                       "--episodes", "9"])
        assert cli._gather_overrides(eval_args)["eval.episodes"] == "9"

    def test_seed_flag_sets_both_run_and_learner_seed(self):
        args = cli.build_parser().parse_args(["train", "--seed", "4"])
        ov = cli._gather_overrides(args)
        assert ov["run.seeds"] == "4" and ov["learner.seed"] == "4"

    def test_malformed_set_flag_is_a_config_error(self):
        assert cli.main(["train", "--set", "no-equals-sign"]) == 1


class TestCliRoundTrip:
    def test_train_eval_plot_pipeline(self, tmp_path, capsys):
        run_dir = tmp_path / "run"
        rc = cli.main(["train", "--variant", "sac", "--seed", "3",
                       "--out", str(run_dir), *TINY_SETS])
        assert rc == 0
        metrics = run_dir / "seed3" / "metrics.csv"
        checkpoint = run_dir / "seed3" / "final.npz"
        assert metrics.exists() and checkpoint.exists()

        eval_dir = tmp_path / "eval"
        rc = cli.main(["eval", "--checkpoint", str(checkpoint),
                       "--out", str(eval_dir), "--seed", "3", *TINY_SETS])
        assert rc == 0
        report = json.loads((eval_dir / "report.json").read_text())
        assert report["variant"] == "sac"
        assert report["episodes"] == 2
        assert report["CR"] + report["SR"] + report["FR"] == pytest.approx(1.0)
        assert (eval_dir / "traces.jsonl").exists()

        plot_dir = tmp_path / "plots"
        rc = cli.main(["plot", "--metrics", str(metrics),
                       "--traces", str(eval_dir / "traces.jsonl"),
                       "--out", str(plot_dir)])
        assert rc == 0
        for name in ("training_curves.svg", "training_curves.csv",
                     "trajectory.svg", "trajectory.csv",
                     "speed.svg", "speed.csv"):
            assert (plot_dir / name).exists(), name
        capsys.readouterr()

    def test_unknown_config_key_exits_one(self):
        assert cli.main(["train", "--set", "learner.nonsense=1"]) == 1

    def test_plot_without_inputs_exits_two(self, capsys):
        assert cli.main(["plot"]) == 2
        capsys.readouterr()

    def test_eval_rejects_non_checkpoint_file(self, tmp_path, capsys):
        bogus = tmp_path / "bogus.npz"
        np.savez(bogus, weights=np.zeros(3))
        assert cli.main(["eval", "--checkpoint", str(bogus)]) == 2
        capsys.readouterr()


class TestSelftest:
    def test_all_suites_pass(self, capsys):
        assert cli.main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 4
        assert "FAIL" not in out
