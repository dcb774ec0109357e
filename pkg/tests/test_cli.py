"""Command-line behavior: exit codes, artifact layout, reproducibility,
cross-command consistency, and export idempotence."""

import json
import os
import subprocess
import sys

import pytest

from uavmec import trainer
from uavmec.cli import main
from uavmec.config import load_config
from uavmec.metrics import read_csv

TINY = ["--profile", "micro", "--seed", "7"]
TINY_ENV = {
    "UAVMEC_N_MUS": "4", "UAVMEC_MAX_USERS": "4", "UAVMEC_N_SLOTS": "8",
    "UAVMEC_EPISODES": "2", "UAVMEC_UPDATE_EVERY_EPISODES": "2",
    "UAVMEC_PPO_EPOCHS": "2", "UAVMEC_MINIBATCH_SIZE": "16",
}


@pytest.fixture(autouse=True)
def tiny_world(monkeypatch):
    for key, val in TINY_ENV.items():
        monkeypatch.setenv(key, val)


@pytest.fixture
def trained_run(tmp_path):
    out = str(tmp_path / "train")
    assert main(["train", "--algo", "rmappo", *TINY, "--out", out]) == 0
    return out


class TestTrain:
    def test_outputs_present(self, trained_run):
        for name in ("manifest.json", "checkpoint.bin", "returns.csv",
                     "episodes.csv", "training.csv", "eval_slots.csv",
                     "eval_per_mu.csv", "eval_summary.json"):
            assert os.path.exists(os.path.join(trained_run, name)), name
        manifest = json.load(open(os.path.join(trained_run,
                                               "manifest.json")))
        assert manifest["status"] == "finished"
        assert manifest["seed"] == 7

    def test_unknown_config_key_names_it(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[physics]\nnoise_floor_dbm = -90\n")
        code = main(["train", "--config", str(bad), "--seed", "1",
                     "--out", str(tmp_path / "x")])
        assert code == 2
        assert "noise_floor_dbm" in capsys.readouterr().err

    def test_gmappo_same_artifact_schema(self, tmp_path, trained_run):
        out = str(tmp_path / "gm")
        assert main(["train", "--algo", "gmappo", *TINY, "--out", out]) == 0
        rm_cols = open(os.path.join(trained_run, "eval_slots.csv")
                       ).readline()
        gm_cols = open(os.path.join(out, "eval_slots.csv")).readline()
        assert rm_cols == gm_cols
        agents = {row["agent"] for row in
                  read_csv(os.path.join(out, "returns.csv"))}
        assert agents == {"g", "total"}


def test_identical_invocations_are_byte_identical(tmp_path):
    """Two separate CLI processes with the same args produce the same bytes."""
    outs = [str(tmp_path / name) for name in ("r1", "r2")]
    env = dict(os.environ, **TINY_ENV)
    for out in outs:
        proc = subprocess.run(
            [sys.executable, "-m", "uavmec.cli", "train", *TINY,
             "--out", out],
            env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    for name in ("returns.csv", "episodes.csv", "training.csv",
                 "eval_slots.csv", "eval_per_mu.csv", "checkpoint.bin"):
        a = open(os.path.join(outs[0], name), "rb").read()
        b = open(os.path.join(outs[1], name), "rb").read()
        assert a == b, f"{name} differs between identical runs"


class TestEval:
    def test_baseline_runs_without_checkpoint(self, tmp_path):
        out = str(tmp_path / "fair")
        assert main(["eval", *TINY, "--out", out,
                     "--baseline", "fairness_all", "--episodes", "2"]) == 0
        rows = read_csv(os.path.join(out, "eval_slots.csv"))
        assert {int(r["episode"]) for r in rows} == {0, 1}

    def test_checkpoint_eval_episode_count(self, tmp_path, trained_run):
        out = str(tmp_path / "ev")
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["eval", *TINY, "--out", out, "--checkpoint", ckpt,
                     "--episodes", "3"]) == 0
        summary = json.load(open(os.path.join(out, "eval_summary.json")))
        assert summary["learned"]["episodes"] == 3

    def test_missing_checkpoint_exits_3(self, tmp_path, capsys):
        code = main(["eval", *TINY, "--out", str(tmp_path / "x"),
                     "--checkpoint", str(tmp_path / "ghost.bin")])
        assert code == 3

    def test_no_checkpoint_no_baseline_exits_3(self, tmp_path):
        assert main(["eval", *TINY, "--out", str(tmp_path / "x")]) == 3

    def test_summary_matches_reaggregation(self, tmp_path, trained_run):
        out = str(tmp_path / "agg")
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["eval", *TINY, "--out", out, "--checkpoint", ckpt,
                     "--episodes", "2"]) == 0
        rows = read_csv(os.path.join(out, "eval_slots.csv"))
        summary = json.load(open(os.path.join(out, "eval_summary.json")))
        mean_u = sum(r["utility"] for r in rows) / len(rows)
        assert abs(summary["learned"]["mean_utility"] - mean_u) < 1e-9


class TestSweep:
    def test_default_alphas_four_rows(self, tmp_path, trained_run):
        out = str(tmp_path / "sw")
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["sweep-alpha", *TINY, "--out", out,
                     "--checkpoint", ckpt]) == 0
        table = read_csv(os.path.join(out, "sweep_summary.csv"))
        assert [r["label"] for r in table] == \
            ["alpha=0.3", "alpha=0.5", "alpha=0.7", "learned"]

    def test_custom_alphas_three_rows(self, tmp_path, trained_run):
        out = str(tmp_path / "sw2")
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["sweep-alpha", *TINY, "--out", out, "--checkpoint",
                     ckpt, "--alphas", "0.1,0.9"]) == 0
        table = read_csv(os.path.join(out, "sweep_summary.csv"))
        assert len(table) == 3

    def test_table_matches_direct_evaluation(self, tmp_path, trained_run):
        out = str(tmp_path / "sw3")
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["sweep-alpha", *TINY, "--out", out, "--checkpoint",
                     ckpt, "--alphas", "0.5"]) == 0
        table = read_csv(os.path.join(out, "sweep_summary.csv"))
        cfg = load_config(profile="micro", apply_env=True)
        bundle = trainer.checkpoint_load(ckpt, cfg)
        direct = trainer.evaluate(bundle, cfg, episodes=1, seed=7,
                                  fixed_alpha=0.5)
        assert table[0]["mean_utility"] == pytest.approx(
            direct.mean_utility, rel=1e-12)

    def test_bad_alphas_exit_2(self, tmp_path, trained_run):
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["sweep-alpha", *TINY, "--out", str(tmp_path / "x"),
                     "--checkpoint", ckpt, "--alphas", "a,b"]) == 2


class TestExport:
    def test_five_families_without_sweep(self, tmp_path, trained_run):
        assert main(["export", "--run", trained_run]) == 0
        present = [n for n in os.listdir(trained_run)
                   if n.startswith("fig_")]
        assert len(present) == 5
        assert "fig_alpha_sweep.csv" not in present
        assert os.path.exists(os.path.join(trained_run, "figures.zip"))

    def test_six_families_with_sweep(self, tmp_path, trained_run):
        out = str(tmp_path / "sw")
        ckpt = os.path.join(trained_run, "checkpoint.bin")
        assert main(["sweep-alpha", *TINY, "--out", out,
                     "--checkpoint", ckpt]) == 0
        import shutil
        shutil.copy(os.path.join(out, "sweep.csv"),
                    os.path.join(trained_run, "sweep.csv"))
        assert main(["export", "--run", trained_run]) == 0
        present = [n for n in os.listdir(trained_run)
                   if n.startswith("fig_")]
        assert len(present) == 6

    def test_reexport_is_idempotent(self, trained_run):
        assert main(["export", "--run", trained_run]) == 0
        before = {
            name: open(os.path.join(trained_run, name), "rb").read()
            for name in os.listdir(trained_run)
            if name.startswith("fig_") or name == "figures.zip"
        }
        assert main(["export", "--run", trained_run]) == 0
        for name, blob in before.items():
            assert open(os.path.join(trained_run, name),
                        "rb").read() == blob, name

    def test_trajectory_row_count(self, trained_run):
        assert main(["export", "--run", trained_run]) == 0
        rows = read_csv(os.path.join(trained_run, "fig_trajectories.csv"))
        cfg = load_config(profile="micro", apply_env=True)
        assert len(rows) == cfg.n_uavs * cfg.n_slots

    def test_missing_run_dir_exits_3(self, tmp_path):
        assert main(["export", "--run", str(tmp_path / "ghost")]) == 3
