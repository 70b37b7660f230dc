import csv
import json
import random

import pytest
import yaml

from mobicatch import cli
from mobicatch.ppo import load_checkpoint
from mobicatch.simenv.replay import read_jsonl, validate_record

SMALL_PPO = {"num_envs": 2, "horizon": 8, "hidden": [16, 16], "epochs": 1, "minibatches": 2}
STEPS_3 = str(3 * 2 * 8)


@pytest.fixture
def run_cfg(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"ppo": SMALL_PPO, "seed": 1}))
    return path


def train(run_cfg, out, *extra):
    return cli.main(["train", "--config", str(run_cfg), "--out", str(out), "--steps", STEPS_3, *extra])


def test_smoke_train_writes_all_artifacts(run_cfg, tmp_path):
    out = tmp_path / "track"
    assert train(run_cfg, out, "--stage", "track") == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["mode"] == "track"
    assert len(manifest["config_digest"]) == 16 and manifest["version"]
    ckpt = load_checkpoint(out / "final.bin")
    assert ckpt.updates == 3 and manifest["final"]["digest"] == ckpt.digest()
    assert ckpt.meta["digest"] == manifest["config_digest"]
    rows = list(csv.DictReader((out / "metrics.csv").open()))
    assert [int(r["step"]) for r in rows] == [16, 32, 48]


def test_same_seed_same_digest(run_cfg, tmp_path):
    assert train(run_cfg, tmp_path / "a") == 0
    assert train(run_cfg, tmp_path / "b") == 0
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())["final"]["digest"]
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())["final"]["digest"]
    assert a == b
    assert train(run_cfg, tmp_path / "c", "--seed", "2") == 0
    c = json.loads((tmp_path / "c" / "manifest.json").read_text())["final"]["digest"]
    assert c != a


def test_resume_continues_step_counter(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"ppo": {**SMALL_PPO, "checkpoint_every": 1}}))
    out = tmp_path / "r"
    assert cli.main(["train", "--config", str(cfg), "--out", str(out), "--steps", "32"]) == 0
    assert cli.main(["train", "--config", str(cfg), "--out", str(out), "--steps", "64",
                     "--resume", "latest"]) == 0
    ckpt = load_checkpoint(out / "final.bin")
    assert ckpt.step == 64 and ckpt.updates == 4
    steps = [int(r["step"]) for r in csv.DictReader((out / "metrics.csv").open())]
    assert steps == [16, 32, 48, 64]
    assert json.loads((out / "manifest.json").read_text())["resumed_from"]["step"] == 32


def test_two_stage_transfer_and_config_errors(run_cfg, tmp_path, capsys):
    track = tmp_path / "track"
    assert train(run_cfg, track) == 0
    assert train(run_cfg, tmp_path / "ts", "--stage", "catch", "--mode", "two-stage") == cli.EXIT_CONFIG
    assert train(run_cfg, tmp_path / "ts", "--stage", "catch", "--init", str(track / "final.bin")) == 0
    manifest = json.loads((tmp_path / "ts" / "manifest.json").read_text())
    assert manifest["mode"] == "two-stage" and "init" in manifest
    assert train(run_cfg, tmp_path / "x", "--mode", "juggle") == cli.EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text("ppo: {gamma: 3.0}\n")
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "y")]) == cli.EXIT_CONFIG
    bad.write_text("colour: blue\n")
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path / "y")]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_runtime_fault_exit_code(run_cfg, tmp_path, monkeypatch):
    def explode(self, total_steps=None):
        raise FloatingPointError("non-finite PPO loss")

    monkeypatch.setattr(cli.Trainer, "train", explode)
    assert train(run_cfg, tmp_path / "f") == cli.EXIT_RUNTIME


@pytest.fixture(scope="module")
def catch_ckpt(tmp_path_factory):
    root = tmp_path_factory.mktemp("cat")
    cfg = root / "run.yaml"
    cfg.write_text(yaml.safe_dump({"ppo": SMALL_PPO, "mode": "catch:one-stage"}))
    assert cli.main(["train", "--config", str(cfg), "--out", str(root), "--steps", "16"]) == 0
    return root / "final.bin"


def test_eval_untrained_policy_rarely_catches(catch_ckpt, tmp_path):
    out = tmp_path / "report.json"
    args = ["eval", str(catch_ckpt), "--episodes", "16", "--objects", "train", "--groups", "2", "--out", str(out)]
    assert cli.main(args) == 0
    report = json.loads(out.read_text())
    assert set(report["classes"]) == set(cli.TRAIN_CLASSES)
    for entry in report["classes"].values():
        assert entry["trials"] == 32 and entry["groups"] == 2
        assert entry["catch"]["mean"] <= 5.0
        assert 0.0 <= entry["touch"]["mean"] <= 100.0
    assert cli.main(args[:-1] + [str(tmp_path / "again.json")]) == 0
    assert json.loads((tmp_path / "again.json").read_text()) == report


def test_eval_rejects_stage_mismatch(catch_ckpt):
    assert cli.main(["eval", str(catch_ckpt), "--stage", "track", "--episodes", "2"]) == cli.EXIT_CONFIG


def test_held_out_classes_in_report(catch_ckpt, tmp_path):
    out = tmp_path / "h.json"
    assert cli.main(["eval", str(catch_ckpt), "--episodes", "4", "--objects", "held-out", "--out", str(out)]) == 0
    assert set(json.loads(out.read_text())["classes"]) == {"bowl", "bottle", "wine_cup", "cup", "bread"}


def test_aggregation_ignores_group_order():
    rng = random.Random(0)
    groups = [{c: {"touch": rng.uniform(0, 100), "catch": rng.uniform(0, 100), "trials": 10}
               for c in ("box", "cup")} for _ in range(5)]
    ref = cli.aggregate(groups)
    for _ in range(10):
        shuffled = groups[:]
        rng.shuffle(shuffled)
        assert cli.aggregate(shuffled) == ref
    assert ref["box"]["trials"] == 50


def test_replay_export(catch_ckpt, tmp_path):
    out = tmp_path / "rep.jsonl"
    assert cli.main(["replay", str(catch_ckpt), "--episodes", "2", "--seed", "4", "--out", str(out)]) == 0
    recs = read_jsonl(out)
    for rec in recs:
        validate_record(rec)
    for ep in range(2):
        steps = [r for r in recs if r["type"] == "step" and r["episode"] == ep]
        (end,) = [r for r in recs if r["type"] == "outcome" and r["episode"] == ep]
        assert len(steps) == end["steps"] and 1 <= len(steps) <= 63
        assert abs(sum(s["reward"] for s in steps) - end["episode_return"]) <= 1e-9


def write_metrics(path, n):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "episode_return", "success_touch", "success_catch", "eval_touch", "eval_catch"])
        for i in range(n):
            w.writerow([(i + 1) * 100, i * 0.5, i / n, 0.0, "", ""])


def test_plotdata_downsampling(tmp_path):
    m = tmp_path / "metrics.csv"
    write_metrics(m, 10)
    out = tmp_path / "curves.csv"
    assert cli.main(["plotdata", str(m), "--every", "1", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [int(r["step"]) for r in rows] == [100 * (i + 1) for i in range(10)]
    assert cli.main(["plotdata", str(m), "--every", "4", "--out", str(out)]) == 0
    steps = [int(r["step"]) for r in csv.DictReader(out.open())]
    assert steps == [100, 500, 900, 1000]
    assert cli.downsample(list(range(9)), 4) == [0, 4, 8]


def test_plotdata_skips_malformed_rows(tmp_path, caplog):
    m = tmp_path / "metrics.csv"
    write_metrics(m, 4)
    with m.open("a") as fh:
        fh.write("not-a-number,1,2,3,,\n")
        fh.write("600,1,2,3,,,extra\n")
    rows, skipped = cli.read_curves(m)
    assert skipped == 2 and len(rows) == 4
    assert cli.main(["plotdata", str(m), "--out", str(tmp_path / "c.csv")]) == 0
    assert "skipped 2 malformed rows" in caplog.text


def test_packaged_configs_match_defaults():
    from importlib import resources

    from mobicatch.ppo.train import TrainSetup

    root = resources.files("mobicatch") / "configs"
    modes = {"track": "track", "two_stage": "two-stage", "one_stage": "one-stage", "no_roll": "no-roll"}
    for name, mode in modes.items():
        run = cli.RunConfig.load(root / f"{name}.yaml")
        assert run.mode == mode
        assert run.setup == TrainSetup()
