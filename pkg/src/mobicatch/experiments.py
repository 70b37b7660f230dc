"""Training-level comparison runs: tracking, two-stage, one-stage and no-roll.

Every method gets the same total environment-step budget per seed.  The
two-stage methods spend ``track_steps`` on tracking and the rest on
catching; the one-stage baseline spends the whole budget on catching.
Policy-only checkpoints and a JSON summary are written to the output
directory, and finished runs are skipped when the script is restarted.

    python -m mobicatch.experiments --out results
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from mobicatch.ppo.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from mobicatch.ppo.train import (
    EVAL_SEED_OFFSET, NO_ROLL, ONE_STAGE, TRACK, TWO_STAGE, TrainSetup, Trainer, evaluate,
    network_from_checkpoint, transfer_to_catching,
)
from mobicatch.cli import TRAIN_CLASSES, eval_report
from mobicatch.simenv.objects import HELD_OUT
from mobicatch.simenv.types import TRACKING

log = logging.getLogger(__name__)

RESULTS_FILE = "acceptance.json"


@dataclass(frozen=True)
class Protocol:
    seeds: tuple = (0, 1, 2)
    track_steps: int = 3_000_000
    catch_steps: int = 3_000_000
    eval_episodes: int = 256
    setup: TrainSetup = field(default_factory=TrainSetup)

    @property
    def budget(self) -> int:
        return self.track_steps + self.catch_steps

    def to_dict(self) -> dict:
        return {"seeds": list(self.seeds), "track_steps": self.track_steps, "catch_steps": self.catch_steps,
                "eval_episodes": self.eval_episodes, "setup": self.setup.to_dict()}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def policy_only(ckpt: Checkpoint) -> Checkpoint:
    """Drop optimizer and RNG tensors; what remains is enough to evaluate."""
    tensors = {k: v for k, v in ckpt.tensors.items() if k.startswith(("net.", "normalizer."))}
    meta = {k: v for k, v in ckpt.meta.items() if k != "optim_param_groups"}
    return Checkpoint(ckpt.stage, ckpt.mode, ckpt.step, ckpt.updates, tensors, meta)


def eval_seed(seed: int) -> int:
    return seed + EVAL_SEED_OFFSET


def evaluate_checkpoint(ckpt: Checkpoint, seed: int, episodes: int, held_out: bool = False) -> dict:
    """Deterministic success rates (percent) of a stored policy.

    Tracking policies are scored on ``episodes`` mixed training objects.
    Catching policies get ``episodes`` per object class; the headline rate
    is the mean over classes.
    """
    if ckpt.stage == TRACKING:
        net = network_from_checkpoint(ckpt)
        setup = TrainSetup.from_dict(ckpt.meta["config"])
        env_cfg = replace(setup.env, stage=TRACKING, roll_enabled=net.roll_enabled)
        res = evaluate(net, env_cfg, episodes, eval_seed(seed), setup.weights)
        return {"touch": 100.0 * res.touch_rate, "catch": None, "episodes": res.episodes}
    classes = tuple(HELD_OUT) if held_out else TRAIN_CLASSES
    report = eval_report([ckpt], classes, episodes, eval_seed(seed), groups=1)
    per_class = {c: {"touch": e["touch"]["mean"], "catch": e["catch"]["mean"]}
                 for c, e in report["classes"].items()}
    return {"touch": float(np.mean([e["touch"] for e in per_class.values()])),
            "catch": float(np.mean([e["catch"] for e in per_class.values()])),
            "episodes": episodes * len(classes), "classes": per_class}


class Runner:
    def __init__(self, protocol: Protocol, out: Path):
        self.p = protocol
        self.out = Path(out)
        self.ckpt_dir = self.out / "checkpoints"
        self.path = self.out / RESULTS_FILE
        self.results = self._load()

    def _load(self) -> dict:
        if self.path.exists():
            data = json.loads(self.path.read_text())
            if data.get("protocol_digest") == self.p.digest():
                return data
            log.warning("protocol changed; starting a fresh results file")
        return {"protocol_digest": self.p.digest(), "protocol": self.p.to_dict(), "runs": {}}

    def _save(self):
        self.out.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.results, indent=2, sort_keys=True) + "\n")
        tmp.replace(self.path)

    def _train(self, key: str, mode: str, seed: int, steps: int, net=None, roll: bool = True) -> Checkpoint:
        ckpt_path = self.ckpt_dir / f"{key}.bin"
        if key in self.results["runs"] and ckpt_path.exists():
            return load_checkpoint(ckpt_path)
        setup = replace(self.p.setup, ppo=replace(self.p.setup.ppo, seed=seed),
                        env=replace(self.p.setup.env, roll_enabled=roll))
        t0 = time.time()
        trainer = Trainer(setup, mode, net, out_dir=self.out / "runs" / key, seed=seed)
        ckpt = policy_only(trainer.train(steps))
        save_checkpoint(ckpt_path, ckpt)
        (self.out / "runs" / key / "final.bin").unlink(missing_ok=True)  # full state; only curves are kept
        entry = {"mode": mode, "seed": seed, "steps": ckpt.step, "digest": ckpt.digest(),
                 "checkpoint": str(ckpt_path.relative_to(self.out)), "wall_s": round(time.time() - t0, 1),
                 "eval": evaluate_checkpoint(ckpt, seed, self.p.eval_episodes)}
        if mode != TRACK:
            entry["eval_held_out"] = evaluate_checkpoint(ckpt, seed, self.p.eval_episodes, held_out=True)
        self.results["runs"][key] = entry
        self._save()
        log.info("%s done: %s", key, entry["eval"])
        return ckpt

    def run(self, methods=("two-stage", "one-stage", "no-roll")):
        for seed in self.p.seeds:
            if "two-stage" in methods:
                track = self._train(f"track_s{seed}", TRACK, seed, self.p.track_steps)
                net = transfer_to_catching(track, self.p.setup.ppo)
                self._train(f"two-stage_s{seed}", TWO_STAGE, seed, self.p.catch_steps, net)
            if "no-roll" in methods:
                track = self._train(f"track-no-roll_s{seed}", TRACK, seed, self.p.track_steps, roll=False)
                net = transfer_to_catching(track, self.p.setup.ppo, roll_enabled=False)
                self._train(f"no-roll_s{seed}", NO_ROLL, seed, self.p.catch_steps, net, roll=False)
            if "one-stage" in methods:
                self._train(f"one-stage_s{seed}", ONE_STAGE, seed, self.p.budget)
        return self.results


def summarize(results: dict) -> dict:
    """Seed-averaged success rates (percent) per method."""
    runs = results["runs"]
    out = {}
    for method in ("track", "track-no-roll", "two-stage", "no-roll", "one-stage"):
        keys = sorted(k for k in runs if k.rsplit("_s", 1)[0] == method)
        if not keys:
            continue
        touch = np.array([runs[k]["eval"]["touch"] for k in keys])
        entry = {"seeds": len(keys), "touch_mean": float(touch.mean()), "touch_std": float(touch.std())}
        if runs[keys[0]]["eval"]["catch"] is not None:
            catch = np.array([runs[k]["eval"]["catch"] for k in keys])
            entry.update(catch_mean=float(catch.mean()), catch_std=float(catch.std()))
        if all("eval_held_out" in runs[k] for k in keys):
            held = np.array([runs[k]["eval_held_out"]["catch"] for k in keys])
            entry["held_out_catch_mean"] = float(held.mean())
            entry["held_out_catch_std"] = float(held.std())
        out[method] = entry
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--track-steps", type=float, default=Protocol.track_steps)
    ap.add_argument("--catch-steps", type=float, default=Protocol.catch_steps)
    ap.add_argument("--methods", nargs="+", default=["two-stage", "one-stage", "no-roll"])
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")
    protocol = Protocol(tuple(args.seeds), int(args.track_steps), int(args.catch_steps))
    results = Runner(protocol, Path(args.out)).run(tuple(args.methods))
    print(json.dumps(summarize(results), indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
