"""Command-line front end: train, eval, replay and plotdata."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from importlib import metadata
from pathlib import Path

import numpy as np
import torch
import yaml

from mobicatch.ppo.algo import PpoConfig
from mobicatch.ppo.checkpoint import load_checkpoint
from mobicatch.ppo.network import sample_actions
from mobicatch.ppo.train import (
    MODES, NO_ROLL, ONE_STAGE, TRACK, TWO_STAGE, TrainSetup, Trainer, evaluate, network_from_checkpoint,
    transfer_to_catching,
)
from mobicatch.rewards import StageWeights
from mobicatch.simenv.config import ConfigError, EnvConfig
from mobicatch.simenv.env import VecCatchEnv
from mobicatch.simenv.objects import HELD_OUT, ObjectRanges, held_out_object, sample_object
from mobicatch.simenv.replay import record_episodes, write_jsonl

log = logging.getLogger("mobicatch")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# --stage/--mode spellings accepted on the command line.
MODE_ALIASES = {
    "track": TRACK, "tracking": TRACK,
    "catch:two-stage": TWO_STAGE, "two-stage": TWO_STAGE,
    "catch:one-stage": ONE_STAGE, "one-stage": ONE_STAGE,
    "catch:no-roll": NO_ROLL, "no-roll": NO_ROLL,
}


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunConfig:
    """Everything one ``train`` invocation needs; sections may be inline or file paths."""

    setup: TrainSetup = field(default_factory=TrainSetup)
    mode: str = TRACK
    seed: int = 0
    out: Path = Path("runs/default")
    init: Path | None = None  # tracking checkpoint for two-stage and no-roll
    total_steps: int | None = None

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls()
        base = Path(path).parent
        data = _read_yaml(path) or {}
        unknown = set(data) - {"env", "ppo", "weights", "mode", "seed", "out", "init", "total_steps"}
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        try:
            env = EnvConfig.from_dict(_section(data.get("env"), base))
            ppo = PpoConfig.from_dict(_section(data.get("ppo"), base))
            weights = StageWeights.from_dict(_section(data.get("weights"), base))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        init = data.get("init")
        return cls(TrainSetup(env, ppo, weights), resolve_mode(data.get("mode", TRACK)),
                   int(data.get("seed", ppo.seed)), Path(data.get("out", "runs/default")),
                   None if init is None else base / init, data.get("total_steps"))


def _read_yaml(path) -> dict:
    try:
        return yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _section(value, base: Path) -> dict:
    if value is None:
        return {}
    if isinstance(value, str):
        return _read_yaml(base / value) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section must be a mapping or a file path, got {value!r}")
    return value


def resolve_mode(mode: str | None, stage: str | None = None) -> str:
    """Map ``--stage``/``--mode`` (or a config's ``mode``) onto a trainer mode."""
    if stage in ("track", "tracking"):
        key = "track"
    elif stage == "catch":
        key = mode if mode and ":" in mode else f"catch:{mode or TWO_STAGE}"
    else:
        key = mode
    if key not in MODE_ALIASES:
        raise ConfigError(f"unknown stage/mode {key!r}; expected one of {sorted(MODE_ALIASES)}")
    return MODE_ALIASES[key]


def write_manifest(out: Path, run: RunConfig, extra: dict) -> Path:
    manifest = {
        "version": package_version(),
        "mode": run.mode,
        "seed": run.seed,
        "config_digest": run.setup.digest(),
        "config": run.setup.to_dict(),
        "argv": sys.argv[1:],
        **extra,
    }
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# -- train ---------------------------------------------------------------

def latest_checkpoint(out: Path) -> Path | None:
    cands = sorted(out.glob("ckpt_*.bin"))
    if (out / "final.bin").exists():
        cands.append(out / "final.bin")
    return max(cands, key=lambda p: load_checkpoint(p).updates) if cands else None


def cmd_train(args) -> int:
    run = RunConfig.load(args.config)
    if args.mode or args.stage:
        run.mode = resolve_mode(args.mode, args.stage)
    if args.seed is not None:
        run.seed = args.seed
    if args.out:
        run.out = Path(args.out)
    if args.init:
        run.init = Path(args.init)
    if args.steps:
        run.total_steps = int(float(args.steps))
    setup = replace(run.setup, ppo=replace(run.setup.ppo, seed=run.seed))
    run.setup = setup
    extra = {}
    if args.resume:
        path = latest_checkpoint(run.out) if args.resume == "latest" else Path(args.resume)
        if path is None:
            raise ConfigError(f"no checkpoint to resume from in {run.out}")
        ckpt = load_checkpoint(path)
        if ckpt.mode != run.mode:
            raise ConfigError(f"checkpoint mode {ckpt.mode!r} does not match requested {run.mode!r}")
        trainer = Trainer.resume(ckpt, setup, out_dir=run.out)
        extra["resumed_from"] = {"path": str(path), "digest": ckpt.digest(), "step": ckpt.step}
    else:
        net = None
        if run.mode in (TWO_STAGE, NO_ROLL):
            if run.init is None:
                raise ConfigError(f"mode {run.mode!r} needs a tracking checkpoint (--init)")
            src = load_checkpoint(run.init)
            net = transfer_to_catching(src, setup.ppo, roll_enabled=run.mode != NO_ROLL)
            extra["init"] = {"path": str(run.init), "digest": src.digest()}
        trainer = Trainer(setup, run.mode, net, out_dir=run.out, seed=run.seed)
    write_manifest(run.out, run, extra)
    ckpt = trainer.train(run.total_steps)
    extra["final"] = {"path": str(run.out / "final.bin"), "digest": ckpt.digest(), "step": ckpt.step,
                      "updates": ckpt.updates}
    write_manifest(run.out, run, extra)
    print(f"trained {run.mode} to step {ckpt.step}; final checkpoint digest {ckpt.digest()[:16]}")
    return EXIT_OK


# -- eval ----------------------------------------------------------------

TRAIN_CLASSES = ("box", "sphere", "ellipsoid", "cylinder", "capsule")


def class_objects(name: str, n: int, seed: int, ranges: ObjectRanges):
    if name in HELD_OUT:
        return [held_out_object(name)] * n
    rng = np.random.default_rng(seed)
    return [sample_object(rng, ranges, name) for _ in range(n)]


def aggregate(groups: list[dict]) -> dict:
    """Mean and std (over seed groups) of per-class success percentages.

    ``groups`` holds one ``{class: {"touch": %, "catch": %, "trials": n}}``
    entry per seed group; the result does not depend on their order.
    """
    classes = sorted({c for g in groups for c in g})
    out = {}
    for c in classes:
        rows = [g[c] for g in groups if c in g]
        entry = {"trials": int(sum(r["trials"] for r in rows)), "groups": len(rows)}
        for key in ("touch", "catch"):
            vals = np.sort([r[key] for r in rows if r[key] is not None])
            if len(vals):
                entry[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
            else:
                entry[key] = None
        out[c] = entry
    return out


def eval_report(ckpts: list, classes, episodes: int, seed: int, groups: int,
                deterministic: bool = True, env: EnvConfig | None = None) -> dict:
    stages = {c.stage for c in ckpts}
    if len(stages) != 1:
        raise ConfigError("all checkpoints in one report must share a stage")
    stage = stages.pop()
    results = []
    digests = []
    for ckpt in ckpts:
        net = network_from_checkpoint(ckpt)
        cfg_dict = ckpt.meta.get("config", {})
        env_cfg = env or EnvConfig.from_dict(cfg_dict.get("env", {}))
        env_cfg = replace(env_cfg, stage=stage, roll_enabled=net.roll_enabled)
        weights = StageWeights.from_dict(cfg_dict.get("weights"))
        digests.append(ckpt.meta.get("digest"))
        for g in range(groups):
            group_seed = seed + g
            per_class = {}
            for k, name in enumerate(classes):
                objs = class_objects(name, episodes, group_seed * 1000 + k, env_cfg.objects)
                res = evaluate(net, env_cfg, episodes, group_seed * 1000 + k, weights, objs, deterministic)
                per_class[name] = {"touch": 100.0 * res.touch_rate,
                                   "catch": 100.0 * res.catch_rate if stage == "catching" else None,
                                   "trials": res.episodes}
            results.append(per_class)
    return {"stage": stage, "episodes_per_class": episodes, "seed": seed, "groups_per_checkpoint": groups,
            "checkpoints": len(ckpts), "config_digests": digests, "deterministic": deterministic,
            "std_over": "seed groups", "classes": aggregate(results), "version": package_version()}


def format_report(report: dict) -> str:
    lines = [f"stage {report['stage']}  (mean ± std over {report['std_over']})",
             f"{'class':<12}{'trials':>8}{'track S.R. %':>18}{'catch S.R. %':>18}"]
    for name, e in report["classes"].items():
        def cell(x):
            return "-" if x is None else f"{x['mean']:.1f} ± {x['std']:.1f}"
        lines.append(f"{name:<12}{e['trials']:>8}{cell(e['touch']):>18}{cell(e['catch']):>18}")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    ckpts = [load_checkpoint(p) for p in args.checkpoints]
    if args.stage:
        want = "tracking" if args.stage in ("track", "tracking") else "catching"
        bad = [str(p) for p, c in zip(args.checkpoints, ckpts) if c.stage != want]
        if bad:
            raise ConfigError(f"checkpoint stage does not match --stage {args.stage}: {bad}")
    if args.objects == "train":
        classes = TRAIN_CLASSES
    elif args.objects == "held-out":
        classes = tuple(HELD_OUT)
    else:
        classes = TRAIN_CLASSES + tuple(HELD_OUT)
    env = None if args.config is None else RunConfig.load(args.config).setup.env
    report = eval_report(ckpts, classes, args.episodes, args.seed or 0, args.groups,
                         args.deterministic, env)
    print(format_report(report))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -- replay --------------------------------------------------------------

def cmd_replay(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    net = network_from_checkpoint(ckpt)
    cfg_dict = ckpt.meta.get("config", {})
    env_cfg = replace(EnvConfig.from_dict(cfg_dict.get("env", {})), stage=ckpt.stage,
                      roll_enabled=net.roll_enabled)
    env = VecCatchEnv(env_cfg, 1, StageWeights.from_dict(cfg_dict.get("weights")), seed=args.seed or 0)
    gen = torch.Generator().manual_seed(args.seed or 0)

    def policy(obs):
        act, _, _ = sample_actions(net, net.normalize(obs), gen, args.deterministic)
        return act.double().numpy()

    records = record_episodes(env, policy, args.episodes, args.seed or 0)
    out = Path(args.out or "replay.jsonl")
    write_jsonl(out, records)
    print(f"wrote {len(records)} records for {args.episodes} episodes to {out}")
    return EXIT_OK


# -- plotdata ------------------------------------------------------------

CURVE_COLUMNS = ("step", "episode_return", "success_touch", "success_catch", "eval_touch", "eval_catch")


def downsample(rows: list, every: int) -> list:
    """Every ``every``-th row starting with the first, plus the last row."""
    if every < 1:
        raise ValueError("downsampling factor must be >= 1")
    keep = rows[::every]
    if rows and (len(rows) - 1) % every:
        keep.append(rows[-1])
    return keep


def read_curves(path) -> tuple[list, int]:
    """Curve rows (floats, NaN for blanks) and the number of malformed rows skipped."""
    rows, skipped = [], 0
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "step" not in reader.fieldnames:
            raise ConfigError(f"{path} has no 'step' column")
        for raw in reader:
            try:
                row = {}
                for col in CURVE_COLUMNS:
                    val = raw.get(col)
                    if col == "step":
                        row[col] = int(val)
                    else:
                        row[col] = float(val) if val not in (None, "") else math.nan
                if None in raw:  # more fields than the header
                    raise ValueError("extra fields")
            except (TypeError, ValueError):
                skipped += 1
                continue
            rows.append(row)
    return rows, skipped


def cmd_plotdata(args) -> int:
    rows, skipped = read_curves(args.metrics)
    if skipped:
        log.warning("skipped %d malformed rows in %s", skipped, args.metrics)
    kept = downsample(rows, args.every)
    out = Path(args.out or Path(args.metrics).with_name("curves.csv"))
    with out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, CURVE_COLUMNS)
        w.writeheader()
        for r in kept:
            w.writerow({k: "" if isinstance(v, float) and math.isnan(v) else v for k, v in r.items()})
    print(f"wrote {len(kept)} of {len(rows)} rows to {out} ({skipped} malformed rows skipped)")
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mobicatch", description="Train and evaluate mobile catching policies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one stage/mode")
    t.add_argument("--config", help="run config YAML")
    t.add_argument("--stage", choices=["track", "catch"])
    t.add_argument("--mode", help=f"one of {sorted(MODES)} (or catch:<mode>)")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--init", help="tracking checkpoint to transfer from")
    t.add_argument("--resume", help="checkpoint path, or 'latest' in --out")
    t.add_argument("--steps", help="total env steps (overrides the config)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="success rates per object class")
    e.add_argument("checkpoints", nargs="+", help="one checkpoint per training seed")
    e.add_argument("--config", help="run config whose env section overrides the checkpoint's")
    e.add_argument("--stage", choices=["track", "catch"])
    e.add_argument("--episodes", type=int, default=256, help="episodes per class per seed group")
    e.add_argument("--groups", type=int, default=1, help="eval seed groups per checkpoint")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--objects", choices=["train", "held-out", "all"], default="all")
    e.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    e.add_argument("--out", help="JSON report path")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("replay", help="export per-step trajectory records")
    r.add_argument("checkpoint")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--episodes", type=int, default=1)
    r.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_replay)

    d = sub.add_parser("plotdata", help="downsample a metrics CSV into curve columns")
    d.add_argument("metrics")
    d.add_argument("--every", type=int, default=1)
    d.add_argument("--out")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, RuntimeError, OSError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
