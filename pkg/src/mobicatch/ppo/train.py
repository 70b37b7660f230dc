"""Training loops for the tracking stage, stage transfer and the catching stage."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from mobicatch.ppo.algo import PpoConfig, ppo_update
from mobicatch.ppo.checkpoint import (
    Checkpoint, pack_training_state, restore_generator, restore_network, restore_optimizer,
    save_checkpoint,
)
from mobicatch.ppo.network import PolicyNet, sample_actions, transfer_hand_free
from mobicatch.ppo.rollout import rollout
from mobicatch.rewards import TERMS, StageWeights
from mobicatch.simenv.config import EnvConfig
from mobicatch.simenv.env import VecCatchEnv
from mobicatch.simenv.types import CATCHING, TRACKING, ObjectSpec

log = logging.getLogger(__name__)

TRACK = "track"
TWO_STAGE = "two-stage"
ONE_STAGE = "one-stage"
NO_ROLL = "no-roll"
MODES = (TRACK, TWO_STAGE, ONE_STAGE, NO_ROLL)
EVAL_SEED_OFFSET = 1_000_003

METRIC_FIELDS = (
    ["step", "update", "episodes", "episode_return", "success_touch", "success_catch", "faults"]
    + [f"r_{t}" for t in TERMS]
    + ["policy_loss", "value_loss", "entropy", "clip_frac", "approx_kl", "eval_touch", "eval_catch",
       "steps_per_s"]
)


@dataclass(frozen=True)
class TrainSetup:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    weights: StageWeights = field(default_factory=StageWeights)

    def to_dict(self) -> dict:
        return {"env": self.env.to_dict(), "ppo": self.ppo.to_dict(), "weights": self.weights.to_dict()}

    @classmethod
    def from_dict(cls, d: dict | None) -> "TrainSetup":
        d = d or {}
        return cls(EnvConfig.from_dict(d.get("env", {})), PpoConfig.from_dict(d.get("ppo")),
                   StageWeights.from_dict(d.get("weights")))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def env_for(setup: TrainSetup, stage: str, roll_enabled: bool) -> EnvConfig:
    return replace(setup.env, stage=stage, roll_enabled=roll_enabled)


class MetricsWriter:
    """Append-only CSV with a fixed header."""

    def __init__(self, path: str | Path | None):
        self.path = None if path is None else Path(path)
        if self.path is not None and not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("w", newline="") as fh:
                csv.DictWriter(fh, METRIC_FIELDS).writeheader()

    def write(self, row: dict):
        if self.path is None:
            return
        with self.path.open("a", newline="") as fh:
            csv.DictWriter(fh, METRIC_FIELDS, extrasaction="ignore").writerow(
                {k: _fmt(row.get(k, "")) for k in METRIC_FIELDS})


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


@dataclass
class EvalResult:
    episodes: int
    touch_rate: float  # fraction in [0, 1]
    catch_rate: float
    mean_return: float
    touched: np.ndarray
    caught: np.ndarray

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "touch_rate": self.touch_rate,
                "catch_rate": self.catch_rate, "mean_return": self.mean_return}


def evaluate(net: PolicyNet, env_cfg: EnvConfig, episodes: int = 256, seed: int = 0,
             weights: StageWeights | None = None, objects: list[ObjectSpec] | None = None,
             deterministic: bool = True, max_batch: int = 256) -> EvalResult:
    """Run ``episodes`` fresh episodes and read outcomes straight from the env.

    ``objects`` pins the thrown object per episode (cycled if shorter).
    The network's normalizer is used but never updated.
    """
    if net.stage != env_cfg.stage:
        raise ValueError(f"policy stage {net.stage!r} does not match eval stage {env_cfg.stage!r}")
    cfg = replace(env_cfg, roll_enabled=env_cfg.roll_enabled and net.roll_enabled)
    touched, caught, returns = [], [], []
    gen = torch.Generator().manual_seed(int(seed))
    seeds = np.random.SeedSequence(int(seed)).generate_state(math.ceil(episodes / max_batch))
    done_count = 0
    for chunk, chunk_seed in enumerate(seeds):
        n = min(max_batch, episodes - done_count)
        env = VecCatchEnv(cfg, n, weights, seed=int(chunk_seed))
        if objects:
            env.object_override = [objects[(done_count + i) % len(objects)] for i in range(n)]
            obs = env.reset()
        else:
            obs = env.current_obs()
        while not env.done.all():
            act, _, _ = sample_actions(net, net.normalize(obs), gen, deterministic)
            obs, _, _, _ = env.step(act.double().numpy())
        touched.append(env.touched.copy())
        caught.append(env.caught.copy())
        returns.append(env.episode_return.copy())
        done_count += n
    t = np.concatenate(touched)
    c = np.concatenate(caught)
    r = np.concatenate(returns)
    return EvalResult(episodes, float(t.mean()), float(c.mean()), float(r.mean()), t, c)


class Trainer:
    """Owns one policy, its optimizer, its env batch and the step counter."""

    def __init__(self, setup: TrainSetup, mode: str, net: PolicyNet | None = None,
                 out_dir: str | Path | None = None, seed: int | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        torch.set_num_threads(1)
        self.setup = setup
        self.mode = mode
        self.stage = TRACKING if mode == TRACK else CATCHING
        self.seed = setup.ppo.seed if seed is None else int(seed)
        self.roll_enabled = mode != NO_ROLL and setup.env.roll_enabled
        cfg = setup.ppo
        torch.manual_seed(self.seed)
        if net is None:
            net = PolicyNet(self.stage, cfg.hidden, cfg.init_log_std, self.roll_enabled, cfg.obs_clip)
        if net.stage != self.stage:
            raise ValueError(f"network stage {net.stage!r} does not fit mode {mode!r}")
        self.net = net
        self.optimizer = torch.optim.Adam(self.net.parameters(), lr=cfg.lr, eps=1e-5)
        self.generator = torch.Generator().manual_seed(self.seed)
        self.env_cfg = env_for(setup, self.stage, self.roll_enabled)
        self.env = VecCatchEnv(self.env_cfg, cfg.num_envs, setup.weights, seed=self.seed)
        self.step = 0
        self.updates = 0
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.metrics = MetricsWriter(None if self.out_dir is None else self.out_dir / "metrics.csv")
        self.history: list[dict] = []

    def _reseed_env(self):
        # Resumed runs draw fresh episodes from a stream tied to the step count.
        self.env.reset(seed=int(np.random.SeedSequence([self.seed, self.updates]).generate_state(1)[0]))

    def train(self, total_steps: int | None = None) -> Checkpoint:
        cfg = self.setup.ppo
        target = cfg.total_steps if total_steps is None else int(total_steps)
        n_updates = cfg.num_updates(target)
        while self.updates < n_updates:
            t0 = time.perf_counter()
            batch = rollout(self.env, self.net, cfg.horizon, self.generator)
            batch.compute_advantages(cfg.gamma, cfg.lam)
            stats = ppo_update(self.net, self.optimizer, batch, cfg, self.generator)
            self.updates += 1
            self.step += cfg.steps_per_update
            row = {"step": self.step, "update": self.updates, **batch.episodes.summary(),
                   **batch.term_means(), **stats,
                   "steps_per_s": cfg.steps_per_update / (time.perf_counter() - t0)}
            if cfg.eval_every and (self.updates % cfg.eval_every == 0 or self.updates == n_updates):
                ev = self.evaluate(cfg.eval_episodes)
                row["eval_touch"], row["eval_catch"] = ev.touch_rate, ev.catch_rate
            self.history.append(row)
            self.metrics.write(row)
            log.info("update %d step %d return %.3f touch %.3f catch %.3f", self.updates, self.step,
                     row["episode_return"], row["success_touch"], row["success_catch"])
            if self.out_dir is not None and cfg.checkpoint_every and self.updates % cfg.checkpoint_every == 0:
                save_checkpoint(self.out_dir / f"ckpt_{self.updates:06d}.bin", self.checkpoint())
        ckpt = self.checkpoint()
        if self.out_dir is not None:
            save_checkpoint(self.out_dir / "final.bin", ckpt)
        return ckpt

    def evaluate(self, episodes: int, objects=None, seed: int | None = None) -> EvalResult:
        s = self.seed + EVAL_SEED_OFFSET if seed is None else seed
        return evaluate(self.net, self.env_cfg, episodes, s, self.setup.weights, objects)

    def checkpoint(self) -> Checkpoint:
        tensors, meta = pack_training_state(self.net, self.optimizer, self.generator)
        meta.update({"config": self.setup.to_dict(), "seed": self.seed, "hidden": list(self.net.hidden),
                     "roll_enabled": self.net.roll_enabled, "digest": self.setup.digest()})
        return Checkpoint(self.stage, self.mode, self.step, self.updates, tensors, meta)

    @classmethod
    def resume(cls, ckpt: Checkpoint, setup: TrainSetup, out_dir=None) -> "Trainer":
        net = network_from_checkpoint(ckpt)
        tr = cls(setup, ckpt.mode, net, out_dir, seed=ckpt.meta.get("seed"))
        restore_optimizer(tr.optimizer, ckpt)
        restore_generator(tr.generator, ckpt)
        tr.step, tr.updates = ckpt.step, ckpt.updates
        tr._reseed_env()
        return tr


def network_from_checkpoint(ckpt: Checkpoint) -> PolicyNet:
    ppo = ckpt.meta.get("config", {}).get("ppo", {})
    net = PolicyNet(ckpt.stage, tuple(ckpt.meta.get("hidden", (256, 256))),
                    roll_enabled=ckpt.meta.get("roll_enabled", True),
                    obs_clip=ppo.get("obs_clip", 10.0))
    restore_network(net, ckpt)
    return net


def train_tracking(setup: TrainSetup, out_dir=None, total_steps: int | None = None,
                   roll_enabled: bool = True) -> Checkpoint:
    mode = TRACK
    if not roll_enabled:
        setup = replace(setup, env=replace(setup.env, roll_enabled=False))
    return Trainer(setup, mode, out_dir=out_dir).train(total_steps)


def transfer_to_catching(track_ckpt: Checkpoint, ppo: PpoConfig | None = None,
                         roll_enabled: bool | None = None) -> PolicyNet:
    """Catching-stage network seeded from a tracking checkpoint.

    Trunk, base/arm head, critic, their log-stds and the normalizer are
    copied; the hand head starts at zero so the initial base/arm behaviour
    is exactly that of the tracking policy.  Optimizer state is not carried.
    """
    if track_ckpt.stage != TRACKING:
        raise ValueError(f"transfer needs a tracking checkpoint, got stage {track_ckpt.stage!r}")
    src = network_from_checkpoint(track_ckpt)
    ppo = ppo or PpoConfig()
    roll = src.roll_enabled if roll_enabled is None else roll_enabled
    dst = PolicyNet(CATCHING, src.hidden, ppo.init_log_std, roll, src.normalizer.clip)
    transfer_hand_free(src, dst)
    return dst


def train_catching(setup: TrainSetup, mode: str = TWO_STAGE, net: PolicyNet | None = None,
                   out_dir=None, total_steps: int | None = None) -> Checkpoint:
    if mode == ONE_STAGE and net is not None:
        raise ValueError("one-stage training starts from scratch; do not pass a network")
    if mode in (TWO_STAGE, NO_ROLL) and net is None:
        raise ValueError(f"mode {mode!r} needs a transferred network")
    if mode == TRACK:
        raise ValueError("use train_tracking for the tracking stage")
    return Trainer(setup, mode, net, out_dir).train(total_steps)
