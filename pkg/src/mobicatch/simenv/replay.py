"""Line-delimited JSON trajectory export.

Each episode starts with an ``episode`` record (seed, sampled parameters,
object), continues with one ``step`` record per control step and closes
with an ``outcome`` record (episode return and outcome flags).  Step
records carry the robot and object state after the step, the executed
action, the reward, its per-term breakdown, the inputs needed to
recompute the reward offline, and the running flags.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from mobicatch.rewards import TERMS

SCHEMA_VERSION = 1
EPISODE_KEYS = {"type", "schema", "episode", "seed", "stage", "params"}
STEP_KEYS = {"type", "episode", "t", "time", "robot", "object", "action", "reward", "terms", "context",
             "flags"}
OUTCOME_KEYS = {"type", "episode", "steps", "episode_return", "outcome"}


def _context_record(ctx, i: int) -> dict:
    return {
        "obj_pos": ctx.obj_pos[i].tolist(), "obj_vel": ctx.obj_vel[i].tolist(),
        "ee_pos": ctx.ee_pos[i].tolist(), "palm_z": ctx.palm_z[i].tolist(),
        "d_prev": float(ctx.d_prev[i]), "action": ctx.action[i].tolist(),
        "touch": bool(np.asarray(ctx.touch)[i]), "grasp_dt": float(np.asarray(ctx.grasp_dt)[i]),
        "limit_violation": bool(np.asarray(ctx.limit_violation)[i]),
    }


def step_record(env, i: int, episode: int, reward: float, info: dict) -> dict:
    snap = env.snapshot(i)
    robot = {k: snap[k] for k in ("base_xy", "base_vel", "q", "hand", "palm", "palm_z")}
    obj = {"position": snap["object"], "velocity": snap["object_vel"], "launched": snap["launched"],
           "held": snap["held"]}
    return {
        "type": "step", "episode": episode, "t": snap["t"], "time": snap["time"],
        "robot": robot, "object": obj, "action": info["action"][i].tolist(), "reward": float(reward),
        "terms": {t: float(info["terms"][i, j]) for j, t in enumerate(TERMS)},
        "context": _context_record(info["context"], i),
        "flags": {"touched": bool(info["touched"][i]), "caught": bool(info["caught"][i]),
                  "held": bool(info["held"][i]), "fault": bool(info["fault"][i]),
                  "steps_held": int(info["steps_held"][i]), "d_min": float(info["d_min"][i])},
    }


def episode_record(env, i: int, episode: int, seed: int) -> dict:
    return {"type": "episode", "schema": SCHEMA_VERSION, "episode": episode, "seed": seed,
            "stage": env.stage, "params": env.params[i].to_dict()}


def outcome_record(env, i: int, episode: int) -> dict:
    return {"type": "outcome", "episode": episode, "steps": int(env.t[i]),
            "episode_return": float(env.episode_return[i]), "outcome": env.outcome(i).to_dict()}


def record_episodes(env, policy, episodes: int, seed: int) -> list[dict]:
    """Roll ``episodes`` episodes on instance 0 of ``env`` with ``policy(obs) -> action``."""
    records = []
    obs = env.reset(seed)
    for ep in range(episodes):
        if ep > 0:
            obs = env.reset_envs([0])
        records.append(episode_record(env, 0, ep, seed))
        while not env.done[0]:
            act = np.asarray(policy(obs), dtype=float)
            obs, reward, _, info = env.step(act)
            records.append(step_record(env, 0, ep, reward[0], info))
        records.append(outcome_record(env, 0, ep))
    return records


def write_jsonl(path: str | Path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def read_jsonl(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def validate_record(rec: dict):
    """Raise ValueError unless ``rec`` has exactly the published fields."""
    keys = {"episode": EPISODE_KEYS, "step": STEP_KEYS, "outcome": OUTCOME_KEYS}.get(rec.get("type"))
    if keys is None:
        raise ValueError(f"unknown record type {rec.get('type')!r}")
    if set(rec) != keys:
        raise ValueError(f"record fields {sorted(rec)} do not match schema {sorted(keys)}")
