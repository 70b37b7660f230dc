"""Reward terms for the tracking and catching tasks.

Every term is a pure function of a :class:`RewardContext`; fields may be
scalars or arrays with a leading batch dimension, so the environment can
score all of its instances in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from mobicatch.simenv.types import CATCHING, TRACKING, check_stage

TERMS = ("pos", "pre", "orient", "touch", "stab", "ctrl", "cstr")
PRECISION_SCALE = 50.0

# Which terms each task uses.
STAGE_TERMS = {
    TRACKING: frozenset({"pos", "pre", "orient", "touch", "ctrl", "cstr"}),
    CATCHING: frozenset({"pos", "pre", "orient", "stab", "ctrl", "cstr"}),
}


@dataclass
class RewardContext:
    obj_pos: np.ndarray  # p_t, world, m
    obj_vel: np.ndarray  # p_t - p_{t-1}, m per control step
    ee_pos: np.ndarray  # palm position e_t, world, m
    palm_z: np.ndarray  # unit palm normal
    d_prev: np.ndarray | float  # running closest palm-object distance before this step
    action: np.ndarray  # policy output a_t (normalized, clamped)
    touch: np.ndarray | bool = False
    grasp_dt: np.ndarray | float = 0.0  # held time accrued this step, s
    limit_violation: np.ndarray | bool = False

    def distance(self) -> np.ndarray:
        return np.linalg.norm(np.asarray(self.ee_pos) - np.asarray(self.obj_pos), axis=-1)

    def d_current(self) -> np.ndarray:
        """Running minimum after this step, d_t = min(d_{t-1}, |e_t - p_t|)."""
        return np.minimum(self.d_prev, self.distance())


@dataclass(frozen=True)
class RewardWeights:
    """Non-negative scales; ctrl and cstr act as penalties.

    ``pos`` is kept small: once the object has passed the palm every step
    pays the distance regained, and a large weight makes that tail outweigh
    the reward for having come close at all.
    """

    pos: float = 2.0
    pre: float = 5.0
    orient: float = 0.5
    touch: float = 10.0
    stab: float = 20.0
    ctrl: float = 0.01
    cstr: float = 1.0

    def __post_init__(self):
        if any(getattr(self, f.name) < 0 for f in fields(self)):
            raise ValueError("reward weights are magnitudes and must be non-negative")

    def to_dict(self) -> dict:
        return {t: getattr(self, t) for t in TERMS}


@dataclass(frozen=True)
class StageWeights:
    tracking: RewardWeights = RewardWeights()
    catching: RewardWeights = RewardWeights()

    def for_stage(self, stage: str) -> RewardWeights:
        return getattr(self, check_stage(stage))

    def to_dict(self) -> dict:
        return {TRACKING: self.tracking.to_dict(), CATCHING: self.catching.to_dict()}

    @classmethod
    def from_dict(cls, d: dict | None) -> "StageWeights":
        d = d or {}
        unknown = set(d) - {TRACKING, CATCHING}
        if unknown:
            raise ValueError(f"unknown reward stages: {sorted(unknown)}")
        return cls(RewardWeights(**d.get(TRACKING, {})), RewardWeights(**d.get(CATCHING, {})))


def load_weights(path: str | Path | None) -> StageWeights:
    if path is None:
        return StageWeights()
    return StageWeights.from_dict(yaml.safe_load(Path(path).read_text()))


def r_pos(ctx: RewardContext):
    return ctx.d_prev - ctx.distance()


def r_pre(ctx: RewardContext):
    d = ctx.d_current()
    return np.exp(-PRECISION_SCALE * d * d)


def r_orient(ctx: RewardContext):
    dot = np.sum(np.asarray(ctx.obj_vel) * np.asarray(ctx.palm_z), axis=-1)
    return np.clip(dot, -1.0, 1.0)


def r_touch(ctx: RewardContext):
    return np.where(ctx.touch, 1.0, 0.0)


def r_stab(ctx: RewardContext):
    return np.asarray(ctx.grasp_dt, dtype=float) * 1.0


def r_ctrl(ctx: RewardContext):
    a = np.asarray(ctx.action, dtype=float)
    return np.sum(a * a, axis=-1)


def r_cstr(ctx: RewardContext):
    return np.where(ctx.limit_violation, -1.0, 0.0)


_TERM_FNS = {"pos": r_pos, "pre": r_pre, "orient": r_orient, "touch": r_touch,
             "stab": r_stab, "ctrl": r_ctrl, "cstr": r_cstr}


def signed_weights(weights: RewardWeights, stage: str) -> np.ndarray:
    """Coefficient per term in TERMS order, zero for terms the stage omits."""
    active = STAGE_TERMS[check_stage(stage)]
    w = []
    for t in TERMS:
        k = getattr(weights, t) if t in active else 0.0
        w.append(-k if t == "ctrl" else k)
    return np.array(w)


def reward_terms(ctx: RewardContext) -> np.ndarray:
    """Raw term values stacked along the last axis in TERMS order."""
    vals = [np.asarray(_TERM_FNS[t](ctx), dtype=float) for t in TERMS]
    return np.stack(np.broadcast_arrays(*vals), axis=-1)


def total_reward(ctx: RewardContext, weights: RewardWeights, stage: str):
    """Weighted sum plus a per-term breakdown (unweighted values)."""
    terms = reward_terms(ctx)
    total = terms @ signed_weights(weights, stage)
    breakdown = {t: terms[..., i] for i, t in enumerate(TERMS)}
    if np.ndim(total) == 0:
        total = float(total)
        breakdown = {k: float(v) for k, v in breakdown.items()}
    return total, breakdown
