"""Value types shared by the environment, the transfer tools and the trainer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TRACKING = "tracking"
CATCHING = "catching"
STAGES = (TRACKING, CATCHING)

NUM_HAND_JOINTS = 12
NUM_FIXED_HAND_JOINTS = 4
BASE_ARM_ACTION_DIM = 6  # vx, vy, dx, dy, dz, droll
FULL_ACTION_DIM = BASE_ARM_ACTION_DIM + NUM_HAND_JOINTS
ROLL_INDEX = 5
TRACK_OBS_DIM = 14
FULL_OBS_DIM = TRACK_OBS_DIM + NUM_HAND_JOINTS


def check_stage(stage: str) -> str:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    return stage


class Shape(str, Enum):
    BOX = "box"
    SPHERE = "sphere"
    ELLIPSOID = "ellipsoid"
    CYLINDER = "cylinder"
    CAPSULE = "capsule"


@dataclass(frozen=True)
class ObjectSpec:
    """Physical description of a thrown object.

    ``size`` meaning per shape: box half-extents (3), sphere radius (1),
    ellipsoid semi-axes (3), cylinder (radius, half-height), capsule
    (radius, half-length of the straight segment).  Held-out evaluation
    objects carry only a bounding radius (``shape=None``).
    """

    name: str
    shape: Shape | None
    size: tuple
    mass: float
    damping: float

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if not self.size or any(s <= 0 for s in self.size):
            raise ValueError("size parameters must be positive")

    @property
    def bounding_radius(self) -> float:
        s = self.size
        if self.shape is None or self.shape == Shape.SPHERE:
            return float(s[0])
        if self.shape == Shape.BOX:
            return float(math.sqrt(sum(x * x for x in s)))
        if self.shape == Shape.ELLIPSOID:
            return float(max(s))
        if self.shape == Shape.CYLINDER:
            return float(math.hypot(s[0], s[1]))
        if self.shape == Shape.CAPSULE:
            return float(s[0] + s[1])
        raise ValueError(f"unhandled shape {self.shape}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "shape": None if self.shape is None else self.shape.value,
            "size": list(self.size),
            "mass": self.mass,
            "damping": self.damping,
            "bounding_radius": self.bounding_radius,
        }


@dataclass
class ObjectState:
    position: np.ndarray
    velocity: np.ndarray
    spec: ObjectSpec
    held: bool = False
    launch_step: int = 0
    # Object position in the palm frame while held.
    attachment: np.ndarray | None = None

    def __post_init__(self):
        if self.held and self.attachment is None:
            raise ValueError("held object needs an attachment transform")


@dataclass(frozen=True)
class EnvParams:
    """Per-episode physical and controller parameters."""

    gravity: float = 9.81
    # Servo gain scales for base, arm and hand first-order lags.
    gain_scale: tuple = (1.0, 1.0, 1.0)
    throw_delay: int = 0  # control steps before launch
    obs_noise: float = 0.0  # m
    action_noise: float = 0.0  # normalized action units
    obj: ObjectSpec | None = None

    def __post_init__(self):
        if self.obs_noise < 0 or self.action_noise < 0:
            raise ValueError("noise scales must be non-negative")
        if self.throw_delay < 0:
            raise ValueError("throw delay must be non-negative")

    def to_dict(self) -> dict:
        return {
            "gravity": self.gravity,
            "gain_scale": list(self.gain_scale),
            "throw_delay": self.throw_delay,
            "obs_noise": self.obs_noise,
            "action_noise": self.action_noise,
            "obj": None if self.obj is None else self.obj.to_dict(),
        }


@dataclass
class Observation:
    """Policy input, all positions in the arm-base frame.

    Vector layout (``to_vector``): object at t, object at t-1, palm at t,
    palm at t-1, base body velocity, then 12 hand joints.  The tracking
    stage has no hand fields; ``to_vector(pad=True)`` zero-fills them so
    both stages feed the same network input width.
    """

    object_pos: np.ndarray
    object_pos_prev: np.ndarray
    ee_pos: np.ndarray
    ee_pos_prev: np.ndarray
    base_vel: np.ndarray
    hand: np.ndarray | None = None

    def to_vector(self, pad: bool = True) -> np.ndarray:
        parts = [self.object_pos, self.object_pos_prev, self.ee_pos, self.ee_pos_prev, self.base_vel]
        if self.hand is not None:
            parts.append(self.hand)
        elif pad:
            parts.append(np.zeros(NUM_HAND_JOINTS))
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    @classmethod
    def from_vector(cls, vec: np.ndarray, stage: str) -> "Observation":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[0:3], vec[3:6], vec[6:9], vec[9:12], vec[12:14],
                   vec[14:26].copy() if stage == CATCHING else None)


@dataclass(frozen=True)
class ActionBox:
    """Physical magnitude of a full-scale (+-1) policy output per field."""

    base_speed: float = 1.5  # m/s
    ee_step: float = 0.05  # m per control step
    roll_step: float = 0.2  # rad per control step
    hand_step: float = 0.2  # rad per control step


@dataclass
class Action:
    base_vel: np.ndarray
    ee_delta: np.ndarray
    roll_delta: float
    hand_delta: np.ndarray = field(default_factory=lambda: np.zeros(NUM_HAND_JOINTS))

    @classmethod
    def from_normalized(cls, a: np.ndarray, box: ActionBox = ActionBox()) -> "Action":
        a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
        hand = a[6:18] if a.shape[0] >= FULL_ACTION_DIM else np.zeros(NUM_HAND_JOINTS)
        return cls(a[0:2] * box.base_speed, a[2:5] * box.ee_step, float(a[5]) * box.roll_step,
                   hand * box.hand_step)

    def to_normalized(self, box: ActionBox = ActionBox()) -> np.ndarray:
        v = np.concatenate([
            np.asarray(self.base_vel) / box.base_speed,
            np.asarray(self.ee_delta) / box.ee_step,
            [self.roll_delta / box.roll_step],
            np.asarray(self.hand_delta) / box.hand_step,
        ])
        return np.clip(v, -1.0, 1.0)


@dataclass
class EpisodeOutcome:
    touched: bool = False
    caught: bool = False
    steps_held: int = 0
    d_min: float = math.inf
    fault: bool = False

    def to_dict(self) -> dict:
        return {"touched": self.touched, "caught": self.caught, "steps_held": self.steps_held,
                "d_min": self.d_min, "fault": self.fault}
