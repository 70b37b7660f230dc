"""Environment configuration (YAML-backed)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from mobicatch.kinematics import IkParams
from mobicatch.sim2real import RandomizationRanges
from mobicatch.simenv.objects import LauncherConfig, ObjectRanges
from mobicatch.simenv.types import ActionBox, check_stage


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration files."""


@dataclass(frozen=True)
class ContactConfig:
    touch_margin: float = 0.03  # palm-to-surface distance counted as touch, m
    hold_radius: float = 0.06  # palm-to-center capture distance, m
    close_threshold: float = 0.5
    open_threshold: float = 0.3
    max_relative_speed: float = 4.0  # m/s; palm-object speeds at capture range are 3.6-6.7 m/s

    def __post_init__(self):
        if self.open_threshold >= self.close_threshold:
            raise ConfigError("open_threshold must be below close_threshold (hold hysteresis)")
        if min(self.touch_margin, self.hold_radius, self.max_relative_speed) < 0:
            raise ConfigError("contact thresholds must be non-negative")


@dataclass(frozen=True)
class ServoConfig:
    base_tau: float = 0.150  # s
    arm_tau: float = 0.080
    hand_tau: float = 0.040


@dataclass(frozen=True)
class HandConfig:
    lower: float = -0.3
    upper: float = 1.8
    open_pose: float = 0.0
    closed_pose: float = 1.5
    home_pose: float = 0.6  # relaxed pre-grasp flexion, closure 0.4
    fixed_pose: tuple = (0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EnvConfig:
    stage: str = "tracking"
    roll_enabled: bool = True
    ik_solver: str = "qp"
    arm_model: str | None = None  # path; None selects the bundled arm
    mount_offset: tuple = (0.15, 0.0, 0.45)  # arm base in the base body frame, m
    sim_dt: float = 1.0 / 500.0
    substeps: int = 20
    episode_steps: int = 63  # ceil(2.5 s * 25 Hz)
    lpf_enabled: bool = True
    lpf_alpha: float = 0.9
    # Keep the accumulated palm target inside this shell around the shoulder.
    workspace_min_radius: float = 0.25
    workspace_max_radius: float = 0.72
    workspace_min_z: float = -0.3
    action_box: ActionBox = field(default_factory=ActionBox)
    contact: ContactConfig = field(default_factory=ContactConfig)
    servo: ServoConfig = field(default_factory=ServoConfig)
    hand: HandConfig = field(default_factory=HandConfig)
    ik: IkParams = field(default_factory=IkParams)
    launcher: LauncherConfig = field(default_factory=LauncherConfig)
    objects: ObjectRanges = field(default_factory=ObjectRanges)
    randomization: RandomizationRanges = field(default_factory=RandomizationRanges)

    def __post_init__(self):
        check_stage(self.stage)
        if self.ik_solver not in ("qp", "lm"):
            raise ConfigError(f"ik_solver must be 'qp' or 'lm', got {self.ik_solver!r}")
        if self.substeps < 1 or self.episode_steps < 1 or self.sim_dt <= 0:
            raise ConfigError("substeps, episode_steps and sim_dt must be positive")
        if not 0.0 <= self.lpf_alpha < 1.0:
            raise ConfigError("lpf_alpha must lie in [0, 1)")
        h = self.hand
        if not (h.lower <= h.home_pose <= h.upper and h.open_pose < h.closed_pose):
            raise ConfigError("hand home_pose must lie within the joint limits and open_pose < closed_pose")

    @property
    def control_dt(self) -> float:
        return self.sim_dt * self.substeps

    def with_stage(self, stage: str, **kw) -> "EnvConfig":
        return replace(self, stage=stage, **kw)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if hasattr(v, "to_dict"):
                d[f.name] = v.to_dict()
            elif hasattr(v, "__dataclass_fields__"):
                d[f.name] = {k: list(x) if isinstance(x, tuple) else x for k, x in asdict(v).items()}
            else:
                d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown env config keys: {sorted(unknown)}")
        nested = {
            "action_box": ActionBox, "contact": ContactConfig, "servo": ServoConfig,
            "hand": HandConfig, "ik": IkParams,
        }
        try:
            for key, typ in nested.items():
                if key in d:
                    d[key] = typ(**{k: tuple(v) if isinstance(v, list) else v for k, v in d[key].items()})
            if "launcher" in d:
                d["launcher"] = LauncherConfig.from_dict(d["launcher"])
            if "objects" in d:
                d["objects"] = ObjectRanges.from_dict(d["objects"])
            if "randomization" in d:
                d["randomization"] = RandomizationRanges.from_dict(d["randomization"])
            if "mount_offset" in d:
                d["mount_offset"] = tuple(d["mount_offset"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_env_config(path: str | Path | None) -> EnvConfig:
    if path is None:
        return EnvConfig()
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read env config {path}: {exc}") from exc
    return EnvConfig.from_dict(data or {})


def mount_array(cfg: EnvConfig) -> np.ndarray:
    return np.asarray(cfg.mount_offset, dtype=float)
