"""Thrown objects: shape sampling, launch solving and ballistic flight."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mobicatch.simenv.types import ObjectSpec, Shape

TRAINING_SHAPES = (Shape.BOX, Shape.SPHERE, Shape.ELLIPSOID, Shape.CYLINDER, Shape.CAPSULE)

# Size ranges (m) per shape; see ObjectSpec for the meaning of each entry.
SIZE_RANGES = {
    Shape.BOX: [(0.025, 0.045)] * 3,
    Shape.SPHERE: [(0.03, 0.06)],
    Shape.ELLIPSOID: [(0.025, 0.06)] * 3,
    Shape.CYLINDER: [(0.025, 0.04), (0.03, 0.06)],
    Shape.CAPSULE: [(0.02, 0.035), (0.02, 0.05)],
}

# Held-out evaluation objects as (bounding radius m, mass kg, damping 1/s).
# Each tuple leaves the training ranges in at least one field.
HELD_OUT = {
    "bowl": (0.09, 0.25, 0.12),
    "bottle": (0.10, 0.45, 0.05),
    "wine_cup": (0.08, 0.18, 0.15),
    "cup": (0.06, 0.35, 0.12),
    "bread": (0.07, 0.04, 0.20),
}


@dataclass(frozen=True)
class ObjectRanges:
    mass: tuple = (0.05, 0.3)
    damping: tuple = (0.0, 0.1)
    shapes: tuple = tuple(s.value for s in TRAINING_SHAPES)
    randomize: bool = True
    # Used verbatim when randomization is off.
    default_shape: str = "sphere"
    default_size: tuple = (0.045,)
    default_mass: float = 0.15
    default_damping: float = 0.05

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectRanges":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_dict(self) -> dict:
        return {"mass": list(self.mass), "damping": list(self.damping), "shapes": list(self.shapes),
                "randomize": self.randomize, "default_shape": self.default_shape,
                "default_size": list(self.default_size), "default_mass": self.default_mass,
                "default_damping": self.default_damping}

    def default_spec(self) -> ObjectSpec:
        return ObjectSpec(self.default_shape, Shape(self.default_shape), tuple(self.default_size),
                          self.default_mass, self.default_damping)


def sample_object(rng: np.random.Generator, ranges: ObjectRanges, shape: str | None = None) -> ObjectSpec:
    """Random training object; ``shape`` pins the class (used by evaluation)."""
    if not ranges.randomize and shape is None:
        return ranges.default_spec()
    if shape is None:
        shape = ranges.shapes[int(rng.integers(len(ranges.shapes)))]
    sh = Shape(shape)
    size = tuple(float(rng.uniform(lo, hi)) for lo, hi in SIZE_RANGES[sh])
    mass = float(rng.uniform(*ranges.mass))
    damping = float(rng.uniform(*ranges.damping))
    return ObjectSpec(sh.value, sh, size, mass, damping)


def held_out_object(name: str) -> ObjectSpec:
    radius, mass, damping = HELD_OUT[name]
    return ObjectSpec(name, None, (radius,), mass, damping)


@dataclass(frozen=True)
class LauncherConfig:
    """Where throws start and where they would land on flat ground.

    Coordinates are in the world frame with the robot starting at the
    origin facing +x.  The landing sector is measured from +x.
    """

    start_x: tuple = (2.0, 3.0)
    start_y: tuple = (-0.6, 0.6)
    start_z: tuple = (1.0, 1.8)
    landing_radius: tuple = (0.3, 1.5)
    landing_half_angle: float = math.radians(75.0)
    flight_time: tuple = (0.8, 1.6)
    max_speed: float = 8.0
    max_tries: int = 100

    def __post_init__(self):
        for name in ("start_x", "start_y", "start_z", "landing_radius", "flight_time"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range")
        if self.flight_time[0] <= 0:
            raise ValueError("flight time must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "LauncherConfig":
        d = dict(d)
        if "landing_half_angle_deg" in d:
            d["landing_half_angle"] = math.radians(d.pop("landing_half_angle_deg"))
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_dict(self) -> dict:
        return {"start_x": list(self.start_x), "start_y": list(self.start_y), "start_z": list(self.start_z),
                "landing_radius": list(self.landing_radius),
                "landing_half_angle_deg": math.degrees(self.landing_half_angle),
                "flight_time": list(self.flight_time), "max_speed": self.max_speed,
                "max_tries": self.max_tries}


@dataclass
class Launch:
    position: np.ndarray
    velocity: np.ndarray
    landing: np.ndarray  # planned (x, y) where the center reaches z = 0
    flight_time: float


class LaunchError(RuntimeError):
    pass


def landing_point(p0, v0, g: float):
    """Closed-form drag-free landing: returns ((x, y), time) for z reaching 0."""
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    t = (v0[2] + math.sqrt(v0[2] ** 2 + 2.0 * g * p0[2])) / g
    return p0[:2] + v0[:2] * t, t


def launch_object(rng: np.random.Generator, cfg: LauncherConfig, gravity: float = 9.81) -> Launch:
    """Sample a start point and solve the launch velocity for a target landing.

    The landing point is drawn in the configured annulus sector around the
    robot start, the flight time uniformly; the velocity then follows from
    drag-free ballistics.  Draws exceeding ``max_speed`` are rejected.
    """
    for _ in range(cfg.max_tries):
        p0 = np.array([rng.uniform(*cfg.start_x), rng.uniform(*cfg.start_y), rng.uniform(*cfg.start_z)])
        r = rng.uniform(*cfg.landing_radius)
        ang = rng.uniform(-cfg.landing_half_angle, cfg.landing_half_angle)
        land = np.array([r * math.cos(ang), r * math.sin(ang)])
        t = rng.uniform(*cfg.flight_time)
        vxy = (land - p0[:2]) / t
        vz = (0.5 * gravity * t * t - p0[2]) / t
        v0 = np.array([vxy[0], vxy[1], vz])
        if np.linalg.norm(v0) <= cfg.max_speed:
            return Launch(p0, v0, land, t)
    raise LaunchError(f"no admissible throw in {cfg.max_tries} tries; launcher ranges are inconsistent")


def flight_coefficients(damping, dt: float):
    """Per-object constants of the exact one-step flight map.

    Returns (a1, a2, decay) with a1 = dt * phi1(c dt), a2 = dt^2 * phi2(c dt)
    and decay = exp(-c dt), where phi1 = (1 - e^-x) / x and
    phi2 = (x - 1 + e^-x) / x^2 (evaluated by series for tiny x).
    """
    x = np.asarray(damping, dtype=float) * dt
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    phi1 = np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-xs) / xs)
    phi2 = np.where(small, 0.5 - x / 6.0 + x * x / 24.0, (xs + np.expm1(-xs)) / (xs * xs))
    return dt * phi1, dt * dt * phi2, np.exp(-x)


def flight_advance(p, v, gravity, coeffs):
    a1, a2, decay = coeffs
    a1 = np.asarray(a1)
    p_new = p + v * a1[..., None]
    p_new[..., 2] -= gravity * a2
    v_new = v * np.asarray(decay)[..., None]
    v_new[..., 2] -= gravity * a1
    return p_new, v_new


def flight_step(p: np.ndarray, v: np.ndarray, gravity, damping, dt: float):
    """Advance dp/dt = v, dv/dt = -g z - c v exactly over ``dt``.

    Works on single objects or batches ((N, 3) with (N,) gravity/damping).
    For zero damping this reduces to the textbook parabola, so a discrete
    trajectory lands exactly where the closed form says it will.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    return flight_advance(p, v, np.asarray(gravity, dtype=float), flight_coefficients(damping, dt))


def mechanical_energy(p, v, mass, gravity) -> np.ndarray:
    p = np.asarray(p)
    v = np.asarray(v)
    return mass * (0.5 * np.sum(v * v, axis=-1) + gravity * p[..., 2])
