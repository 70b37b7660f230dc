"""Transfer aids: command low-pass filtering and domain randomization."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from mobicatch.simenv.types import EnvParams

DEFAULT_ALPHA = 0.9


class LowPassFilter:
    """First-order recursive smoother, y_t = a * y_{t-1} + (1 - a) * x_t.

    ``shape`` may include a leading batch dimension so one filter object can
    serve a whole vector of environments.
    """

    def __init__(self, shape, alpha: float = DEFAULT_ALPHA):
        if not 0.0 <= alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        self.alpha = float(alpha)
        self.state = np.zeros(shape)
        self.shape = self.state.shape

    def reset(self, value=0.0, index=None):
        if index is None:
            self.state[...] = value
        else:
            self.state[index] = value

    def __call__(self, x) -> np.ndarray:
        return lpf_apply(self, x)


def lpf_apply(filt: LowPassFilter, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != filt.state.shape:
        raise ValueError(f"filter expects shape {filt.state.shape}, got {x.shape}")
    filt.state = filt.alpha * filt.state + (1.0 - filt.alpha) * x
    return filt.state.copy()


@dataclass(frozen=True)
class RandomizationRanges:
    gravity: tuple = (9.31, 10.31)
    gain_scale: tuple = (0.8, 1.2)
    throw_delay: tuple = (0, 12)  # control steps, inclusive
    obs_noise: tuple = (0.0, 0.01)
    action_noise: tuple = (0.0, 0.02)
    enabled: bool = True

    def __post_init__(self):
        for name in ("gravity", "gain_scale", "throw_delay", "obs_noise", "action_noise"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: low {lo} exceeds high {hi}")
        if self.obs_noise[0] < 0 or self.action_noise[0] < 0:
            raise ValueError("noise ranges must be non-negative")
        if self.throw_delay[0] < 0:
            raise ValueError("throw delay must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "RandomizationRanges":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def to_dict(self) -> dict:
        return {"gravity": list(self.gravity), "gain_scale": list(self.gain_scale),
                "throw_delay": list(self.throw_delay), "obs_noise": list(self.obs_noise),
                "action_noise": list(self.action_noise), "enabled": self.enabled}


def _mid(r):
    return 0.5 * (r[0] + r[1])


def sample_env_params(rng: np.random.Generator, ranges: RandomizationRanges) -> EnvParams:
    """Draw one episode's parameters, each field uniform and independent.

    With randomization disabled every field takes its range midpoint (the
    throw delay is rounded down to whole control steps).
    """
    if not ranges.enabled:
        return EnvParams(
            gravity=_mid(ranges.gravity),
            gain_scale=(_mid(ranges.gain_scale),) * 3,
            throw_delay=int(_mid(ranges.throw_delay)),
            obs_noise=_mid(ranges.obs_noise),
            action_noise=_mid(ranges.action_noise),
        )
    g = rng.uniform(*ranges.gravity)
    gains = tuple(float(x) for x in rng.uniform(ranges.gain_scale[0], ranges.gain_scale[1], size=3))
    delay = int(rng.integers(ranges.throw_delay[0], ranges.throw_delay[1] + 1))
    obs = rng.uniform(*ranges.obs_noise)
    act = rng.uniform(*ranges.action_noise)
    return EnvParams(gravity=float(g), gain_scale=gains, throw_delay=delay,
                     obs_noise=float(obs), action_noise=float(act))


def add_noise(rng: np.random.Generator, x, sigma: float) -> np.ndarray:
    """Zero-mean Gaussian perturbation; ``sigma == 0`` returns the input untouched."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=float)
    if sigma == 0:
        return x.copy()
    return x + rng.normal(0.0, sigma, size=x.shape)


def with_object(params: EnvParams, obj) -> EnvParams:
    return replace(params, obj=obj)
