"""Simulated catching world: launcher, flight, servos, contact and observations."""

import importlib

__all__ = ["CatchEnv", "ConfigError", "EnvConfig", "VecCatchEnv", "load_env_config"]

_LAZY = {"CatchEnv": "env", "VecCatchEnv": "env", "ConfigError": "config", "EnvConfig": "config",
         "load_env_config": "config"}


def __getattr__(name):
    # Resolved on first use: the submodules import rewards and sim2real,
    # which in turn need simenv.types.
    if name in _LAZY:
        return getattr(importlib.import_module(f"mobicatch.simenv.{_LAZY[name]}"), name)
    raise AttributeError(name)
