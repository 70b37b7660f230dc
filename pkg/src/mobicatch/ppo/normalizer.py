"""Streaming per-dimension observation statistics."""

from __future__ import annotations

import numpy as np


class RunningMeanStd:
    """Running mean/variance with an independent sample count per dimension.

    Per-dimension counts let a subset of inputs (e.g. freshly added hand
    joints) be reset without disturbing the statistics of the others.
    Batches are merged with the parallel-variance formula, so streaming a
    dataset in chunks gives the same result as one two-pass computation.
    """

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.dim = int(dim)
        self.clip = float(clip)
        self.eps = float(eps)
        self.mean = np.zeros(self.dim)
        self.var = np.ones(self.dim)
        self.count = np.zeros(self.dim)

    def update(self, x: np.ndarray, dims=None):
        """Fold a batch (B, dim) into the statistics; ``dims`` limits which columns change."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        if x.shape[0] == 0:
            return
        idx = np.arange(self.dim) if dims is None else np.asarray(dims)
        xb = x[:, idx]
        b = xb.shape[0]
        b_mean = xb.mean(axis=0)
        b_var = xb.var(axis=0)
        n = self.count[idx]
        tot = n + b
        delta = b_mean - self.mean[idx]
        m2 = self.var[idx] * n + b_var * b + delta * delta * n * b / tot
        self.mean[idx] = self.mean[idx] + delta * b / tot
        self.var[idx] = m2 / tot
        self.count[idx] = tot

    def reset(self, dims):
        self.mean[dims] = 0.0
        self.var[dims] = 1.0
        self.count[dims] = 0.0

    def normalize(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var + self.eps)
        return np.clip(z, -self.clip, self.clip)

    def state_dict(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(), "count": self.count.copy(),
                "clip": self.clip, "eps": self.eps}

    def load_state_dict(self, state: dict):
        mean = np.asarray(state["mean"], dtype=float)
        if mean.shape != (self.dim,):
            raise ValueError(f"normalizer expects {self.dim} dims, got {mean.shape}")
        self.mean = mean.copy()
        self.var = np.asarray(state["var"], dtype=float).copy()
        self.count = np.asarray(state["count"], dtype=float).copy()
        self.clip = float(state.get("clip", self.clip))
        self.eps = float(state.get("eps", self.eps))

    def copy(self) -> "RunningMeanStd":
        out = RunningMeanStd(self.dim, self.clip, self.eps)
        out.load_state_dict(self.state_dict())
        return out
