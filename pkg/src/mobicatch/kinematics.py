"""Arm and base kinematics.

Forward kinematics, two numerical IK solvers (damped least squares
Levenberg-Marquardt and a box-constrained QP with null-space joint
centering), omnidirectional base integration and joint-limit checks.

All arm functions accept either a single configuration ``q`` of shape
``(6,)`` or a batch of shape ``(N, 6)``; batched calls are what the
vectorized environment uses every control tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml
from scipy.spatial.transform import Rotation

NUM_JOINTS = 6
# Task-space rows: x, y, z position and roll about the palm x-axis.
ROLL_AXIS = 0


@dataclass(frozen=True)
class ArmModel:
    """Serial 6-revolute-joint arm ending in a palm frame."""

    axes: np.ndarray  # (6, 3) unit joint axes in local frames
    offsets: np.ndarray  # (6, 3) parent-to-joint translations, m
    lower: np.ndarray  # (6,) rad
    upper: np.ndarray  # (6,) rad
    palm_offset: np.ndarray  # (3,) m, in last joint frame
    palm_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    name: str = "arm"
    joint_names: tuple = ()

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=float)
        if axes.shape != (NUM_JOINTS, 3):
            raise ValueError(f"expected 6 joint axes, got shape {axes.shape}")
        norms = np.linalg.norm(axes, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("joint axis must be non-zero")
        object.__setattr__(self, "axes", axes / norms[:, None])
        for name in ("offsets", "lower", "upper", "palm_offset", "palm_rotation"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.offsets.shape != (NUM_JOINTS, 3):
            raise ValueError("offsets must have shape (6, 3)")
        if self.lower.shape != (NUM_JOINTS,) or self.upper.shape != (NUM_JOINTS,):
            raise ValueError("joint limits must have 6 entries")
        if not np.all(self.lower < self.upper):
            raise ValueError("every joint needs lower < upper")
        if not np.all(np.isfinite(self.palm_offset)):
            raise ValueError("palm offset must be finite")
        # Rodrigues terms per joint, reused by every FK call.
        k = np.zeros((NUM_JOINTS, 3, 3))
        for i, (x, y, z) in enumerate(self.axes):
            k[i] = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]]
        object.__setattr__(self, "_skew", k)
        object.__setattr__(self, "_skew2", k @ k)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_range(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def home(self) -> np.ndarray:
        return self.midpoint.copy()

    def reach(self) -> float:
        """Upper bound on palm distance from the first joint origin."""
        return float(np.linalg.norm(self.offsets[1:], axis=1).sum() + np.linalg.norm(self.palm_offset))


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))

    @property
    def z_axis(self) -> np.ndarray:
        """Palm normal, pointing into the hand."""
        return self.rotation[..., :, 2]

    @property
    def roll_axis(self) -> np.ndarray:
        return self.rotation[..., :, ROLL_AXIS]

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        eye = np.eye(3)
        ortho = np.abs(np.swapaxes(r, -1, -2) @ r - eye).max()
        return bool(ortho <= tol and np.all(np.abs(np.linalg.det(r) - 1.0) <= tol))


@dataclass(frozen=True)
class BasePose:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class IkParams:
    max_iterations: int = 50
    position_tolerance: float = 1e-4
    orientation_tolerance: float = 1e-3
    damping: float = 1e-3
    nullspace_gain: float = 0.3
    max_joint_step: float = 0.3
    roll_weight: float = 0.3
    nullspace_taper: float = 0.03

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.position_tolerance <= 0 or self.orientation_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.damping <= 0 or self.max_joint_step <= 0:
            raise ValueError("damping and max_joint_step must be positive")


@dataclass
class IkResult:
    q: np.ndarray
    converged: np.ndarray | bool
    position_error: np.ndarray | float
    roll_error: np.ndarray | float
    iterations: np.ndarray | int
    # Joints the solver wanted to push past a limit on its last step.
    limit_pressure: np.ndarray
    fallbacks: int = 0

    @property
    def residual(self):
        return self.position_error, self.roll_error

    def __iter__(self):
        # Allows ``q, converged, residual = ik_solve_lm(...)``.
        yield self.q
        yield self.converged
        yield self.residual


def wrap_angle(a):
    """Map an angle to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def rpy_matrix(rpy) -> np.ndarray:
    return Rotation.from_euler("xyz", rpy).as_matrix()


def load_arm_model(path: str | Path | None = None) -> ArmModel:
    """Load an arm description; defaults to the bundled XArm6-like chain."""
    if path is None:
        text = resources.files("mobicatch.data").joinpath("arm_xarm6.yaml").read_text()
    else:
        text = Path(path).read_text()
    cfg = yaml.safe_load(text)
    joints = cfg.get("joints", [])
    if len(joints) != NUM_JOINTS:
        raise ValueError(f"arm config must list 6 joints, found {len(joints)}")
    return ArmModel(
        axes=np.array([j["axis"] for j in joints], dtype=float),
        offsets=np.array([j["offset"] for j in joints], dtype=float),
        lower=np.array([j["limits"][0] for j in joints], dtype=float),
        upper=np.array([j["limits"][1] for j in joints], dtype=float),
        palm_offset=np.array(cfg["palm_offset"], dtype=float),
        palm_rotation=rpy_matrix(cfg.get("palm_rpy", [0.0, 0.0, 0.0])),
        name=cfg.get("name", "arm"),
        joint_names=tuple(j.get("name", f"j{i + 1}") for i, j in enumerate(joints)),
    )


def _chain(model: ArmModel, q: np.ndarray, frames: bool = True):
    """Walk the chain; returns palm pose plus joint origins and world axes.

    With ``frames=False`` the origins and axes are skipped (returned as None).
    """
    q = np.asarray(q, dtype=float)
    batch = q.shape[:-1]
    s, c = np.sin(q)[..., None, None], np.cos(q)[..., None, None]
    # All joint rotations at once: (..., 6, 3, 3).
    rj = np.eye(3) + s * model._skew + (1.0 - c) * model._skew2
    rot = rj[..., 0, :, :]
    pos = np.broadcast_to(model.offsets[0], batch + (3,))
    origins = axes = None
    if frames:
        origins = np.empty(batch + (NUM_JOINTS, 3))
        axes = np.empty(batch + (NUM_JOINTS, 3))
        origins[..., 0, :] = pos
        axes[..., 0, :] = model.axes[0]
    for i in range(1, NUM_JOINTS):
        pos = pos + rot @ model.offsets[i]
        if frames:
            origins[..., i, :] = pos
            axes[..., i, :] = rot @ model.axes[i]
        rot = rot @ rj[..., i, :, :]
    palm_pos = pos + rot @ model.palm_offset
    palm_rot = rot @ model.palm_rotation
    return palm_pos, palm_rot, origins, axes


def forward_kinematics(model: ArmModel, q) -> Pose:
    """Palm pose in the arm-base frame."""
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    p, r, _, _ = _chain(model, q, frames=False)
    return Pose(p, r)


def jacobian(model: ArmModel, q):
    """Geometric palm Jacobian; returns (pose, J) with J of shape (..., 6, 6).

    Rows 0-2 are linear velocity, rows 3-5 angular velocity (world frame).
    """
    p, r, origins, axes = _chain(model, np.asarray(q, dtype=float))
    jp = np.cross(axes, p[..., None, :] - origins)
    jac = np.concatenate([np.swapaxes(jp, -1, -2), np.swapaxes(axes, -1, -2)], axis=-2)
    return Pose(p, r), jac


def roll_error(current: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Twist angle about the current roll axis taking ``current`` toward ``target``.

    Swing-twist decomposition of R_err = R_target R_current^T; only the twist
    about the current palm x-axis is constrained by the solvers.  With the
    unit quaternion (w, v) of R_err taken with w >= 0, the twist is
    2 atan2(v . a, w), and v / w = 2 s / (1 + tr R_err) where s is the axial
    vector of the skew part, so no quaternion conversion is needed.
    """
    r_err = target @ np.swapaxes(current, -1, -2)
    s = 0.5 * np.stack([r_err[..., 2, 1] - r_err[..., 1, 2],
                        r_err[..., 0, 2] - r_err[..., 2, 0],
                        r_err[..., 1, 0] - r_err[..., 0, 1]], axis=-1)
    trace = r_err[..., 0, 0] + r_err[..., 1, 1] + r_err[..., 2, 2]
    axis = current[..., :, ROLL_AXIS]
    return 2.0 * np.arctan2(2.0 * np.sum(s * axis, axis=-1), np.maximum(1.0 + trace, 0.0))


def _task_error(pose: Pose, target: Pose):
    e_pos = target.position - pose.position
    e_roll = roll_error(pose.rotation, target.rotation)
    return e_pos, e_roll


def _task_jacobian(pose: Pose, jac: np.ndarray, roll_weight: float) -> np.ndarray:
    axis = pose.rotation[..., :, ROLL_AXIS]
    roll_row = np.einsum("...i,...ij->...j", axis, jac[..., 3:, :])
    return np.concatenate([jac[..., :3, :], roll_weight * roll_row[..., None, :]], axis=-2)


def _limit_step(dq: np.ndarray, cap: float) -> np.ndarray:
    peak = np.abs(dq).max(axis=-1, keepdims=True)
    scale = np.where(peak > cap, cap / np.maximum(peak, 1e-300), 1.0)
    return dq * scale


def _prepare(model, q_init, target):
    q = np.array(q_init, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("q_init contains NaN or inf")
    if not (np.all(np.isfinite(target.position)) and np.all(np.isfinite(target.rotation))):
        raise ValueError("target pose contains NaN or inf")
    single = q.ndim == 1
    q = np.atleast_2d(q)
    tpos = np.broadcast_to(target.position, q.shape[:-1] + (3,))
    trot = np.broadcast_to(target.rotation, q.shape[:-1] + (3, 3))
    return q, Pose(tpos, trot), single


def _finish(q, converged, e_pos, e_roll, iters, pressure, fallbacks, single):
    pos_err = np.linalg.norm(e_pos, axis=-1)
    rol_err = np.abs(e_roll)
    if single:
        return IkResult(q[0], bool(converged[0]), float(pos_err[0]), float(rol_err[0]),
                        int(iters[0]), pressure[0], fallbacks)
    return IkResult(q, converged, pos_err, rol_err, iters, pressure, fallbacks)


def ik_solve_lm(model: ArmModel, q_init, target: Pose, params: IkParams = IkParams()) -> IkResult:
    """Levenberg-Marquardt IK with fixed damping and a per-step joint cap."""
    q, target, single = _prepare(model, q_init, target)
    n = q.shape[0]
    w = np.array([1.0, 1.0, 1.0, params.roll_weight])
    converged = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    pressure = np.zeros((n, NUM_JOINTS), dtype=bool)
    eye = np.eye(NUM_JOINTS)
    for _ in range(params.max_iterations + 1):
        pose, jac = jacobian(model, q)
        e_pos, e_roll = _task_error(pose, target)
        converged = (np.linalg.norm(e_pos, axis=-1) <= params.position_tolerance) & (
            np.abs(e_roll) <= params.orientation_tolerance)
        active = ~converged & (iters < params.max_iterations)
        if not active.any():
            break
        jt = _task_jacobian(pose, jac, params.roll_weight)[active]
        err = np.concatenate([e_pos, e_roll[:, None]], axis=-1)[active] * w
        jtt = np.swapaxes(jt, -1, -2)
        h = jtt @ jt + params.damping * eye
        dq = np.linalg.solve(h, (jtt @ err[..., None]))[..., 0]
        dq = _limit_step(dq, params.max_joint_step)
        raw = q[active] + dq
        pressure[active] = check_joint_limits(model, raw)
        q[active] = np.clip(raw, model.lower, model.upper)
        iters[active] += 1
    return _finish(q, converged, e_pos, e_roll, iters, pressure, 0, single)


def _box_qp(h, f, lo, hi, max_iter=20):
    """Batched active-set solve of min 0.5 x'Hx - f'x s.t. lo <= x <= hi.

    Returns (x, ok).  Fixed variables are pinned by replacing their rows in
    the KKT system with identity rows, so every batch member solves a full
    6x6 system regardless of its active set.
    """
    n, d = f.shape
    at_lo = np.zeros((n, d), dtype=bool)
    at_hi = np.zeros((n, d), dtype=bool)
    ok = np.zeros(n, dtype=bool)
    x = np.zeros((n, d))
    eye = np.eye(d)
    todo = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(todo)
        if idx.size == 0:
            break
        fixed = at_lo[idx] | at_hi[idx]
        bound = np.where(at_lo[idx], lo[idx], hi[idx])
        a = np.where(fixed[:, :, None], eye, h[idx])
        b = np.where(fixed, bound, f[idx])
        try:
            xs = np.linalg.solve(a, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        tol = 1e-12
        below = ~fixed & (xs < lo[idx] - tol)
        above = ~fixed & (xs > hi[idx] + tol)
        viol = below | above
        grad = (h[idx] @ xs[..., None])[..., 0] - f[idx]
        # KKT: at a lower bound the gradient must be >= 0, at an upper bound <= 0.
        wrong_lo = at_lo[idx] & (grad < -1e-12)
        wrong_hi = at_hi[idx] & (grad > 1e-12)
        x[idx] = xs
        done_here = ~viol.any(axis=1) & ~(wrong_lo | wrong_hi).any(axis=1)
        ok[idx[done_here]] = True
        todo[idx[done_here]] = False
        # Primal infeasible: pin the worst violator.
        prim = viol.any(axis=1)
        if prim.any():
            excess = np.where(below, lo[idx] - xs, 0.0) + np.where(above, xs - hi[idx], 0.0)
            worst = np.argmax(excess, axis=1)
            for k in np.flatnonzero(prim):
                j = worst[k]
                if below[k, j]:
                    at_lo[idx[k], j] = True
                else:
                    at_hi[idx[k], j] = True
        # Dual infeasible: release the variable with the worst multiplier.
        dual = ~prim & ~done_here
        if dual.any():
            mult = np.where(wrong_lo, -grad, 0.0) + np.where(wrong_hi, grad, 0.0)
            worst = np.argmax(mult, axis=1)
            for k in np.flatnonzero(dual):
                j = worst[k]
                at_lo[idx[k], j] = False
                at_hi[idx[k], j] = False
    return x, ok


def ik_solve_qp(model: ArmModel, q_init, target: Pose, params: IkParams = IkParams()) -> IkResult:
    """Damped least-squares IK posed as a box QP per iteration.

    Each step minimizes ||J dq - e||^2 + lambda ||dq - g||^2 subject to the
    joint limits and the per-step cap, where g pulls every joint toward the
    middle of its range.  The preference does not bias the task because
    it acts in the null space of the task Jacobian (g is projected there first).
    """
    q, target, single = _prepare(model, q_init, target)
    n = q.shape[0]
    w = np.array([1.0, 1.0, 1.0, params.roll_weight])
    converged = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    pressure = np.zeros((n, NUM_JOINTS), dtype=bool)
    fallbacks = 0
    eye = np.eye(NUM_JOINTS)
    lam = params.damping
    for _ in range(params.max_iterations + 1):
        pose, jac = jacobian(model, q)
        e_pos, e_roll = _task_error(pose, target)
        converged = (np.linalg.norm(e_pos, axis=-1) <= params.position_tolerance) & (
            np.abs(e_roll) <= params.orientation_tolerance)
        active = ~converged & (iters < params.max_iterations)
        if not active.any():
            break
        qa = q[active]
        jt = _task_jacobian(pose, jac, params.roll_weight)[active]
        err = np.concatenate([e_pos, e_roll[:, None]], axis=-1)[active] * w
        jtt = np.swapaxes(jt, -1, -2)
        # Tapered near convergence: null-space motion is only first-order
        # invisible to the task, so a constant pull would leave an error floor.
        taper = np.minimum(1.0, np.linalg.norm(e_pos[active], axis=-1) / params.nullspace_taper)
        dev = (model.midpoint - qa) / model.half_range
        pull = dev / np.maximum(1.0 - np.abs(dev), 0.05)  # grows toward the limits
        g = params.nullspace_gain * taper[:, None] * pull
        # Project the centering preference onto the task null space.
        jjt = jt @ jtt + 1e-9 * np.eye(jt.shape[-2])
        g = g - (jtt @ np.linalg.solve(jjt, (jt @ g[..., None])))[..., 0]
        h = jtt @ jt + lam * eye
        f = (jtt @ err[..., None])[..., 0] + lam * g
        lo = np.maximum(model.lower - qa, -params.max_joint_step)
        hi = np.minimum(model.upper - qa, params.max_joint_step)
        unconstrained = np.linalg.solve(h, f[..., None])[..., 0]
        # Shrink the whole step to respect the cap so the box only binds at
        # joint limits; clipping element-wise would bend the step direction.
        peak = np.abs(unconstrained).max(axis=-1)
        shrink = np.where(peak > params.max_joint_step, params.max_joint_step / np.maximum(peak, 1e-300), 1.0)
        f = f * shrink[:, None]
        unconstrained = unconstrained * shrink[:, None]
        pressure[active] = check_joint_limits(model, qa + unconstrained)
        dq, ok = _box_qp(h, f, lo, hi)
        if not ok.all():
            # Fall back to the capped damped least-squares step.
            fallbacks += int((~ok).sum())
            dq[~ok] = _limit_step(unconstrained[~ok], params.max_joint_step)
        q[active] = np.clip(qa + dq, model.lower, model.upper)
        iters[active] += 1
    return _finish(q, converged, e_pos, e_roll, iters, pressure, fallbacks, single)


def check_joint_limits(model: ArmModel, q) -> np.ndarray:
    """Per-joint violation flags; the limits themselves are legal."""
    q = np.asarray(q, dtype=float)
    return (q < model.lower) | (q > model.upper)


def limit_margin(model: ArmModel, q) -> np.ndarray:
    """Smallest normalized distance to a joint limit (1 = centered, 0 = at a limit)."""
    q = np.asarray(q, dtype=float)
    d = np.minimum(q - model.lower, model.upper - q) / model.half_range
    return d.min(axis=-1)


def base_step(pose: BasePose, cmd, dt: float) -> BasePose:
    """Integrate a body-frame planar velocity in parallel mode (fixed heading)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    vx, vy = float(cmd[0]), float(cmd[1])
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return BasePose(
        x=pose.x + (c * vx - s * vy) * dt,
        y=pose.y + (s * vx + c * vy) * dt,
        yaw=pose.yaw,
        vx=vx,
        vy=vy,
    )


def base_step_batch(xy: np.ndarray, yaw: np.ndarray, vel: np.ndarray, dt: float) -> np.ndarray:
    """Vectorized ``base_step`` on (N, 2) positions; returns new positions."""
    c, s = np.cos(yaw), np.sin(yaw)
    wx = c * vel[:, 0] - s * vel[:, 1]
    wy = s * vel[:, 0] + c * vel[:, 1]
    return xy + dt * np.stack([wx, wy], axis=-1)
