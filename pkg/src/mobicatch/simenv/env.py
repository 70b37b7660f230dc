"""Vectorized mobile-manipulator catching world.

One :class:`VecCatchEnv` advances N independent episodes in lockstep with
numpy arrays.  Every instance owns its own random streams, so the
trajectory of env ``i`` depends only on the seed and its own actions.

Frames: the world frame has z up and the robot starting at the origin
facing +x.  The arm-base frame sits at the base position plus the mount
offset, rotated by the (fixed) base heading; observations live there.
"""

from __future__ import annotations

import math

import numpy as np

from mobicatch import kinematics as kin
from mobicatch.rewards import TERMS, RewardContext, StageWeights, reward_terms, signed_weights
from mobicatch.sim2real import LowPassFilter, sample_env_params
from mobicatch.simenv.config import EnvConfig, mount_array
from mobicatch.simenv.objects import flight_advance, flight_coefficients, launch_object, sample_object
from mobicatch.simenv.types import (
    BASE_ARM_ACTION_DIM, CATCHING, FULL_ACTION_DIM, FULL_OBS_DIM, NUM_HAND_JOINTS, ROLL_INDEX,
    TRACKING, Action, EnvParams, EpisodeOutcome, ObjectSpec, Observation,
)


def yaw_matrix(yaw) -> np.ndarray:
    """Planar heading rotations, shape (..., 3, 3)."""
    yaw = np.asarray(yaw, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    r = np.zeros(yaw.shape + (3, 3))
    r[..., 0, 0] = c
    r[..., 0, 1] = -s
    r[..., 1, 0] = s
    r[..., 1, 1] = c
    r[..., 2, 2] = 1.0
    return r


def arm_origin(base_xy, base_yaw, mount) -> np.ndarray:
    base_xy = np.asarray(base_xy, dtype=float)
    base = np.concatenate([base_xy, np.zeros(base_xy.shape[:-1] + (1,))], axis=-1)
    return base + (yaw_matrix(base_yaw) @ np.asarray(mount, dtype=float)[..., None])[..., 0]


def world_to_arm(points, base_xy, base_yaw, mount) -> np.ndarray:
    """Express world points in the arm-base frame."""
    rel = np.asarray(points, dtype=float) - arm_origin(base_xy, base_yaw, mount)
    rt = np.swapaxes(yaw_matrix(base_yaw), -1, -2)
    return (rt @ rel[..., None])[..., 0]


def arm_to_world(points, base_xy, base_yaw, mount) -> np.ndarray:
    r = yaw_matrix(base_yaw)
    return arm_origin(base_xy, base_yaw, mount) + (r @ np.asarray(points, dtype=float)[..., None])[..., 0]


def detect_touch(palm_pos, obj_pos, radius, margin: float, airborne) -> np.ndarray:
    """Palm center within ``margin`` of the object's bounding sphere, in flight only."""
    gap = np.linalg.norm(np.asarray(palm_pos) - np.asarray(obj_pos), axis=-1) - radius
    return (gap <= margin) & np.asarray(airborne, dtype=bool)


def hand_closure(hand, open_pose: float, closed_pose: float) -> np.ndarray:
    """Mean normalized flexion of the controlled hand joints, in [0, 1]."""
    frac = (np.asarray(hand, dtype=float) - open_pose) / (closed_pose - open_pose)
    return np.clip(frac, 0.0, 1.0).mean(axis=-1)


def update_hold(held, palm_pos, obj_pos, closure, rel_speed, contact, airborne) -> np.ndarray:
    """Capture/release rule with closure hysteresis.

    A free object is captured when it is within the capture radius, the
    hand is closed enough and the palm-object relative speed is low; a held
    object is released only when the hand opens past the lower threshold.
    """
    held = np.asarray(held, dtype=bool)
    dist = np.linalg.norm(np.asarray(palm_pos) - np.asarray(obj_pos), axis=-1)
    capture = ((dist <= contact.hold_radius) & (closure >= contact.close_threshold)
               & (rel_speed <= contact.max_relative_speed) & np.asarray(airborne, dtype=bool))
    keep = held & (closure >= contact.open_threshold)
    return keep | (~held & capture)


def rotate_about(axis: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Batched Rodrigues rotation matrices for unit axes."""
    k = np.zeros(axis.shape[:-1] + (3, 3))
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    k[..., 0, 1], k[..., 0, 2] = -z, y
    k[..., 1, 0], k[..., 1, 2] = z, -x
    k[..., 2, 0], k[..., 2, 1] = -y, x
    s = np.sin(angle)[..., None, None]
    c = np.cos(angle)[..., None, None]
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def build_observation(obj_world, ee_world, prev_obj, prev_ee, base_xy, base_yaw, base_vel_world,
                      mount, hand, stage: str, noise_obj=None, noise_ee=None):
    """Assemble the (N, 26) policy input.

    ``prev_obj``/``prev_ee`` are the previously *observed* arm-frame
    positions, so the history carries the same noise the policy saw.
    Returns the vector plus the new observed object/palm positions.
    """
    obj = world_to_arm(obj_world, base_xy, base_yaw, mount)
    ee = world_to_arm(ee_world, base_xy, base_yaw, mount)
    if noise_obj is not None:
        obj = obj + noise_obj
    if noise_ee is not None:
        ee = ee + noise_ee
    if prev_obj is None:
        prev_obj, prev_ee = obj, ee
    rt = np.swapaxes(yaw_matrix(base_yaw), -1, -2)[..., :2, :2]
    vel_body = (rt @ np.asarray(base_vel_world)[..., None])[..., 0]
    n = obj.shape[0]
    out = np.zeros((n, FULL_OBS_DIM))
    out[:, 0:3] = obj
    out[:, 3:6] = prev_obj
    out[:, 6:9] = ee
    out[:, 9:12] = prev_ee
    out[:, 12:14] = vel_body
    if stage == CATCHING:
        out[:, 14:26] = hand
    return out, obj, ee


class VecCatchEnv:
    """N catching (or tracking) episodes stepped in lockstep."""

    def __init__(self, cfg: EnvConfig, num_envs: int = 1, weights: StageWeights | None = None,
                 seed: int = 0):
        if num_envs < 1:
            raise ValueError("num_envs must be >= 1")
        self.cfg = cfg
        self.n = num_envs
        self.stage = cfg.stage
        self.arm = kin.load_arm_model(cfg.arm_model)
        self.mount = mount_array(cfg)
        self.weights = (weights or StageWeights()).for_stage(cfg.stage)
        self.signed_weights = signed_weights(self.weights, cfg.stage)
        self._ik = kin.ik_solve_qp if cfg.ik_solver == "qp" else kin.ik_solve_lm
        home = kin.forward_kinematics(self.arm, self.arm.home)
        self._home_pos = home.position
        self._home_rot = home.rotation
        self._shoulder = self.arm.offsets[0]
        # Exponential-lag time constants per servo group.
        self._taus = np.array([cfg.servo.base_tau, cfg.servo.arm_tau, cfg.servo.hand_tau])
        # Per-instance overrides used by evaluation (held-out objects).
        self.object_override: list[ObjectSpec | None] = [None] * num_envs
        self._alloc()
        self.seed(seed)
        self.reset()

    # -- state ----------------------------------------------------------
    def _alloc(self):
        n = self.n
        z = lambda *s: np.zeros((n,) + s)  # noqa: E731
        self.base_xy, self.base_vel, self.base_cmd = z(2), z(2), z(2)
        self.base_yaw = np.zeros(n)
        self.q, self.q_cmd = z(6), z(6)
        self.ee_target, self.rot_target = z(3), z(3, 3)
        self.hand, self.hand_cmd = z(NUM_HAND_JOINTS), z(NUM_HAND_JOINTS)
        self.obj_p, self.obj_v, self.obj_prev = z(3), z(3), z(3)
        self.launch_p, self.launch_v = z(3), z(3)
        self.attach = z(3)
        self.launched = np.zeros(n, dtype=bool)
        self.landed = np.zeros(n, dtype=bool)
        self.held = np.zeros(n, dtype=bool)
        self.radius, self.damping, self.mass, self.gravity = z(), z(), z(), z()
        self.gains = np.ones((n, 3))
        self.delay = np.zeros(n, dtype=int)
        self.obs_sigma, self.act_sigma = z(), z()
        self.t = np.zeros(n, dtype=int)
        self.d_prev, self.d_min = z(), z()
        self.touched = np.zeros(n, dtype=bool)
        self.caught = np.zeros(n, dtype=bool)
        self.fault = np.zeros(n, dtype=bool)
        self.done = np.zeros(n, dtype=bool)
        self.steps_held = np.zeros(n, dtype=int)
        self.palm_pos, self.palm_rot = z(3), z(3, 3)
        self.obs_obj, self.obs_ee = z(3), z(3)
        self.episode_return = z()
        self.params: list[EnvParams | None] = [None] * n
        self.objects: list[ObjectSpec | None] = [None] * n
        self.lpf = LowPassFilter((n, 2), self.cfg.lpf_alpha)

    def seed(self, seed: int):
        """Independent params/object/noise streams for every instance."""
        self._seed = int(seed)
        children = np.random.SeedSequence(self._seed).spawn(self.n)
        self._rng_params, self._rng_object, self._rng_noise = [], [], []
        for child in children:
            p, o, s = child.spawn(3)
            self._rng_params.append(np.random.default_rng(p))
            self._rng_object.append(np.random.default_rng(o))
            self._rng_noise.append(np.random.default_rng(s))

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.seed(seed)
        return self.reset_envs(np.arange(self.n))

    def reset_envs(self, idx) -> np.ndarray:
        """Start new episodes for the given instances; returns the full obs batch."""
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        cfg = self.cfg
        for i in idx:
            params = sample_env_params(self._rng_params[i], cfg.randomization)
            spec = self.object_override[i] or sample_object(self._rng_object[i], cfg.objects)
            params = EnvParams(params.gravity, params.gain_scale, params.throw_delay,
                               params.obs_noise, params.action_noise, spec)
            launch = launch_object(self._rng_object[i], cfg.launcher, params.gravity)
            self.params[i] = params
            self.objects[i] = spec
            self.gravity[i] = params.gravity
            self.gains[i] = params.gain_scale
            self.delay[i] = params.throw_delay
            self.obs_sigma[i] = params.obs_noise
            self.act_sigma[i] = params.action_noise
            self.radius[i] = spec.bounding_radius
            self.damping[i] = spec.damping
            self.mass[i] = spec.mass
            self.launch_p[i] = launch.position
            self.launch_v[i] = launch.velocity
        self.base_xy[idx] = 0.0
        self.base_vel[idx] = 0.0
        self.base_cmd[idx] = 0.0
        self.base_yaw[idx] = 0.0
        self.lpf.reset(0.0, idx)
        self.q[idx] = self.arm.home
        self.q_cmd[idx] = self.arm.home
        self.ee_target[idx] = self._home_pos
        self.rot_target[idx] = self._home_rot
        self.hand[idx] = self.cfg.hand.home_pose
        self.hand_cmd[idx] = self.cfg.hand.home_pose
        self.obj_p[idx] = self.launch_p[idx]
        self.obj_v[idx] = 0.0
        self.launched[idx] = False
        self.landed[idx] = False
        self.held[idx] = False
        self.attach[idx] = 0.0
        self.t[idx] = 0
        self.touched[idx] = False
        self.caught[idx] = False
        self.fault[idx] = False
        self.done[idx] = False
        self.steps_held[idx] = 0
        self.episode_return[idx] = 0.0
        self._launch_due(idx)
        self.obj_prev[idx] = self.obj_p[idx]
        self._update_palm(idx)
        d0 = np.linalg.norm(self.palm_pos[idx] - self.obj_p[idx], axis=-1)
        self.d_prev[idx] = d0
        self.d_min[idx] = d0
        noise_o, noise_e = self._obs_noise(idx)
        obs, o, e = build_observation(
            self.obj_p[idx], self.palm_pos[idx], None, None, self.base_xy[idx], self.base_yaw[idx],
            self.base_vel[idx], self.mount, self.hand[idx], self.stage, noise_o, noise_e)
        self.obs_obj[idx] = o
        self.obs_ee[idx] = e
        if not hasattr(self, "_obs"):
            self._obs = np.zeros((self.n, FULL_OBS_DIM))
        self._obs[idx] = obs
        return self._obs.copy()

    def _launch_due(self, idx):
        due = idx[(~self.launched[idx]) & (self.t[idx] >= self.delay[idx])]
        self.launched[due] = True
        self.obj_v[due] = self.launch_v[due]

    def _update_palm(self, idx=None):
        idx = slice(None) if idx is None else idx
        pose = kin.forward_kinematics(self.arm, self.q[idx])
        r = yaw_matrix(self.base_yaw[idx])
        self.palm_pos[idx] = arm_to_world(pose.position, self.base_xy[idx], self.base_yaw[idx], self.mount)
        self.palm_rot[idx] = r @ pose.rotation

    def _obs_noise(self, idx):
        if not np.any(self.obs_sigma[idx] > 0):
            return None, None
        no = np.zeros((len(idx), 3))
        ne = np.zeros((len(idx), 3))
        for k, i in enumerate(idx):
            s = self.obs_sigma[i]
            if s > 0:
                draw = self._rng_noise[i].normal(0.0, s, size=6)
                no[k], ne[k] = draw[:3], draw[3:]
        return no, ne

    # -- control --------------------------------------------------------
    def _mask(self, a: np.ndarray) -> np.ndarray:
        if self.stage == TRACKING:
            a[:, BASE_ARM_ACTION_DIM:] = 0.0
        if not self.cfg.roll_enabled:
            a[:, ROLL_INDEX] = 0.0
        return a

    def _apply_targets(self, a: np.ndarray):
        """Turn normalized actions into servo targets for this control tick."""
        cfg, box = self.cfg, self.cfg.action_box
        cmd = a[:, 0:2] * box.base_speed
        self.base_cmd = self.lpf(cmd) if cfg.lpf_enabled else cmd

        target = self.ee_target + a[:, 2:5] * box.ee_step
        rel = target - self._shoulder
        r = np.linalg.norm(rel, axis=-1, keepdims=True)
        r_safe = np.maximum(r, 1e-9)
        rel = rel * np.clip(r_safe, cfg.workspace_min_radius, cfg.workspace_max_radius) / r_safe
        target = self._shoulder + rel
        target[:, 2] = np.maximum(target[:, 2], cfg.workspace_min_z)

        current = kin.forward_kinematics(self.arm, self.q_cmd)
        roll = a[:, ROLL_INDEX] * box.roll_step
        rot = rotate_about(current.roll_axis, roll) @ current.rotation
        res = self._ik(self.arm, self.q_cmd, kin.Pose(target, rot), cfg.ik)
        self.q_cmd = res.q
        # Anti-windup: an unreachable target snaps back to what was achieved.
        missed = ~np.asarray(res.converged)
        if missed.any():
            target[missed] = kin.forward_kinematics(self.arm, res.q[missed]).position
        self.ee_target = target
        self.rot_target = rot
        limit_hit = np.asarray(res.limit_pressure).any(axis=-1)

        if self.stage == CATCHING:
            hc = self.hand_cmd + a[:, BASE_ARM_ACTION_DIM:FULL_ACTION_DIM] * box.hand_step
            self.hand_cmd = np.clip(hc, cfg.hand.lower, cfg.hand.upper)
        return limit_hit

    def step(self, actions):
        """Advance every instance one control tick.

        Instances already done are left untouched (reward 0) until reset.
        Returns (obs, reward, done, info) with batched arrays.
        """
        cfg = self.cfg
        a = np.array(actions, dtype=float, copy=True)
        if a.ndim == 1:
            a = a[None, :]
        if a.shape[0] != self.n or a.shape[1] not in (BASE_ARM_ACTION_DIM, FULL_ACTION_DIM):
            raise ValueError(f"actions must have shape ({self.n}, 6 or 18), got {a.shape}")
        if a.shape[1] == BASE_ARM_ACTION_DIM:
            a = np.concatenate([a, np.zeros((self.n, NUM_HAND_JOINTS))], axis=1)
        live = ~self.done
        bad = live & ~np.all(np.isfinite(a), axis=1)
        a[~np.isfinite(a)] = 0.0
        a = self._mask(np.clip(a, -1.0, 1.0))
        a[~live] = 0.0

        executed = a.copy()
        for i in np.flatnonzero(live & (self.act_sigma > 0)):
            executed[i] += self._rng_noise[i].normal(0.0, self.act_sigma[i], size=FULL_ACTION_DIM)
        executed = self._mask(np.clip(executed, -1.0, 1.0))

        frozen = self._snapshot_state(~live)
        limit_hit = self._apply_targets(executed)

        dt = cfg.sim_dt
        n_sub = cfg.substeps
        # Servo targets are constant within a control tick, so every lag has a
        # closed-form trajectory; evaluating all substeps at once lets forward
        # kinematics run as one batch.
        decay = np.exp(-dt * self.gains / self._taus)  # (n, 3)
        powers = decay[None] ** np.arange(1, n_sub + 1)[:, None, None]  # (S, n, 3)
        vel_s = self.base_cmd + (self.base_vel - self.base_cmd) * powers[..., 0:1]
        world_vel = (yaw_matrix(self.base_yaw)[:, :2, :2] @ vel_s[..., None])[..., 0]
        xy_s = self.base_xy + dt * np.cumsum(world_vel, axis=0)
        q_s = self.q_cmd + (self.q - self.q_cmd) * powers[..., 1:2]
        hand_s = self.hand_cmd + (self.hand - self.hand_cmd) * powers[..., 2:3]
        pose = kin.forward_kinematics(self.arm, q_s.reshape(-1, 6))
        yaw_s = np.broadcast_to(self.base_yaw, (n_sub, self.n))
        palm_s = arm_to_world(pose.position.reshape(n_sub, self.n, 3), xy_s, yaw_s, self.mount)
        rot_s = yaw_matrix(yaw_s) @ pose.rotation.reshape(n_sub, self.n, 3, 3)
        palm_vel_s = np.diff(np.concatenate([self.palm_pos[None], palm_s]), axis=0) / dt
        closure_s = hand_closure(hand_s, cfg.hand.open_pose, cfg.hand.closed_pose)

        coeffs = flight_coefficients(self.damping, dt)
        held_substeps = np.zeros(self.n, dtype=int)
        touch_now = np.zeros(self.n, dtype=bool)
        self.obj_prev = self.obj_p.copy()
        self._launch_due(np.flatnonzero(live))
        for j in range(n_sub):
            palm, palm_rot, palm_vel = palm_s[j], rot_s[j], palm_vel_s[j]
            flying = self.launched & ~self.held & ~self.landed
            p_new, v_new = flight_advance(self.obj_p, self.obj_v, self.gravity, coeffs)
            self.obj_p = np.where(flying[:, None], p_new, self.obj_p)
            self.obj_v = np.where(flying[:, None], v_new, self.obj_v)
            if self.held.any():
                h = self.held
                self.obj_p[h] = palm[h] + (palm_rot[h] @ self.attach[h][..., None])[..., 0]
                self.obj_v[h] = palm_vel[h]

            airborne = self.launched & ~self.landed
            touch_now |= detect_touch(palm, self.obj_p, self.radius, cfg.contact.touch_margin, airborne)
            rel_speed = np.linalg.norm(self.obj_v - palm_vel, axis=-1)
            new_held = update_hold(self.held, palm, self.obj_p, closure_s[j], rel_speed,
                                   cfg.contact, airborne)
            grabbed = new_held & ~self.held
            if grabbed.any():
                rel = self.obj_p[grabbed] - palm[grabbed]
                self.attach[grabbed] = (np.swapaxes(palm_rot[grabbed], -1, -2) @ rel[..., None])[..., 0]
                self.obj_v[grabbed] = palm_vel[grabbed]
            self.held = new_held
            held_substeps += self.held
            self.landed |= self.launched & ~self.held & (self.obj_p[:, 2] <= self.radius)

        self.base_vel, self.base_xy = vel_s[-1], xy_s[-1]
        self.q, self.hand = q_s[-1], hand_s[-1]
        self.palm_pos, self.palm_rot = palm_s[-1], rot_s[-1]
        self._restore_state(frozen, ~live)
        self.t[live] += 1
        self.touched |= live & (touch_now | self.held)
        self.steps_held += live & self.held

        dist = np.linalg.norm(self.palm_pos - self.obj_p, axis=-1)
        ctx = RewardContext(
            obj_pos=self.obj_p.copy(), obj_vel=self.obj_p - self.obj_prev, ee_pos=self.palm_pos.copy(),
            palm_z=self.palm_rot[:, :, 2].copy(), d_prev=self.d_prev.copy(), action=a,
            touch=touch_now | self.held, grasp_dt=held_substeps * dt, limit_violation=limit_hit)
        terms = reward_terms(ctx)
        reward = terms @ self.signed_weights
        self.d_prev = np.where(live, np.minimum(self.d_prev, dist), self.d_prev)
        self.d_min = np.minimum(self.d_min, self.d_prev)

        state_ok = np.isfinite(self.obj_p).all(axis=1) & np.isfinite(self.q).all(axis=1)
        bad |= live & ~state_ok
        timeout = self.t >= cfg.episode_steps
        ended = live & (timeout | self.landed | bad)
        self.caught |= live & timeout & self.held & ~bad
        self.fault |= bad
        reward = np.where(live & ~bad, reward, 0.0)
        terms[~live | bad] = 0.0
        self.episode_return += reward
        self.done |= ended

        noise_o, noise_e = self._obs_noise(np.arange(self.n))
        obs, o, e = build_observation(
            self.obj_p, self.palm_pos, self.obs_obj, self.obs_ee, self.base_xy, self.base_yaw,
            self.base_vel, self.mount, self.hand, self.stage, noise_o, noise_e)
        obs = np.where(live[:, None], obs, self._obs)
        self.obs_obj = np.where(live[:, None], o, self.obs_obj)
        self.obs_ee = np.where(live[:, None], e, self.obs_ee)
        if not np.all(np.isfinite(obs)):
            bad_obs = ~np.isfinite(obs).all(axis=1)
            obs[bad_obs] = 0.0
            self.fault |= bad_obs
            self.done |= bad_obs
        self._obs = obs
        info = {
            "terms": terms, "action": a, "touched": self.touched.copy(), "caught": self.caught.copy(),
            "held": self.held.copy(), "steps_held": self.steps_held.copy(), "d_min": self.d_min.copy(),
            "fault": self.fault.copy(), "ended": ended, "limit_hit": limit_hit, "context": ctx,
        }
        return obs.copy(), reward, self.done.copy(), info

    # Instances that are already done must not move during a batched step.
    _FROZEN = ("base_xy", "base_vel", "base_cmd", "q", "q_cmd", "ee_target", "rot_target", "hand",
               "hand_cmd", "obj_p", "obj_v", "obj_prev", "held", "landed", "launched", "palm_pos", "palm_rot")

    def _snapshot_state(self, mask):
        if not mask.any():
            return None
        snap = {name: getattr(self, name)[mask].copy() for name in self._FROZEN}
        snap["lpf"] = self.lpf.state[mask].copy()
        return snap

    def _restore_state(self, snap, mask):
        if snap is None:
            return
        for name in self._FROZEN:
            getattr(self, name)[mask] = snap[name]
        self.lpf.state[mask] = snap["lpf"]

    # -- reporting ------------------------------------------------------
    def current_obs(self) -> np.ndarray:
        return self._obs.copy()

    def outcome(self, i: int) -> EpisodeOutcome:
        return EpisodeOutcome(bool(self.touched[i]), bool(self.caught[i]), int(self.steps_held[i]),
                              float(self.d_min[i]), bool(self.fault[i]))

    def snapshot(self, i: int) -> dict:
        """Plain-data view of one instance, used for replay records."""
        return {
            "t": int(self.t[i]),
            "time": float(self.t[i] * self.cfg.control_dt),
            "base_xy": self.base_xy[i].tolist(),
            "base_vel": self.base_vel[i].tolist(),
            "q": self.q[i].tolist(),
            "hand": self.hand[i].tolist(),
            "palm": self.palm_pos[i].tolist(),
            "palm_z": self.palm_rot[i, :, 2].tolist(),
            "object": self.obj_p[i].tolist(),
            "object_vel": self.obj_v[i].tolist(),
            "launched": bool(self.launched[i]),
            "held": bool(self.held[i]),
            "d_prev": float(self.d_prev[i]),
        }


class CatchEnv:
    """Single-episode convenience wrapper around :class:`VecCatchEnv`."""

    def __init__(self, cfg: EnvConfig | None = None, weights: StageWeights | None = None, seed: int = 0):
        self.cfg = cfg or EnvConfig()
        self.weights = weights
        self.vec = VecCatchEnv(self.cfg, 1, weights, seed)
        self.last_terms: dict | None = None

    def reset(self, seed: int | None = None, config: EnvConfig | None = None) -> Observation:
        if config is not None and config != self.cfg:
            self.cfg = config
            self.vec = VecCatchEnv(config, 1, self.weights, 0 if seed is None else seed)
        obs = self.vec.reset(seed)
        return Observation.from_vector(obs[0], self.cfg.stage)

    @property
    def params(self) -> EnvParams:
        return self.vec.params[0]

    def step(self, action):
        if self.vec.done[0]:
            raise RuntimeError("episode is over; call reset()")
        if isinstance(action, Action):
            action = action.to_normalized(self.cfg.action_box)
        obs, reward, done, info = self.vec.step(np.asarray(action, dtype=float)[None, :])
        self.last_terms = {t: float(info["terms"][0, j]) for j, t in enumerate(TERMS)}
        return (Observation.from_vector(obs[0], self.cfg.stage), float(reward[0]), bool(done[0]),
                self.vec.outcome(0))


def episode_steps_for(horizon_s: float, control_hz: float) -> int:
    return int(math.ceil(horizon_s * control_hz - 1e-9))
