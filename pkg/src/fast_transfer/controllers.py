"""Scripted drivers used as oracles and for dataset generation.

All controllers are callables ``controller(obs, env) -> action``; they read
the true vehicle state from ``env`` rather than the standardised observation.
"""
from __future__ import annotations

import math

import numpy as np

from .sim.track import wrap_angle


def _throttle(env, target_speed):
    cfg = env.config
    return float(np.clip((target_speed - env.ego.speed) / (cfg.accel_gain * cfg.dt), -1.0, 1.0))


class PurePursuit:
    """Steers towards a centreline point ``lookahead`` metres ahead."""

    def __init__(self, target_speed: float | None = None, lookahead: float = 10.0,
                 lookahead_gain: float = 0.5, noise: float = 0.0, rng=None):
        self.target_speed = target_speed
        self.lookahead = lookahead
        self.lookahead_gain = lookahead_gain
        self.noise = noise
        self.rng = rng

    def __call__(self, obs, env):
        ego = env.ego
        cfg = env.config
        ld = max(self.lookahead, self.lookahead_gain * ego.speed)
        tx, ty, _ = env.track.pose_at(ego.arc_length_progress + ld)
        dx, dy = tx - ego.x, ty - ego.y
        dist = max(math.hypot(dx, dy), 1e-6)
        alpha = wrap_angle(math.atan2(dy, dx) - ego.heading)
        kappa = 2.0 * math.sin(alpha) / dist
        steer = float(np.clip(kappa / cfg.steering_gain, -1.0, 1.0))
        speed = cfg.v_max if self.target_speed is None else self.target_speed
        action = np.array([steer, _throttle(env, speed)], dtype=np.float32)
        if self.noise and self.rng is not None:
            action = np.clip(action + self.noise * self.rng.standard_normal(2), -1.0, 1.0).astype(np.float32)
        return action


class CenterlineFollower:
    """Curvature feed-forward plus lateral/heading feedback at fixed speed."""

    def __init__(self, speed: float, k_lat: float = 0.02, k_head: float = 0.3):
        self.speed = speed
        self.k_lat = k_lat
        self.k_head = k_head

    def __call__(self, obs, env):
        ego = env.ego
        cfg = env.config
        s = ego.arc_length_progress
        tangent = env.track.pose_at(s)[2]
        kappa = (env.track.curvature_at(s) - self.k_lat * ego.lateral
                 - self.k_head * wrap_angle(ego.heading - tangent))
        steer = float(np.clip(kappa / cfg.steering_gain, -1.0, 1.0))
        return np.array([steer, _throttle(env, self.speed)], dtype=np.float32)


class Stationary:
    def __call__(self, obs, env):
        return np.array([0.0, -1.0], dtype=np.float32)


class RandomPolicy:
    def __init__(self, rng):
        self.rng = rng

    def __call__(self, obs, env):
        return self.rng.uniform(-1.0, 1.0, size=2).astype(np.float32)
