"""The off-policy interaction loop shared by baseline and transfer runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import SacHyperparams, SacLearner, sac_update, select_action

log = logging.getLogger(__name__)

TARGET = -1


@dataclass
class TrainResult:
    learner: SacLearner
    curve: list = field(default_factory=list)  # (timestep, episodic_reward)
    episodes: list = field(default_factory=list)  # per-episode metric dicts
    actions: list | None = None
    rewards: list | None = None
    usage: object = None

    @property
    def policy(self):
        return self.learner.policy


class ActingController:
    """Hook interface: decides who acts and observes every step.

    ``choose`` returns an index into ``self.policies`` or TARGET; the loop
    never hands a controller the learner's RNG.
    """

    policies: list = []

    def start(self, env):
        pass

    def choose(self, t: int) -> int:
        return TARGET

    def after_step(self, t: int, env, done: bool):
        pass


def seed_streams(seed: int):
    """Independent (env, learner) seeds derived from one run seed."""
    env_ss, learner_ss, _transfer = np.random.SeedSequence(seed).spawn(3)
    return int(env_ss.generate_state(1)[0]), int(learner_ss.generate_state(1)[0])


def run_training(env, hp: SacHyperparams, seed: int, controller: ActingController | None = None,
                 record_trajectory: bool = False, learner: SacLearner | None = None, stop=None) -> TrainResult:
    """SAC loop; ``stop(result)`` is checked after every episode and ends training early when true."""
    env_seed, learner_seed = seed_streams(seed)
    if learner is None:
        obs_dim = int(np.prod(env.obs_shape))
        learner = SacLearner.create(obs_dim, 2, hp, seed=learner_seed)
    result = TrainResult(learner)
    if record_trajectory:
        result.actions, result.rewards = [], []
    policy = learner.policy
    env.seed(env_seed)
    obs = env.reset()
    if controller is not None:
        controller.start(env)
    ep_reward = 0.0
    rng = learner.rng
    for t in range(hp.total_timesteps):
        who = controller.choose(t) if controller is not None else TARGET
        if who == TARGET:
            if t < hp.learning_starts:
                action = rng.uniform(-1.0, 1.0, size=policy.act_dim).astype(np.float32)
            else:
                action = select_action(policy, obs, deterministic=False, rng=rng)
        else:
            action = controller.act(who, obs)
        next_obs, reward, done, info = env.step(action)
        terminal = done and not info["timeout"]
        learner.buffer.add(obs, action, reward, next_obs, terminal)
        if record_trajectory:
            result.actions.append(np.asarray(action, dtype=np.float32).copy())
            result.rewards.append(reward)
        n = t + 1
        if n >= hp.learning_starts and len(learner.buffer) >= hp.batch_size and n % hp.train_freq == 0:
            for _ in range(hp.gradient_steps):
                sac_update(learner, learner.buffer.sample(hp.batch_size, rng), hp)
        ep_reward += reward
        if done:
            result.curve.append((n, ep_reward))
            result.episodes.append(env.episode_metrics())
            ep_reward = 0.0
            obs = env.reset()
        else:
            obs = next_obs
        if controller is not None:
            controller.after_step(t, env, done)
        if done and stop is not None and stop(result):
            break
    if controller is not None:
        result.usage = getattr(controller, "usage", None)
    return result


def train_baseline(env, hyperparams: SacHyperparams, seed: int = 42, record_trajectory: bool = False):
    """Plain SAC; returns a :class:`TrainResult` (``.policy``, ``.curve``)."""
    return run_training(env, hyperparams, seed, None, record_trajectory)
