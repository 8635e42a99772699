"""Soft actor-critic with a fixed entropy temperature.

Actor: squashed Gaussian, ``a = tanh(mu + std * eps)``.
Critics: two Q networks plus Polyak-averaged targets.
Observations are flattened row-major at this boundary.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, FrozenPolicy, NonFiniteLoss, ShapeMismatch
from .nets import MLP, Adam

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_LOG2 = math.log(2.0)


@dataclass
class SacHyperparams:
    learning_rate: float = 3e-4
    batch_size: int = 256
    gamma: float = 0.99
    tau: float = 0.005
    alpha: float = 0.2
    gradient_steps: int = 1
    train_freq: int = 1  # env steps between update rounds
    learning_starts: int = 1000
    replay_capacity: int = 100_000
    total_timesteps: int = 100_000
    hidden: tuple = (256, 256)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError("tau must lie in (0, 1]")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.batch_size < 1 or self.batch_size > self.replay_capacity:
            raise ConfigError("batch_size must lie in [1, replay_capacity]")
        if self.gradient_steps < 1 or self.train_freq < 1:
            raise ConfigError("gradient_steps and train_freq must be >= 1")
        if self.learning_rate <= 0 or self.total_timesteps < 0 or self.learning_starts < 0:
            raise ConfigError("learning_rate must be positive, step counts non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


# Best SAC values per evaluation track, as reported for the 10M-step runs.
PAPER_SAC_PRESETS = {
    "oval": dict(learning_rate=1e-3, batch_size=1024, total_timesteps=10_000_000, tau=0.9, gamma=0.8),
    "mixed": dict(learning_rate=1e-3, batch_size=1024, total_timesteps=10_000_000, tau=0.5, gamma=0.99),
    "long_complex": dict(learning_rate=1e-3, batch_size=1024, total_timesteps=10_000_000, tau=0.5, gamma=0.99),
}


class Policy:
    """Actor network handle. Frozen policies refuse parameter updates."""

    def __init__(self, actor: MLP, act_dim: int = 2, id: str = "target", frozen: bool = False,
                 meta: dict | None = None):
        self.actor = actor
        self.obs_dim = actor.sizes[0]
        self.act_dim = act_dim
        self.id = id
        self.frozen = frozen
        self.meta = dict(meta or {})

    @classmethod
    def create(cls, obs_dim, act_dim=2, hidden=(256, 256), rng=None, **kw) -> "Policy":
        return cls(MLP((obs_dim, *hidden, 2 * act_dim), rng=rng), act_dim, **kw)

    def freeze(self) -> "Policy":
        self.frozen = True
        self.actor.params.flags.writeable = False
        return self

    def frozen_copy(self, id: str | None = None) -> "Policy":
        p = Policy(self.actor.copy(), self.act_dim, id or self.id, meta=self.meta)
        return p.freeze()

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.actor.params).tobytes()).hexdigest()

    def assert_mutable(self):
        if self.frozen:
            raise FrozenPolicy(f"policy {self.id!r} is frozen")


def _flat(obs, obs_dim):
    x = np.asarray(obs, dtype=np.float32).reshape(-1)
    if x.size != obs_dim:
        raise ShapeMismatch(f"observation has {x.size} values, policy expects {obs_dim}")
    return x


def select_action(policy: Policy, obs, deterministic: bool = True, rng=None) -> np.ndarray:
    x = _flat(obs, policy.obs_dim)[None, :]
    out = policy.actor(x)[0]
    mu = out[: policy.act_dim]
    if deterministic:
        return np.tanh(mu)
    ls = np.clip(out[policy.act_dim:], LOG_STD_MIN, LOG_STD_MAX)
    u = mu + np.exp(ls) * rng.standard_normal(policy.act_dim).astype(np.float32)
    return np.tanh(u)


def compute_return(rewards, gamma: float) -> float:
    g = 0.0
    for r in reversed(list(rewards)):
        g = r + gamma * g
    return float(g)


def squashed_gaussian_logp(u, mu, log_std):
    """log-density of ``tanh(u)`` where ``u ~ N(mu, exp(log_std)^2)``; summed over actions."""
    z = (u - mu) / np.exp(log_std)
    gauss = -0.5 * z * z - log_std - _HALF_LOG_2PI
    # log(1 - tanh(u)^2) written stably
    corr = 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))
    return (gauss - corr).sum(axis=-1)


def actor_sample(actor: MLP, obs, eps, act_dim):
    """Reparameterised sample; returns (action, logp, cache)."""
    out, acts = actor.forward(obs)
    mu = out[:, :act_dim]
    raw = out[:, act_dim:]
    ls = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(ls)
    u = mu + std * eps
    a = np.tanh(u)
    logp = (-0.5 * eps * eps - ls - _HALF_LOG_2PI - 2.0 * (_LOG2 - u - np.logaddexp(0.0, -2.0 * u))).sum(-1)
    cache = (acts, raw, std, eps, a)
    return a, logp, cache


def actor_backward(actor: MLP, cache, g_action, g_logp, act_dim):
    """Gradient of a loss given dL/d action (B, A) and dL/d logp (B,)."""
    acts, raw, std, eps, a = cache
    g_logp = g_logp[:, None]
    g_u = g_action * (1.0 - a * a) + g_logp * 2.0 * a
    g_ls = g_u * std * eps - g_logp
    g_ls = g_ls * ((raw > LOG_STD_MIN) & (raw < LOG_STD_MAX))
    g_out = np.concatenate([g_u, g_ls], axis=1)
    grads, _ = actor.backward(acts, g_out)
    return grads


def critic_loss_and_grad(critic: MLP, obs, act, target):
    """Loss 0.5 * mean((Q(s, a) - y)^2) and its parameter gradient."""
    x = np.concatenate([obs, act], axis=1)
    q, acts = critic.forward(x)
    diff = q[:, 0] - target
    loss = 0.5 * float(np.mean(diff * diff))
    g = (diff / diff.shape[0])[:, None].astype(critic.dtype)
    grads, _ = critic.backward(acts, g)
    return loss, grads


def actor_loss_and_grad(actor: MLP, q1: MLP, q2: MLP, obs, eps, alpha, act_dim):
    """Loss mean(alpha * logp - min(Q1, Q2)) with reparameterised actions."""
    B = obs.shape[0]
    a, logp, cache = actor_sample(actor, obs, eps, act_dim)
    x = np.concatenate([obs, a], axis=1)
    v1, c1 = q1.forward(x)
    v2, c2 = q2.forward(x)
    use1 = (v1[:, 0] <= v2[:, 0])[:, None]
    qmin = np.where(use1, v1, v2)[:, 0]
    loss = float(np.mean(alpha * logp - qmin))
    g_q = np.full((B, 1), -1.0 / B, dtype=actor.dtype)
    _, gx1 = q1.backward(c1, g_q * use1, need_input_grad=True, need_param_grad=False)
    _, gx2 = q2.backward(c2, g_q * ~use1, need_input_grad=True, need_param_grad=False)
    g_action = (gx1 + gx2)[:, -act_dim:]
    g_logp = np.full(B, alpha / B, dtype=actor.dtype)
    grads = actor_backward(actor, cache, g_action, g_logp, act_dim)
    return loss, grads, float(np.mean(logp))


def soft_update(target: np.ndarray, online: np.ndarray, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, in place."""
    if tau == 1.0:
        target[...] = online
    else:
        target *= (1.0 - tau)
        target += tau * online


class ReplayBuffer:
    def __init__(self, obs_dim: int, act_dim: int, capacity: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), np.float32)
        self.act = np.zeros((capacity, act_dim), np.float32)
        self.rew = np.zeros(capacity, np.float32)
        self.done = np.zeros(capacity, np.float32)
        self.cursor = 0
        self.size = 0
        self.inserted = 0

    def add(self, obs, act, rew, next_obs, done):
        i = self.cursor
        self.obs[i] = np.ravel(obs)
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = np.ravel(next_obs)
        self.done[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1

    def __len__(self):
        return self.size

    def sample(self, batch_size: int, rng):
        idx = rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx], self.done[idx]


@dataclass
class SacLearner:
    policy: Policy
    q1: MLP
    q2: MLP
    q1_target: MLP
    q2_target: MLP
    buffer: ReplayBuffer
    hp: SacHyperparams
    rng: np.random.Generator
    actor_opt: Adam = field(init=False)
    critic_opt: tuple = field(init=False)
    n_updates: int = 0

    def __post_init__(self):
        lr = self.hp.learning_rate
        self.actor_opt = Adam(self.policy.actor.n_params, lr)
        self.critic_opt = (Adam(self.q1.n_params, lr), Adam(self.q2.n_params, lr))

    @classmethod
    def create(cls, obs_dim, act_dim, hp: SacHyperparams, seed: int = 0, id: str = "target"):
        init_rng, sample_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        policy = Policy.create(obs_dim, act_dim, hp.hidden, rng=init_rng, id=id)
        sizes = (obs_dim + act_dim, *hp.hidden, 1)
        q1 = MLP(sizes, rng=init_rng)
        q2 = MLP(sizes, rng=init_rng)
        return cls(policy, q1, q2, q1.copy(), q2.copy(),
                   ReplayBuffer(obs_dim, act_dim, hp.replay_capacity), hp, sample_rng)

    @property
    def act_dim(self):
        return self.policy.act_dim

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.policy.actor.params, self.q1.params, self.q2.params,
                    self.q1_target.params, self.q2_target.params):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def sac_update(learner: SacLearner, batch, hp: SacHyperparams | None = None) -> dict:
    """One gradient step on both critics, then the actor, then the targets."""
    learner.policy.assert_mutable()
    hp = hp or learner.hp
    obs, act, rew, next_obs, done = batch
    B, A = act.shape
    rng = learner.rng
    actor = learner.policy.actor

    eps_next = rng.standard_normal((B, A)).astype(np.float32)
    a2, logp2, _ = actor_sample(actor, next_obs, eps_next, A)
    x2 = np.concatenate([next_obs, a2], axis=1)
    qt = np.minimum(learner.q1_target(x2), learner.q2_target(x2))[:, 0]
    y = rew + hp.gamma * (1.0 - done) * (qt - hp.alpha * logp2)

    l1, g1 = critic_loss_and_grad(learner.q1, obs, act, y)
    l2, g2 = critic_loss_and_grad(learner.q2, obs, act, y)
    eps = rng.standard_normal((B, A)).astype(np.float32)
    if not (math.isfinite(l1) and math.isfinite(l2)):
        raise NonFiniteLoss(f"critic loss became non-finite ({l1}, {l2})")
    learner.critic_opt[0].step(learner.q1.params, g1)
    learner.critic_opt[1].step(learner.q2.params, g2)

    la, ga, mean_logp = actor_loss_and_grad(actor, learner.q1, learner.q2, obs, eps, hp.alpha, A)
    if not math.isfinite(la):
        raise NonFiniteLoss(f"actor loss became non-finite ({la})")
    learner.actor_opt.step(actor.params, ga)

    soft_update(learner.q1_target.params, learner.q1.params, hp.tau)
    soft_update(learner.q2_target.params, learner.q2.params, hp.tau)
    learner.n_updates += 1
    return {"critic1": l1, "critic2": l2, "actor": la, "entropy_term": -hp.alpha * mean_logp}
