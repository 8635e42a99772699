"""Shared builders for small repositories and stub environments."""
from collections import deque

import numpy as np

from fast_transfer.embed import TextEncoderConfig
from fast_transfer.repo import RepositoryIndex, add_source_task, precompute_representations
from fast_transfer.sac import Policy


def small_repository(n_records, ae, seed=0, obs_dim=45, modes=("F", "FT")):
    rng = np.random.default_rng(seed)
    index = RepositoryIndex(autoencoder="ae.ckpt", text_config=TextEncoderConfig(dim=16))
    for i in range(n_records):
        pol = Policy.create(obs_dim, 2, (8, 8), rng=rng, id=f"task{i}").freeze()
        k = int(rng.integers(1, 3))
        stacks = rng.random((k, 4, 64, 64)).astype(np.float32)
        rewards = rng.normal(size=k).round(3).tolist()
        add_source_task(index, f"task{i}", f"drive around track number {i}", pol, stacks, rewards)
    for mode in modes:
        precompute_representations(index, ae, index.text_config, mode)
    return index


class StubEnv:
    """Minimal env surface used by the transfer controller and dataset tools."""

    def __init__(self, episode_rewards=(), episode_len=10, res=8):
        self.history = deque(maxlen=4)
        self.episode_rewards = list(episode_rewards)
        self.episode_len = episode_len
        self.res = res
        self.ep = -1

    def reset(self, seed=None):
        self.ep += 1
        self.t = 0
        self.history.clear()
        self.history.append(self._frame())
        return np.zeros((1, 9), np.float32)

    def _frame(self):
        return np.full((self.res, self.res), (self.ep * 100 + len(self.history)) / 1e4, np.float32)

    def step(self, action):
        self.t += 1
        self.history.append(np.full((self.res, self.res), (self.ep * 100 + self.t) / 1e4, np.float32))
        done = self.t >= self.episode_len
        r = self.episode_rewards[self.ep] / self.episode_len if self.episode_rewards else 0.0
        return np.zeros((1, 9), np.float32), r, done, {"timeout": done}

    def recent_frames(self):
        return list(self.history)


def ae_gradient_errors(h=1e-4, seed=3):
    """Relative error of autograd vs central differences per parameter
    tensor, for an 8x8x4 toy autoencoder in double precision."""
    import torch

    from fast_transfer.embed import AeArchitecture, FrameAutoencoder

    torch.manual_seed(seed)
    model = FrameAutoencoder(AeArchitecture(resolution=8, channels=(3,), latent_dim=6)).double()
    x = torch.rand(5, 4, 8, 8, dtype=torch.float64)

    def loss():
        return ((model(x) - x) ** 2).mean()

    model.zero_grad()
    loss().backward()
    errors = {}
    for name, p in model.named_parameters():
        analytic = p.grad.detach().clone().ravel()
        numeric = torch.zeros_like(analytic)
        flat = p.data.view(-1)
        with torch.no_grad():
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + h
                lp = loss().item()
                flat[i] = old - h
                lm = loss().item()
                flat[i] = old
                numeric[i] = (lp - lm) / (2 * h)
        errors[name] = float((analytic - numeric).norm() / max(analytic.norm(), numeric.norm(), 1e-12))
    return errors
