"""Convolutional autoencoder over 4-frame grayscale stacks.

Encoder: conv stages (leaky ReLU) -> flatten -> linear to the latent. The
decoder mirrors it with transposed convolutions and a linear output layer.
Stacks are channel-first: ``(4, R, R)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from ..binio import read_container, write_container
from ..errors import ConfigError, DivergedTraining, EmptyDataset, ShapeMismatch

AE_MAGIC = b"FASTAE\x00\x00"
AE_VERSION = 1


@dataclass(frozen=True)
class AeArchitecture:
    resolution: int = 64
    in_frames: int = 4
    channels: tuple = (64, 128, 128)
    kernel: int = 5
    stride: int = 3
    padding: int = 1
    latent_dim: int = 128

    def spatial_sizes(self) -> list:
        sizes = [self.resolution]
        for _ in self.channels:
            n = (sizes[-1] + 2 * self.padding - self.kernel) // self.stride + 1
            if n < 1:
                raise ConfigError(f"resolution {self.resolution} too small for {len(self.channels)} conv stages")
            sizes.append(n)
        return sizes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d) -> "AeArchitecture":
        d = dict(d)
        d["channels"] = tuple(d["channels"])
        return cls(**d)


def _activation():
    # leaky so the decoder cannot collapse onto dead units early in training
    return nn.LeakyReLU(0.01)


class FrameAutoencoder(nn.Module):
    def __init__(self, arch: AeArchitecture = AeArchitecture()):
        super().__init__()
        self.arch = arch
        sizes = arch.spatial_sizes()
        chans = [arch.in_frames, *arch.channels]
        enc = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            enc += [nn.Conv2d(cin, cout, arch.kernel, arch.stride, arch.padding), _activation()]
        self._bottleneck = (chans[-1], sizes[-1], sizes[-1])
        flat = chans[-1] * sizes[-1] ** 2
        self.encoder = nn.Sequential(*enc, nn.Flatten(), nn.Linear(flat, arch.latent_dim))
        dec = [nn.Linear(arch.latent_dim, flat), _activation(), nn.Unflatten(1, self._bottleneck)]
        rev = list(reversed(chans))
        rsizes = list(reversed(sizes))
        for k, (cin, cout) in enumerate(zip(rev[:-1], rev[1:])):
            base = (rsizes[k] - 1) * arch.stride - 2 * arch.padding + arch.kernel
            out_pad = rsizes[k + 1] - base
            if not 0 <= out_pad < arch.stride:
                raise ConfigError("decoder cannot mirror the encoder for this geometry")
            dec.append(nn.ConvTranspose2d(cin, cout, arch.kernel, arch.stride, arch.padding,
                                          output_padding=out_pad))
            if k < len(rev) - 2:
                dec.append(_activation())
        # linear output: a sigmoid head saturates on the mostly-black frames
        self.decoder = nn.Sequential(*dec)

    @property
    def input_shape(self):
        a = self.arch
        return (a.in_frames, a.resolution, a.resolution)

    def forward(self, x):
        return self.decoder(self.encoder(x))


def _check_stack(model: FrameAutoencoder, stack: np.ndarray):
    shape = tuple(stack.shape[-3:])
    if shape != model.input_shape:
        raise ShapeMismatch(f"frame stack {shape} does not match autoencoder input {model.input_shape}")


@torch.no_grad()
def encode_frames(model: FrameAutoencoder, stack) -> np.ndarray:
    """Latent embedding of one stack ``(4, R, R)`` (or a batch of them)."""
    stack = np.asarray(stack)
    _check_stack(model, stack)
    batched = stack.ndim == 4
    x = torch.as_tensor(stack if batched else stack[None], dtype=next(model.parameters()).dtype)
    z = model.encoder(x).numpy().astype(np.float64)
    return z if batched else z[0]


@torch.no_grad()
def decode(model: FrameAutoencoder, embedding) -> np.ndarray:
    z = np.asarray(embedding)
    if z.shape[-1] != model.arch.latent_dim:
        raise ShapeMismatch(f"embedding length {z.shape[-1]} != latent_dim {model.arch.latent_dim}")
    batched = z.ndim == 2
    x = torch.as_tensor(z if batched else z[None], dtype=next(model.parameters()).dtype)
    out = model.decoder(x).numpy()
    return out if batched else out[0]


@dataclass
class AeTrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    weight_decay: float = 1e-7
    max_epochs: int = 100
    patience: int = 5
    divergence_threshold: float = 1e-5
    eps: float = 1e-8
    split: tuple = (0.6, 0.2, 0.2)
    arch: AeArchitecture = field(default_factory=AeArchitecture)

    def __post_init__(self):
        self.split = tuple(self.split)
        if abs(sum(self.split) - 1.0) > 1e-9 or len(self.split) != 3:
            raise ConfigError("split fractions must be three values summing to 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if isinstance(self.arch, dict):
            self.arch = AeArchitecture.from_dict(self.arch)


# Grid searched for the original autoencoder (600x600 frames).
PAPER_AE_GRID = {
    "learning_rate": [1e-3, 1e-5, 1e-7],
    "batch_size": [32, 64, 128],
    "weight_decay": [1e-3, 1e-5, 1e-7],
}


def split_indices(n: int, split, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_train = int(round(split[0] * n))
    n_val = int(round(split[1] * n))
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def _mse(model, data: torch.Tensor, batch_size: int) -> float:
    if len(data) == 0:
        return float("nan")
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(data), batch_size):
            x = data[i:i + batch_size]
            total += float(((model(x) - x) ** 2).mean()) * len(x)
    return total / len(data)


def train_autoencoder(dataset, config: AeTrainConfig = AeTrainConfig(), seed: int = 0):
    """Holdout training with early stopping; returns ``(model, curves)``.

    ``curves`` holds per-epoch ``train``/``val`` MSE, the best epoch and the
    test MSE of the returned (best-validation) weights.
    """
    data = np.asarray(dataset, dtype=np.float32)
    if data.ndim != 4 or len(data) < 10:
        raise EmptyDataset("need at least 10 frame stacks of shape (4, R, R)")
    arch = config.arch
    if tuple(data.shape[1:]) != (arch.in_frames, arch.resolution, arch.resolution):
        raise ShapeMismatch(f"dataset stacks {data.shape[1:]} do not match architecture")
    rng = np.random.default_rng(seed)
    tr, va, te = split_indices(len(data), config.split, rng)
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = FrameAutoencoder(arch)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate,
                           weight_decay=config.weight_decay, eps=config.eps)
    train_t = torch.from_numpy(data[tr])
    val_t = torch.from_numpy(data[va])
    test_t = torch.from_numpy(data[te])
    curves = {"train": [], "val": [], "best_val": [], "best_epoch": -1}
    best = math.inf
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    stale = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_t))
        model.train()
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            x = train_t[order[i:i + config.batch_size]]
            loss = ((model(x) - x) ** 2).mean()
            if not torch.isfinite(loss):
                raise DivergedTraining(f"loss became non-finite at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(x)
        model.eval()
        val = _mse(model, val_t, 256)
        curves["train"].append(total / len(train_t))
        curves["val"].append(val)
        if not math.isfinite(val):
            raise DivergedTraining(f"validation loss non-finite at epoch {epoch}")
        if val < best - config.divergence_threshold:
            best = val
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            curves["best_epoch"] = epoch
            stale = 0
        else:
            stale += 1
        curves["best_val"].append(best)
        if stale >= config.patience:
            break
    model.load_state_dict(best_state)
    model.eval()
    curves["val_mse"] = best
    curves["test_mse"] = _mse(model, test_t, 256)
    curves["train_mse"] = _mse(model, train_t, 256)
    return model, curves


def save_autoencoder(model: FrameAutoencoder, path, extra: dict | None = None) -> None:
    state = model.state_dict()
    names = list(state)
    arrays = [state[k].detach().cpu().numpy().astype(np.float32) for k in names]
    desc = {"kind": "autoencoder", "arch": model.arch.to_dict(), "tensors": names, "extra": extra or {}}
    write_container(path, AE_MAGIC, AE_VERSION, desc, arrays)


def load_autoencoder(path, expected: AeArchitecture | None = None) -> FrameAutoencoder:
    desc, arrays = read_container(path, AE_MAGIC, AE_VERSION)
    arch = AeArchitecture.from_dict(desc["arch"])
    if expected is not None and arch != expected:
        raise ShapeMismatch(f"checkpoint architecture {arch} != expected {expected}")
    model = FrameAutoencoder(arch)
    state = model.state_dict()
    if list(state) != desc["tensors"]:
        raise ShapeMismatch("checkpoint tensor layout does not match the architecture")
    model.load_state_dict({k: torch.from_numpy(a.copy()) for k, a in zip(desc["tensors"], arrays)})
    model.eval()
    return model
