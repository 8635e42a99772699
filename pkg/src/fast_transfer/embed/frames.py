"""Frame-stack datasets: collection from environments and binary files.

File layout (little-endian): ``b"FSTK"`` | u32 version | u32 R | u32 count
| count * 4 * R * R float32 values, stacks stored channel-first.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, VersionMismatch

FRAMES_MAGIC = b"FSTK"
FRAMES_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_frame_dataset(path, stacks) -> None:
    stacks = np.asarray(stacks, dtype="<f4")
    if stacks.ndim != 4 or stacks.shape[1] != 4 or stacks.shape[2] != stacks.shape[3]:
        raise ValueError(f"expected (count, 4, R, R) stacks, got {stacks.shape}")
    count, _, r, _ = stacks.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FRAMES_MAGIC, FRAMES_VERSION, r, count))
        fh.write(stacks.tobytes())


def read_frame_dataset(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CorruptFile(f"{path}: truncated header")
    magic, version, r, count = _HEADER.unpack_from(data)
    if magic != FRAMES_MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    if version != FRAMES_VERSION:
        raise VersionMismatch(f"{path}: frame dataset version {version}, expected {FRAMES_VERSION}")
    expected = _HEADER.size + count * 4 * r * r * 4
    if len(data) != expected:
        raise CorruptFile(f"{path}: size {len(data)} != expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, 4, r, r)
    return arr.astype(np.float32)


def collect_last_stacks(env, controller, n_episodes: int, max_steps: int | None = None):
    """Run ``controller(obs, env)`` for n episodes; return the last-4-frame stack
    and episodic reward of each episode that lasted at least 3 steps."""
    out = []
    skipped = 0
    for _ in range(n_episodes):
        obs = env.reset()
        total = 0.0
        done = False
        steps = 0
        while not done and (max_steps is None or steps < max_steps):
            obs, r, done, _ = env.step(controller(obs, env))
            total += r
            steps += 1
        if len(env.history) < 4:
            skipped += 1
            continue
        out.append((np.stack(env.recent_frames()), total))
    return out, skipped
