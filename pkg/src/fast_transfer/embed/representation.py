"""Task representations and cosine scoring."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ModeMismatch, ShapeMismatch, TooFewFrames, ZeroVector

MODES = ("F", "FT")


@dataclass
class TaskRepresentation:
    vector: np.ndarray
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ModeMismatch(f"mode must be one of {MODES}, got {self.mode!r}")
        self.vector = np.asarray(self.vector, dtype=np.float64)

    def __len__(self):
        return len(self.vector)

    def __eq__(self, other):
        return (isinstance(other, TaskRepresentation) and self.mode == other.mode
                and np.array_equal(self.vector, other.vector))


def min_max_scale(x) -> np.ndarray:
    """Per-vector scaling to [0, 1]; a constant vector maps to all 0.5."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full_like(x, 0.5)
    return (x - lo) / (hi - lo)


def build_representation(frame_emb, text_emb=None, mode: str = "F") -> TaskRepresentation:
    if mode not in MODES:
        raise ModeMismatch(f"unknown mode {mode!r}")
    parts = [np.asarray(frame_emb, dtype=np.float64)]
    if mode == "FT":
        if text_emb is None:
            raise ModeMismatch("FT mode needs a text embedding")
        parts.append(np.asarray(text_emb, dtype=np.float64))
    return TaskRepresentation(min_max_scale(np.concatenate(parts)), mode)


def cosine_similarity(u, v) -> float:
    u = u.vector if isinstance(u, TaskRepresentation) else np.asarray(u, dtype=np.float64)
    v = v.vector if isinstance(v, TaskRepresentation) else np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeMismatch(f"length mismatch {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def sample_frame_stack(frames, rng: np.random.Generator) -> np.ndarray:
    """Four consecutive frames from an episode, start index uniform."""
    if len(frames) < 4:
        raise TooFewFrames(f"need at least 4 frames, got {len(frames)}")
    start = int(rng.integers(0, len(frames) - 3))
    return np.stack([np.asarray(f, dtype=np.float32) for f in frames[start:start + 4]])
