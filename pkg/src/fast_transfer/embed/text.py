"""Deterministic text embeddings for task descriptions.

The default encoder hashes token bigrams (with sentence boundary markers)
into a fixed number of buckets, weights them by term frequency and
L2-normalises. Precomputed vectors from any external sentence encoder can
be dropped in per task through an override file.
"""
from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyDescription, ShapeMismatch, VersionMismatch

OVERRIDE_FORMAT_VERSION = 1
_TOKEN = re.compile(r"[\w']+")


def normalize(text: str) -> str:
    return " ".join(text.casefold().replace("’", "'").split())


def _bucket(key: str, dim: int) -> int:
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


@dataclass
class TextEncoderConfig:
    dim: int = 128
    overrides: dict = field(default_factory=dict)  # task name -> vector

    def to_dict(self) -> dict:
        return {"dim": self.dim, "overrides": {k: list(map(float, v)) for k, v in self.overrides.items()}}


def embed_text(config: TextEncoderConfig, description: str, task: str | None = None) -> np.ndarray:
    if task is not None and task in config.overrides:
        vec = np.asarray(config.overrides[task], dtype=np.float64)
        if vec.shape != (config.dim,):
            raise ShapeMismatch(f"override for {task!r} has shape {vec.shape}, expected ({config.dim},)")
        return vec
    if not description and task is not None:
        description = TASK_DESCRIPTIONS.get(task, "")
    tokens = _TOKEN.findall(normalize(description or ""))
    if not tokens:
        raise EmptyDescription("description has no tokens")
    seq = ["<s>", *tokens, "</s>"]
    counts = Counter(f"{a} {b}" for a, b in zip(seq[:-1], seq[1:]))
    vec = np.zeros(config.dim)
    for gram in sorted(counts):
        vec[_bucket(gram, config.dim)] += counts[gram]
    return vec / np.linalg.norm(vec)


def save_text_overrides(overrides: dict, path) -> None:
    payload = {"format_version": OVERRIDE_FORMAT_VERSION,
               "embeddings": {k: [float(x) for x in v] for k, v in overrides.items()}}
    Path(path).write_text(json.dumps(payload, indent=1))


def load_text_overrides(path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("format_version") != OVERRIDE_FORMAT_VERSION:
        raise VersionMismatch(f"text override file version {payload.get('format_version')!r}")
    return {k: np.asarray(v, dtype=np.float64) for k, v in payload["embeddings"].items()}


# Task texts (eight tasks; the custom circuit reuses the racetrack text).
TASK_DESCRIPTIONS = {
    "highway": "The ego-vehicle is driving on a multilane highway populated with other vehicles. "
               "The agent’s objective is to reach a high speed while avoiding collisions with "
               "neighbouring vehicles.",
    "lane_centering": "The ego-veichle is driving on a single lane road which is not straight. "
                      "The agent's objective is to maintain the car on the roadway.",
    "merge": "The ego-vehicle starts on a main highway but soon approaches a road junction with "
             "incoming vehicles on the access ramp. The agent’s objective is now to maintain a high "
             "speed while making room for the vehicles so that they can safely merge in the traffic.",
    "intersection": "The ego-veichle if approaching an intersection. It is an intersection "
                    "negotiation task with dense traffic. The agent's objective is to cross the "
                    "intersection without collisions.",
    "roundabout": "The ego-vehicle if approaching a roundabout with flowing traffic. It will follow "
                  "its planned route automatically, but has to handle lane changes and longitudinal "
                  "control to pass the roundabout as fast as possible while avoiding collisions.",
    "indiana": "The ego-veichle is driving on a circuit. It is an oval circuit. The objective is to "
               "complete the track as fast as possible without touching the edges. ",
    "racetrack": "The ego-veichle is driving on a racetrack. The agent's objective is to follow the "
                 "tracks while avoiding collisions with other vehicles.",
}
TASK_DESCRIPTIONS["custom_racetrack"] = TASK_DESCRIPTIONS["racetrack"]

# built-in track -> task whose description it carries
TRACK_TASKS = {
    "straight_traffic": "highway",
    "lane_centering": "lane_centering",
    "merge_like": "merge",
    "cross_like": "intersection",
    "ring_like": "roundabout",
    "oval": "indiana",
    "oval_alt": "indiana",
    "circle": "indiana",
    "mixed": "racetrack",
    "long_complex": "custom_racetrack",
}


def description_for_track(track_name: str) -> str:
    return TASK_DESCRIPTIONS[TRACK_TASKS[track_name]]
