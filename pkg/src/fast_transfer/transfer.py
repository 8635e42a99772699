"""Similarity-gated transfer: SAC training where a source policy may act.

Every K environment steps the most recent four frames are embedded and
compared against each source task's cached representation. The best
source acts if its cosine score reaches theta, otherwise the target
policy does. Whoever acts, the transition lands in the target's replay
buffer and the target keeps learning.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .embed.autoencoder import encode_frames
from .embed.representation import MODES, TaskRepresentation, build_representation, cosine_similarity
from .embed.text import TextEncoderConfig, embed_text
from .errors import ConfigError, EmptyLog, IncompatibleRepository, ModeMismatch
from .evaluation import adapt_observation
from .sac.core import SacHyperparams, select_action
from .sac.train import TARGET, ActingController, TrainResult, run_training


@dataclass(frozen=True)
class TransferConfig:
    K: int = 100
    theta: float = 0.5
    mode: str = "F"
    stochastic_sources: bool = False

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not np.isfinite(self.theta):
            raise ConfigError("theta must be finite")

    def to_dict(self) -> dict:
        return {"K": self.K, "theta": self.theta, "mode": self.mode,
                "stochastic_sources": self.stochastic_sources}


@dataclass(frozen=True)
class SelectionOutcome:
    scores: tuple
    chosen: int  # source index or TARGET
    max_score: float


def select_policy(target_rep: TaskRepresentation, index, theta: float) -> SelectionOutcome:
    """Argmax cosine over sources in index order; TARGET below ``theta``."""
    scores = []
    for rec in index.records:
        src = rec.cached_representation.get(target_rep.mode)
        if src is None:
            raise ModeMismatch(f"source {rec.name!r} has no cached {target_rep.mode} representation")
        scores.append(cosine_similarity(target_rep, src))
    if not scores:
        return SelectionOutcome((), TARGET, float("-inf"))
    best = int(np.argmax(scores))  # first maximum wins ties
    chosen = best if scores[best] >= theta else TARGET
    return SelectionOutcome(tuple(scores), chosen, float(scores[best]))


@dataclass
class UsageLog:
    """Who acted at each step, plus the comparisons that were made."""

    sources: list  # names, position = source index
    acted: list = field(default_factory=list)  # per step: source index or TARGET
    comparisons: list = field(default_factory=list)  # (steps_executed, chosen, max_score)

    def __len__(self):
        return len(self.acted)

    def labels(self) -> list:
        return [None if i == TARGET else self.sources[i] for i in self.acted]

    def to_dict(self) -> dict:
        return {"sources": list(self.sources), "acted": list(self.acted),
                "comparisons": [list(c) for c in self.comparisons]}


def usage_percentages(usage_log) -> dict:
    """Fraction of all steps on which each source acted.

    Accepts a :class:`UsageLog` or a sequence of per-step labels where
    ``None`` means the target acted. Sources that never acted are omitted.
    """
    labels = usage_log.labels() if isinstance(usage_log, UsageLog) else list(usage_log)
    if not labels:
        raise EmptyLog("usage log is empty")
    counts: dict = {}
    for lab in labels:
        if lab is not None:
            counts[lab] = counts.get(lab, 0) + 1
    return {k: v / len(labels) for k, v in counts.items()}


class FastController(ActingController):
    """Chooses the acting policy for :func:`run_training`.

    The step counter runs across episode boundaries. A due comparison
    waits until the current episode has four frames.
    """

    def __init__(self, index, config: TransferConfig, autoencoder, text_embedding=None, rng=None):
        self.index = index
        self.config = config
        self.ae = autoencoder
        self.text_embedding = text_embedding
        self.policies = [rec.policy for rec in index.records]
        self.usage = UsageLog([rec.name for rec in index.records])
        self.current = TARGET
        self.count = 0
        # reserved for stochastic sources; never the learner's stream
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def choose(self, t: int) -> int:
        self.usage.acted.append(self.current)
        return self.current

    def act(self, who: int, obs):
        pol = self.policies[who]
        x = adapt_observation(obs, pol.obs_dim)
        if self.config.stochastic_sources:
            return select_action(pol, x, deterministic=False, rng=self.rng)
        return select_action(pol, x, deterministic=True)

    def target_representation(self, env) -> TaskRepresentation:
        stack = np.stack(env.recent_frames())
        return build_representation(encode_frames(self.ae, stack), self.text_embedding, self.config.mode)

    def after_step(self, t: int, env, done: bool):
        self.count += 1
        if self.count < self.config.K or len(env.history) < 4:
            return
        if not self.index.records:
            outcome = SelectionOutcome((), TARGET, float("-inf"))
        else:
            outcome = select_policy(self.target_representation(env), self.index, self.config.theta)
        self.current = outcome.chosen
        self.count = 0
        self.usage.comparisons.append((t + 1, outcome.chosen, outcome.max_score))


def check_repository(index, config: TransferConfig, autoencoder, text_dim: int | None) -> None:
    if not index.records:
        return
    if autoencoder is None:
        raise IncompatibleRepository("a non-empty repository needs an autoencoder")
    expected = autoencoder.arch.latent_dim + (text_dim or 0)
    for rec in index.records:
        rep = rec.cached_representation.get(config.mode)
        if rep is None:
            raise IncompatibleRepository(f"{rec.name!r}: no cached {config.mode} representation")
        if len(rep) != expected:
            raise IncompatibleRepository(f"{rec.name!r}: representation length {len(rep)}, expected {expected}")
        if tuple(rec.frame_stacks.shape[1:]) != autoencoder.input_shape:
            raise IncompatibleRepository(f"{rec.name!r}: frame shape does not match the autoencoder")


def run_fast_training(env, index, hp: SacHyperparams, config: TransferConfig, autoencoder=None,
                      text_config: TextEncoderConfig | None = None, target_description: str | None = None,
                      seed: int = 42, target_task: str | None = None,
                      record_trajectory: bool = False, stop=None) -> TrainResult:
    """Train a fresh target policy on ``env`` with transfer from ``index``.

    Returns a :class:`TrainResult` whose ``usage`` is the :class:`UsageLog`.
    """
    text_config = text_config or index.text_config
    text_emb = None
    if config.mode == "FT":
        if target_description is None and target_task is None:
            raise ConfigError("FT mode needs a target description")
        text_emb = embed_text(text_config, target_description or "", task=target_task)
    check_repository(index, config, autoencoder, len(text_emb) if text_emb is not None else None)
    transfer_seed = np.random.SeedSequence(seed).spawn(3)[2]
    controller = FastController(index, config, autoencoder, text_emb, np.random.default_rng(transfer_seed))
    return run_training(env, hp, seed, controller, record_trajectory, stop=stop)


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def run_manifest(hp: SacHyperparams, config: TransferConfig | None, seed: int, mode: str,
                 repository_checksum: str | None = None, **extra) -> dict:
    body = {
        "mode": mode,
        "seed": seed,
        "sac": hp.to_dict(),
        "transfer": config.to_dict() if config is not None else None,
        "repository_checksum": repository_checksum,
        **extra,
    }
    return {**body, "config_hash": config_hash(body),
            "created": time.strftime("%Y-%m-%dT%H:%M:%S")}
