"""Repository of solved source tasks: frames, description, frozen policy.

On disk a repository is a directory::

    manifest.json          names, descriptions, checksums, format_version
    policies/<name>.pol    frozen policy checkpoint
    frames/<name>.fstk     frame stacks, best episode first
    representations.json   cached frame embeddings and representations
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed.autoencoder import encode_frames
from .embed.frames import read_frame_dataset, write_frame_dataset
from .embed.representation import TaskRepresentation, build_representation
from .embed.text import TextEncoderConfig, embed_text
from .errors import (
    CorruptFile,
    DuplicateName,
    EpisodeTooShort,
    ShapeMismatch,
    UnfrozenPolicy,
    VersionMismatch,
)
from .evaluation import as_controller
from .sac.checkpoint import load_policy, save_policy
from .sac.core import Policy

log = logging.getLogger(__name__)

REPO_FORMAT_VERSION = 1


@dataclass
class SourceTaskRecord:
    name: str
    description: str
    policy: Policy
    frame_stacks: np.ndarray  # (k, 4, R, R), best episode first
    episode_rewards: list = field(default_factory=list)
    cached_frame_embedding: np.ndarray | None = None
    cached_representation: dict = field(default_factory=dict)  # mode -> TaskRepresentation

    @property
    def representative_stack(self) -> np.ndarray:
        if self.episode_rewards:
            return self.frame_stacks[int(np.argmax(self.episode_rewards))]
        return self.frame_stacks[0]


@dataclass
class RepositoryIndex:
    records: list = field(default_factory=list)
    autoencoder: str | None = None  # checkpoint reference
    text_config: TextEncoderConfig = field(default_factory=TextEncoderConfig)

    def __len__(self):
        return len(self.records)

    @property
    def names(self):
        return [r.name for r in self.records]

    def get(self, name: str) -> SourceTaskRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


def generate_source_dataset(policy, env, n_episodes: int = 1000, keep_top: int = 1, rng=None):
    """Roll out ``policy`` and keep the last-4-frame stacks of the
    ``keep_top`` highest-reward episodes, best first."""
    if not n_episodes >= keep_top >= 1:
        raise ValueError("need n_episodes >= keep_top >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    controller = as_controller(policy)
    episodes = []
    for i in range(n_episodes):
        obs = env.reset(seed=int(rng.integers(2**31)))
        done = False
        total = 0.0
        while not done:
            obs, r, done, _ = env.step(controller(obs, env))
            total += r
        try:
            if len(env.history) < 4:
                raise EpisodeTooShort(f"episode {i} produced {len(env.history)} frames")
        except EpisodeTooShort as exc:
            log.warning("skipping: %s", exc)
            continue
        episodes.append((total, i, np.stack(env.recent_frames())))
    episodes.sort(key=lambda e: (-e[0], e[1]))
    return [(stack, total) for total, _, stack in episodes[:keep_top]]


def add_source_task(index: RepositoryIndex, name: str, description: str, policy: Policy,
                    stacks, rewards=None) -> RepositoryIndex:
    if name in index.names:
        raise DuplicateName(f"source task {name!r} already in repository")
    if not policy.frozen:
        raise UnfrozenPolicy(f"policy for {name!r} must be frozen before registration")
    stacks = np.asarray(stacks, dtype=np.float32)
    if stacks.ndim == 3:
        stacks = stacks[None]
    if len(stacks) < 1:
        raise ValueError("need at least one frame stack")
    index.records.append(SourceTaskRecord(name, description, policy, stacks,
                                          list(map(float, rewards or []))))
    return index


def compute_representation(record: SourceTaskRecord, ae, text_config: TextEncoderConfig, mode: str):
    stack = record.representative_stack
    if tuple(stack.shape) != ae.input_shape:
        raise ShapeMismatch(f"{record.name}: stack {stack.shape} vs autoencoder {ae.input_shape}")
    frame_emb = encode_frames(ae, stack)
    text_emb = embed_text(text_config, record.description, task=record.name) if mode == "FT" else None
    return frame_emb, build_representation(frame_emb, text_emb, mode)


def precompute_representations(index: RepositoryIndex, ae, text_config=None, mode: str = "F"):
    text_config = text_config or index.text_config
    index.text_config = text_config
    for rec in index.records:
        emb, rep = compute_representation(rec, ae, text_config, mode)
        rec.cached_frame_embedding = emb
        rec.cached_representation[mode] = rep
    return index


# -- persistence --------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_repository(index: RepositoryIndex, path) -> Path:
    root = Path(path)
    (root / "policies").mkdir(parents=True, exist_ok=True)
    (root / "frames").mkdir(exist_ok=True)
    entries = []
    reps = {}
    for rec in index.records:
        pol = root / "policies" / f"{rec.name}.pol"
        frm = root / "frames" / f"{rec.name}.fstk"
        save_policy(rec.policy, pol)
        write_frame_dataset(frm, rec.frame_stacks)
        entries.append({
            "name": rec.name,
            "description": rec.description,
            "policy": str(pol.relative_to(root)),
            "frames": str(frm.relative_to(root)),
            "episode_rewards": rec.episode_rewards,
            "checksums": {"policy": _sha256(pol), "frames": _sha256(frm)},
        })
        reps[rec.name] = {
            "frame_embedding": None if rec.cached_frame_embedding is None
            else [float(x) for x in rec.cached_frame_embedding],
            "representations": {m: [float(x) for x in r.vector] for m, r in rec.cached_representation.items()},
        }
    rep_file = root / "representations.json"
    rep_file.write_text(json.dumps(reps))
    manifest = {
        "format_version": REPO_FORMAT_VERSION,
        "autoencoder": index.autoencoder,
        "text_config": index.text_config.to_dict(),
        "records": entries,
        "representations": {"file": rep_file.name, "checksum": _sha256(rep_file)},
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return root


def _verified(root: Path, rel: str, checksum: str) -> Path:
    p = root / rel
    if not p.exists() or _sha256(p) != checksum:
        raise CorruptFile(f"{p}: missing or checksum mismatch")
    return p


def load_repository(path) -> RepositoryIndex:
    root = Path(path)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise CorruptFile(f"{root}: no manifest") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{root}/manifest.json: unreadable") from exc
    version = manifest.get("format_version")
    if version != REPO_FORMAT_VERSION:
        raise VersionMismatch(f"repository format_version {version!r}, expected {REPO_FORMAT_VERSION}")
    rep_meta = manifest["representations"]
    reps = json.loads(_verified(root, rep_meta["file"], rep_meta["checksum"]).read_text())
    tc = manifest.get("text_config", {})
    index = RepositoryIndex(
        autoencoder=manifest.get("autoencoder"),
        text_config=TextEncoderConfig(tc.get("dim", 128),
                                      {k: np.asarray(v) for k, v in tc.get("overrides", {}).items()}),
    )
    for e in manifest["records"]:
        policy = load_policy(_verified(root, e["policy"], e["checksums"]["policy"]))
        stacks = read_frame_dataset(_verified(root, e["frames"], e["checksums"]["frames"]))
        rec = SourceTaskRecord(e["name"], e["description"], policy, stacks, list(e["episode_rewards"]))
        cached = reps.get(e["name"], {})
        if cached.get("frame_embedding") is not None:
            rec.cached_frame_embedding = np.asarray(cached["frame_embedding"], dtype=np.float64)
        rec.cached_representation = {m: TaskRepresentation(np.asarray(v), m)
                                     for m, v in cached.get("representations", {}).items()}
        index.records.append(rec)
    return index


def repository_checksum(path) -> str:
    return _sha256(Path(path) / "manifest.json")


def repositories_equal(a: RepositoryIndex, b: RepositoryIndex) -> bool:
    if a.autoencoder != b.autoencoder or len(a) != len(b) or a.text_config.dim != b.text_config.dim:
        return False
    if set(a.text_config.overrides) != set(b.text_config.overrides):
        return False
    for k in a.text_config.overrides:
        if not np.array_equal(a.text_config.overrides[k], b.text_config.overrides[k]):
            return False
    for ra, rb in zip(a.records, b.records):
        if (ra.name, ra.description, ra.episode_rewards) != (rb.name, rb.description, rb.episode_rewards):
            return False
        if not np.array_equal(ra.frame_stacks, rb.frame_stacks):
            return False
        pa, pb = ra.policy, rb.policy
        if (pa.id, pa.frozen, pa.actor.sizes, pa.act_dim) != (pb.id, pb.frozen, pb.actor.sizes, pb.act_dim):
            return False
        if not np.array_equal(pa.actor.params, pb.actor.params):
            return False
        ea, eb = ra.cached_frame_embedding, rb.cached_frame_embedding
        if (ea is None) != (eb is None) or (ea is not None and not np.array_equal(ea, eb)):
            return False
        if ra.cached_representation != rb.cached_representation:
            return False
    return True
