"""Experiment configuration: TOML files, validation and flag overrides.

Layout (every section optional)::

    name = "oval-fast"      # top level: name, seed, out, mode
    [env]      track, track_spec, episode = {...}
    [sac]      SacHyperparams fields
    [transfer] K, theta, stochastic_sources, repository, target_description, target_task
    [embed]    autoencoder, text_dim, text_overrides, datasets, [embed.train]
    [eval]     n_episodes, seeds, policy, one_shot, curves
    [dataset]  tracks, n_episodes, keep_top, controller, policy, noise, max_steps
    [source]   name, description, repository, n_episodes, keep_top
    [search]   strategy, protocol, n_samples, seed, trial_timesteps, sac, transfer, ae

Precedence is flag > file > default.
"""
from __future__ import annotations

import copy
import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .embed.autoencoder import AeArchitecture, AeTrainConfig
from .errors import ConfigError
from .sac.core import SacHyperparams
from .sim.env import EpisodeConfig
from .sim.tracks import BUILTIN_TRACKS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("baseline", "F", "FT")


@dataclass
class EnvSection:
    track: str = "oval"
    track_spec: str | None = None  # TOML track file; overrides `track`
    episode: dict = field(default_factory=dict)


@dataclass
class TransferSection:
    K: int = 100
    theta: float = 0.5
    stochastic_sources: bool = False
    repository: str | None = None
    target_description: str | None = None
    target_task: str | None = None


@dataclass
class EmbedSection:
    autoencoder: str | None = None
    text_dim: int = 128
    text_overrides: str | None = None
    datasets: list = field(default_factory=list)
    train: dict = field(default_factory=dict)  # AeTrainConfig fields; `arch` is a nested table


@dataclass
class EvalSection:
    n_episodes: int = 50
    seeds: list = field(default_factory=lambda: [0])
    policy: str | None = None
    one_shot: bool = False
    curves: list = field(default_factory=list)  # curve CSVs to plot together


@dataclass
class DatasetSection:
    tracks: list = field(default_factory=lambda: ["oval"])
    n_episodes: int = 100
    keep_top: int | None = None  # None keeps every episode (autoencoder corpus)
    controller: str = "pure_pursuit"  # pure_pursuit | random | policy
    policy: str | None = None
    noise: float = 0.3
    max_steps: int | None = None


@dataclass
class SourceSection:
    name: str | None = None
    description: str | None = None
    repository: str | None = None
    n_episodes: int = 1000
    keep_top: int = 1


@dataclass
class SearchSection:
    strategy: str = "grid"  # grid | random
    protocol: str = "two_phase"  # two_phase | joint | ae
    n_samples: int = 4
    seed: int = 0
    trial_timesteps: int | None = None
    sac: dict = field(default_factory=dict)  # name -> list of values
    transfer: dict = field(default_factory=dict)  # K / theta -> list of values
    ae: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 42
    out: str = "runs"
    mode: str = "baseline"
    env: EnvSection = field(default_factory=EnvSection)
    sac: SacHyperparams = field(default_factory=SacHyperparams)
    transfer: TransferSection = field(default_factory=TransferSection)
    embed: EmbedSection = field(default_factory=EmbedSection)
    eval: EvalSection = field(default_factory=EvalSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    source: SourceSection = field(default_factory=SourceSection)
    search: SearchSection = field(default_factory=SearchSection)
    present: frozenset = field(default=frozenset(), compare=False)  # sections given in the file

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("present")
        d["sac"] = self.sac.to_dict()
        return d

    def episode_config(self) -> EpisodeConfig:
        return self.episode_config_for(self.env.track)

    def episode_config_for(self, track: str) -> EpisodeConfig:
        from .sim.env import TRACK_DEFAULTS

        kw = dict(TRACK_DEFAULTS.get(track, {}))
        kw.update(self.env.episode)
        return _build(EpisodeConfig, kw, "env.episode")

    def ae_train_config(self) -> AeTrainConfig:
        kw = dict(self.embed.train)
        if "arch" in kw:
            kw["arch"] = _build(AeArchitecture, dict(kw["arch"]), "embed.train.arch")
        return _build(AeTrainConfig, kw, "embed.train")


_SECTIONS = {
    "env": EnvSection, "sac": SacHyperparams, "transfer": TransferSection, "embed": EmbedSection,
    "eval": EvalSection, "dataset": DatasetSection, "source": SourceSection, "search": SearchSection,
}
_TOP = ("name", "seed", "out", "mode")


def _build(cls, values: dict, where: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {unknown}")
    try:
        return cls(**values)
    except ConfigError as exc:
        raise ConfigError(f"[{where}] {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] invalid value: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    unknown = sorted(set(raw) - set(_TOP) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    kw = {k: raw[k] for k in _TOP if k in raw}
    for name, cls in _SECTIONS.items():
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            kw[name] = _build(cls, raw[name], name)
    cfg = ExperimentConfig(**kw, present=frozenset(k for k in _SECTIONS if k in raw))
    check_values(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def _parse_scalar(text: str):
    """Interpret a flag value as a TOML value, falling back to a plain string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: ExperimentConfig, seed=None, out=None, mode=None, sets=()) -> ExperimentConfig:
    """Flag values win over the file. ``sets`` holds ``section.key=value`` strings."""
    raw = cfg.to_dict()
    present = set(cfg.present)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        parts = dotted.strip().split(".")
        node = raw
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"--set: unknown section {dotted!r}")
            node = node[p]
        node[parts[-1]] = _parse_scalar(value.strip())
        if parts[0] in _SECTIONS:
            present.add(parts[0])
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["out"] = out
    if mode is not None:
        raw["mode"] = mode
    new = config_from_dict(raw)
    new.present = frozenset(present)
    return new


def check_values(cfg: ExperimentConfig) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.env.track_spec is None and cfg.env.track not in BUILTIN_TRACKS:
        raise ConfigError(f"unknown track {cfg.env.track!r}")
    cfg.episode_config()  # validates the episode table
    if cfg.transfer.K < 1:
        raise ConfigError("transfer.K must be >= 1")
    if cfg.eval.n_episodes < 1:
        raise ConfigError("eval.n_episodes must be >= 1")
    if cfg.dataset.controller not in ("pure_pursuit", "random", "policy"):
        raise ConfigError(f"unknown dataset controller {cfg.dataset.controller!r}")
    for t in cfg.dataset.tracks:
        if t not in BUILTIN_TRACKS:
            raise ConfigError(f"unknown dataset track {t!r}")
    s = cfg.search
    if s.strategy not in ("grid", "random"):
        raise ConfigError("search.strategy must be grid or random")
    if s.protocol not in ("two_phase", "joint", "ae"):
        raise ConfigError("search.protocol must be two_phase, joint or ae")
    if s.strategy == "random" and s.n_samples < 1:
        raise ConfigError("search.n_samples must be >= 1")
    for table in (s.sac, s.transfer, s.ae):
        for k, vals in table.items():
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"search value list for {k!r} must be a non-empty list")
    bad = set(s.sac) - {f.name for f in dataclasses.fields(SacHyperparams)}
    bad |= set(s.transfer) - {"K", "theta"}
    bad |= set(s.ae) - {f.name for f in dataclasses.fields(AeTrainConfig)}
    if bad:
        raise ConfigError(f"unknown search keys: {sorted(bad)}")


def _need_file(path, what: str) -> None:
    if path is None:
        raise ConfigError(f"{what} is required")
    if not Path(path).exists():
        raise ConfigError(f"{what} not found: {path}")


def validate_for(cfg: ExperimentConfig, command: str) -> list:
    """Command-specific checks, run before any compute. Returns warnings."""
    warnings = []
    if cfg.env.track_spec is not None:
        _need_file(cfg.env.track_spec, "env.track_spec")
    if cfg.embed.text_overrides is not None:
        _need_file(cfg.embed.text_overrides, "embed.text_overrides")
    if command == "gen-dataset" and cfg.dataset.controller == "policy":
        _need_file(cfg.dataset.policy, "dataset.policy")
    if command == "train-ae":
        if not cfg.embed.datasets:
            raise ConfigError("embed.datasets must list at least one frame dataset")
        for p in cfg.embed.datasets:
            _need_file(p, "embed.datasets entry")
    if command == "train-source" and cfg.embed.autoencoder is not None:
        _need_file(cfg.embed.autoencoder, "embed.autoencoder")
    needs_repo = (command == "train-target" and cfg.mode != "baseline") or (
        command == "search" and cfg.search.protocol != "ae")
    if needs_repo:
        _need_file(cfg.transfer.repository, "transfer.repository")
        _need_file(cfg.embed.autoencoder, "embed.autoencoder")
    if command == "train-target" and cfg.mode == "baseline" and "transfer" in cfg.present:
        warnings.append("baseline mode ignores the [transfer] section")
    if command == "search" and cfg.search.protocol == "ae":
        for p in cfg.embed.datasets:
            _need_file(p, "embed.datasets entry")
        if not cfg.embed.datasets:
            raise ConfigError("embed.datasets must list at least one frame dataset")
    if command == "evaluate":
        if cfg.eval.one_shot:
            _need_file(cfg.transfer.repository, "transfer.repository")
        else:
            _need_file(cfg.eval.policy, "eval.policy")
        for p in cfg.eval.curves:
            _need_file(p, "eval.curves entry")
    return warnings


def build_env(cfg: ExperimentConfig, track: str | None = None):
    from .sim.env import RacingEnv
    from .sim.track import load_track_spec
    from .sim.tracks import get_track_spec

    if track is None and cfg.env.track_spec is not None:
        spec = load_track_spec(cfg.env.track_spec)
    else:
        spec = get_track_spec(track or cfg.env.track)
    return RacingEnv(spec, cfg.episode_config_for(spec.name))


def text_config(cfg: ExperimentConfig):
    from .embed.text import TextEncoderConfig, load_text_overrides

    overrides = load_text_overrides(cfg.embed.text_overrides) if cfg.embed.text_overrides else {}
    return TextEncoderConfig(cfg.embed.text_dim, overrides)
