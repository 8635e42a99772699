"""Command-line entry point: ``fast <command> [--config FILE] [flags]``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, apply_overrides, build_env, load_config, text_config, validate_for
from .errors import ConfigError, FastError
from .transfer import config_hash

log = logging.getLogger("fast_transfer")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_run_dir(cfg: ExperimentConfig) -> Path:
    base = Path(cfg.out) / cfg.name
    stamp = time.strftime("%Y%m%d-%H%M%S")
    path = base / stamp
    n = 1
    while path.exists():
        path = base / f"{stamp}-{n}"
        n += 1
    path.mkdir(parents=True)
    return path


def write_manifest(run_dir: Path, command: str, cfg: ExperimentConfig, outputs: dict, **extra) -> Path:
    raw = cfg.to_dict()
    manifest = {
        "command": command,
        "version": __version__,
        "config": raw,
        "config_hash": config_hash(raw),
        "seed": cfg.seed,
        "outputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in outputs.items()},
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        **extra,
    }
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, default=str))
    return path


def _controller(cfg: ExperimentConfig, rng):
    from .controllers import PurePursuit, RandomPolicy
    from .sac.checkpoint import load_policy

    d = cfg.dataset
    if d.controller == "policy":
        return load_policy(d.policy)
    if d.controller == "random":
        return RandomPolicy(rng)
    return PurePursuit(noise=d.noise, rng=rng)


def cmd_gen_dataset(cfg: ExperimentConfig, run_dir: Path) -> dict:
    from .embed.frames import collect_last_stacks, write_frame_dataset
    from .evaluation import as_controller, episode_seed
    from .repo import generate_source_dataset

    d = cfg.dataset
    (run_dir / "frames").mkdir()
    outputs, counts, all_stacks = {}, {}, []
    for i, track in enumerate(d.tracks):
        env = build_env(cfg, track)
        rng = np.random.default_rng(episode_seed(cfg.seed, i))
        env.seed(int(rng.integers(2**31)))
        ctrl = _controller(cfg, rng)
        if d.keep_top is not None:
            kept = generate_source_dataset(ctrl, env, d.n_episodes, d.keep_top, rng)
            skipped = None  # logged by generate_source_dataset
        else:
            kept, skipped = collect_last_stacks(env, as_controller(ctrl), d.n_episodes, d.max_steps)
        stacks = np.stack([s for s, _ in kept]) if kept else np.zeros((0, 4, env.camera.resolution,
                                                                         env.camera.resolution), np.float32)
        path = run_dir / "frames" / f"{track}.fstk"
        write_frame_dataset(path, stacks)
        outputs[track] = path
        counts[track] = {"stacks": len(kept), "skipped": skipped, "rewards": [float(r) for _, r in kept]}
        all_stacks.append(stacks)
    corpus = run_dir / "corpus.fstk"
    write_frame_dataset(corpus, np.concatenate(all_stacks))
    outputs["corpus"] = corpus
    write_manifest(run_dir, "gen-dataset", cfg, outputs, counts=counts)
    return {"corpus": corpus, "count": int(sum(len(s) for s in all_stacks)), "counts": counts}


def cmd_train_ae(cfg: ExperimentConfig, run_dir: Path) -> dict:
    from .embed.autoencoder import save_autoencoder, train_autoencoder
    from .embed.frames import read_frame_dataset
    from .search import run_ae_search

    data = np.concatenate([read_frame_dataset(p) for p in cfg.embed.datasets])
    if cfg.search.ae:
        res = run_ae_search(data, cfg, run_dir)
        if res["checkpoint"] is None:
            raise FastError("every autoencoder trial failed")
        write_manifest(run_dir, "train-ae", cfg, {"autoencoder": res["checkpoint"]},
                       leaderboard=[{k: r.get(k) for k in ("trial", "status", "score", "params")}
                                    for r in res["leaderboard"]])
        return {"checkpoint": res["checkpoint"], "leaderboard": res["leaderboard"]}
    model, curves = train_autoencoder(data, cfg.ae_train_config(), seed=cfg.seed)
    ckpt = run_dir / "autoencoder.ckpt"
    save_autoencoder(model, ckpt, {"val_mse": curves["val_mse"], "test_mse": curves["test_mse"]})
    (run_dir / "ae_curves.json").write_text(json.dumps(curves, indent=1))
    write_manifest(run_dir, "train-ae", cfg, {"autoencoder": ckpt}, val_mse=curves["val_mse"],
                   test_mse=curves["test_mse"])
    return {"checkpoint": ckpt, "curves": curves}


def cmd_train_source(cfg: ExperimentConfig, run_dir: Path) -> dict:
    from .embed.autoencoder import load_autoencoder
    from .embed.text import TASK_DESCRIPTIONS, TRACK_TASKS
    from .evaluation import export_curves
    from .repo import (RepositoryIndex, add_source_task, generate_source_dataset, load_repository,
                       precompute_representations, save_repository)
    from .sac.checkpoint import save_policy
    from .sac.train import train_baseline

    env = build_env(cfg)
    result = train_baseline(env, cfg.sac, cfg.seed)
    name = cfg.source.name or env.track.name
    policy = result.policy.frozen_copy(id=name)
    ckpt = run_dir / "policy.pol"
    save_policy(policy, ckpt, cfg.sac.to_dict())
    curve = run_dir / "curve.csv"
    export_curves(result.curve, curve)
    outputs = {"policy": ckpt, "curve": curve}
    extra = {"policy_checksum": policy.checksum()}
    if cfg.source.repository:
        repo_path = Path(cfg.source.repository)
        index = load_repository(repo_path) if (repo_path / "manifest.json").exists() else \
            RepositoryIndex(text_config=text_config(cfg))
        description = cfg.source.description or TASK_DESCRIPTIONS.get(
            name, TASK_DESCRIPTIONS[TRACK_TASKS.get(env.track.name, "racetrack")])
        kept = generate_source_dataset(policy, env, cfg.source.n_episodes, cfg.source.keep_top,
                                       np.random.default_rng(cfg.seed))
        add_source_task(index, name, description, policy, [s for s, _ in kept], [r for _, r in kept])
        if cfg.embed.autoencoder is not None:
            ae = load_autoencoder(cfg.embed.autoencoder)
            index.autoencoder = str(cfg.embed.autoencoder)
            for mode in ("F", "FT"):
                precompute_representations(index, ae, index.text_config, mode)
        save_repository(index, repo_path)
        outputs["repository_manifest"] = repo_path / "manifest.json"
    write_manifest(run_dir, "train-source", cfg, outputs, **extra)
    return {"policy": ckpt, "result": result}


def cmd_train_target(cfg: ExperimentConfig, run_dir: Path) -> dict:
    from .evaluation import export_curves
    from .repo import repository_checksum
    from .sac.checkpoint import save_policy
    from .search import execute
    from .transfer import usage_percentages

    result = execute(cfg)
    ckpt = run_dir / "policy.pol"
    save_policy(result.policy, ckpt, cfg.sac.to_dict())
    curve = run_dir / "curve.csv"
    export_curves(result.curve, curve)
    usage = {}
    outputs = {"policy": ckpt, "curve": curve}
    if result.usage is not None:
        usage = usage_percentages(result.usage) if len(result.usage) else {}
        upath = run_dir / "usage.json"
        upath.write_text(json.dumps({"percentages": usage, **result.usage.to_dict()}))
        outputs["usage"] = upath
    repo_sum = repository_checksum(cfg.transfer.repository) if cfg.mode != "baseline" else None
    write_manifest(run_dir, "train-target", cfg, outputs, mode=cfg.mode, usage=usage,
                   repository_checksum=repo_sum, policy_checksum=result.learner.checksum())
    return {"policy": ckpt, "result": result, "usage": usage}


def cmd_evaluate(cfg: ExperimentConfig, run_dir: Path) -> dict:
    from .evaluation import evaluate, export_report_csv, one_shot_eval, plot_curves, read_curves, report_to_dict
    from .repo import load_repository
    from .sac.checkpoint import load_policy

    env = build_env(cfg)
    e = cfg.eval
    if e.one_shot:
        reports = list(one_shot_eval(load_repository(cfg.transfer.repository), env, e.n_episodes,
                                     e.seeds, random_seed=cfg.seed).values())
    else:
        reports = [evaluate(load_policy(e.policy), env, e.n_episodes, e.seeds, label=Path(e.policy).stem)]
    csv_path = run_dir / "report.csv"
    export_report_csv(reports, csv_path)
    outputs = {"report": csv_path}
    if e.curves:
        png = run_dir / "curves.png"
        plot_curves({Path(p).parent.name or p: read_curves(p) for p in e.curves}, png)
        outputs["plot"] = png
    (run_dir / "report.json").write_text(json.dumps([report_to_dict(r) for r in reports], indent=1))
    write_manifest(run_dir, "evaluate", cfg, outputs)
    return {"reports": reports, "csv": csv_path}


def cmd_search(cfg: ExperimentConfig, run_dir: Path) -> dict:
    from .embed.frames import read_frame_dataset
    from .search import run_ae_search, run_search

    if cfg.search.protocol == "ae":
        data = np.concatenate([read_frame_dataset(p) for p in cfg.embed.datasets])
        res = run_ae_search(data, cfg, run_dir)
    else:
        res = run_search(cfg, run_dir)
    write_manifest(run_dir, "search", cfg, {})
    return res


COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "train-ae": cmd_train_ae,
    "train-source": cmd_train_source,
    "train-target": cmd_train_target,
    "evaluate": cmd_evaluate,
    "search": cmd_search,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--seed", type=int, help="run seed (default 42)")
    common.add_argument("--out", help="output root (default runs/)")
    common.add_argument("--mode", choices=("baseline", "F", "FT"), help="target training mode")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="fast", description="Similarity-gated policy transfer for SAC.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(cfg, seed=args.seed, out=args.out, mode=args.mode, sets=args.set)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        for w in validate_for(cfg, args.command):
            log.warning(w)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_dir = make_run_dir(cfg)
        COMMANDS[args.command](cfg, run_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FastError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
