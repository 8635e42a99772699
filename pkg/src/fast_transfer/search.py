"""Hyperparameter search: grid/random expansion, trials, leaderboards.

Every trial writes a manifest holding the fully resolved configuration,
so :func:`rerun_from_manifest` can repeat it bit for bit.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, build_env, config_from_dict, text_config
from .errors import FastError
from .evaluation import evaluate
from .transfer import config_hash

log = logging.getLogger(__name__)


def expand_grid(space: dict) -> list:
    """Cartesian product of ``{name: [values]}`` in sorted-key order."""
    if not space:
        return [{}]
    keys = sorted(space)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(space[k] for k in keys))]


def sample_random(space: dict, n_samples: int, seed: int) -> list:
    """``n_samples`` independent draws, one value per name, from ``seed``."""
    rng = np.random.default_rng(seed)
    keys = sorted(space)
    out = []
    for _ in range(n_samples):
        pick = {}
        for k in keys:
            v = space[k][int(rng.integers(len(space[k])))]
            pick[k] = v.item() if isinstance(v, np.generic) else v
        out.append(pick)
    return out


def candidates(space: dict, strategy: str, n_samples: int, seed: int) -> list:
    if strategy == "grid":
        return expand_grid(space)
    return sample_random(space, n_samples, seed) if space else [{}]


def _trial_config(base: dict, sac: dict, transfer: dict, mode: str, timesteps) -> dict:
    raw = json.loads(json.dumps(base))
    raw["sac"].update(sac)
    raw["transfer"].update(transfer)
    raw["mode"] = mode
    if timesteps is not None:
        raw["sac"]["total_timesteps"] = int(timesteps)
    return raw


def execute(cfg: ExperimentConfig):
    """Train as ``cfg`` says; return the :class:`TrainResult`."""
    from .embed.autoencoder import load_autoencoder
    from .repo import load_repository
    from .sac.train import train_baseline
    from .transfer import TransferConfig, run_fast_training

    env = build_env(cfg)
    if cfg.mode == "baseline":
        return train_baseline(env, cfg.sac, cfg.seed)
    t = cfg.transfer
    index = load_repository(t.repository)
    ae = load_autoencoder(cfg.embed.autoencoder)
    tcfg = TransferConfig(t.K, t.theta, cfg.mode, t.stochastic_sources)
    description = t.target_description
    if description is None and cfg.mode == "FT" and t.target_task is None:
        from .embed.text import description_for_track

        description = description_for_track(env.track.name)
    return run_fast_training(env, index, cfg.sac, tcfg, ae, text_config(cfg), description,
                             cfg.seed, target_task=t.target_task)


def run_trial(raw: dict, trial_dir, trial_id: int = 0, phase: str = "") -> dict:
    """Train and evaluate one configuration; the score is mean evaluation AR."""
    from .transfer import usage_percentages

    trial_dir = Path(trial_dir)
    trial_dir.mkdir(parents=True, exist_ok=True)
    record = {"trial": trial_id, "phase": phase, "config": raw, "config_hash": config_hash(raw)}
    try:
        cfg = config_from_dict(raw)
        result = execute(cfg)
        report = evaluate(result.policy, build_env(cfg), cfg.eval.n_episodes, cfg.eval.seeds, f"trial{trial_id}")
        record.update(status="ok", score=report.mean["AR"], metrics=report.mean, std=report.std,
                      policy_checksum=result.learner.checksum(),
                      usage=usage_percentages(result.usage) if result.usage is not None and len(result.usage) else {})
    except FastError as exc:
        log.warning("trial %d failed: %s", trial_id, exc)
        record.update(status="failed", score=None, error=f"{type(exc).__name__}: {exc}")
    (trial_dir / "manifest.json").write_text(json.dumps(record, indent=1, default=str))
    return record


def leaderboard(records, key: str = "score", descending: bool = True) -> list:
    """Successful trials ranked by ``key`` (ties keep trial order), failures last."""
    ok = [r for r in records if r.get("status") == "ok"]
    bad = [r for r in records if r.get("status") != "ok"]
    ok.sort(key=lambda r: (-r[key] if descending else r[key], r["trial"]))
    return ok + bad


def write_leaderboard(board, path, params_key: str = "params") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "trial", "phase", "status", "score", "params"])
        for rank, r in enumerate(board, 1):
            w.writerow([rank, r["trial"], r.get("phase", ""), r["status"],
                        "" if r.get("score") is None else repr(float(r["score"])),
                        json.dumps(r.get(params_key, {}), sort_keys=True)])


def run_search(cfg: ExperimentConfig, out_dir) -> dict:
    """Two-phase (SAC first, then K/theta with SAC fixed) or joint search."""
    out = Path(out_dir)
    s = cfg.search
    base = cfg.to_dict()
    fast_mode = cfg.mode if cfg.mode in ("F", "FT") else "F"
    records = []
    phases = {}

    def run_batch(name, combos):
        batch = []
        for sac, tr, mode in combos:
            tid = len(records)
            raw = _trial_config(base, sac, tr, mode, s.trial_timesteps)
            rec = run_trial(raw, out / "trials" / f"{tid:03d}", tid, name)
            rec["params"] = {**{f"sac.{k}": v for k, v in sac.items()},
                             **{f"transfer.{k}": v for k, v in tr.items()}}
            records.append(rec)
            batch.append(rec)
        board = leaderboard(batch)
        phases[name] = board
        write_leaderboard(board, out / f"leaderboard_{name}.csv")
        return board

    if s.protocol == "joint":
        sac_c = candidates(s.sac, s.strategy, s.n_samples, s.seed)
        tr_c = candidates(s.transfer, s.strategy, s.n_samples, s.seed + 1)
        if s.strategy == "random":
            combos = [(a, b, fast_mode) for a, b in zip(sac_c, tr_c)]
        else:
            combos = [(a, b, fast_mode) for a in sac_c for b in tr_c]
        final = run_batch("joint", combos)
    else:
        p1 = run_batch("phase1", [(c, {}, "baseline") for c in candidates(s.sac, s.strategy, s.n_samples, s.seed)])
        if not p1 or p1[0]["status"] != "ok":
            raise FastError("phase 1 produced no successful trial")
        best_sac = {k.split(".", 1)[1]: v for k, v in p1[0]["params"].items() if k.startswith("sac.")}
        tr_c = candidates(s.transfer, s.strategy, s.n_samples, s.seed + 1)
        final = run_batch("phase2", [(best_sac, c, fast_mode) for c in tr_c])
    winner = final[0] if final and final[0]["status"] == "ok" else None
    best = None
    if winner is not None:
        best = {"trial": winner["trial"], "score": winner["score"], "params": winner["params"],
                "manifest": str(out / "trials" / f"{winner['trial']:03d}" / "manifest.json")}
    summary = {"protocol": s.protocol, "strategy": s.strategy, "n_trials": len(records),
               "phases": {k: [r["trial"] for r in v] for k, v in phases.items()}, "winner": best}
    (out / "search.json").write_text(json.dumps(summary, indent=1, default=str))
    return {"records": records, "phases": phases, "winner": winner, "summary": summary}


def rerun_from_manifest(manifest_path, out_dir) -> dict:
    rec = json.loads(Path(manifest_path).read_text())
    return run_trial(rec["config"], out_dir, rec["trial"], rec.get("phase", ""))


# -- autoencoder search ------------------------------------------------------

def run_ae_search(dataset, cfg: ExperimentConfig, out_dir) -> dict:
    """Train one autoencoder per candidate; leaderboard ascending by validation MSE."""
    import dataclasses

    from .embed.autoencoder import save_autoencoder, train_autoencoder
    from .errors import DivergedTraining

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = cfg.search
    base = cfg.ae_train_config()
    records = []
    best_model = None
    for tid, params in enumerate(candidates(s.ae, s.strategy, s.n_samples, s.seed)):
        rec = {"trial": tid, "phase": "ae", "params": params}
        try:
            tc = dataclasses.replace(base, **params)
            model, curves = train_autoencoder(dataset, tc, seed=cfg.seed)
            rec.update(status="ok", score=curves["val_mse"], test_mse=curves["test_mse"], curves=curves)
            if best_model is None or curves["val_mse"] < best_model[0]:
                best_model = (curves["val_mse"], model, tid)
        except (DivergedTraining, FastError) as exc:
            rec.update(status="failed", score=None, error=f"{type(exc).__name__}: {exc}")
        records.append(rec)
    board = leaderboard(records, descending=False)
    write_leaderboard(board, out / "leaderboard_ae.csv")
    ckpt = None
    if best_model is not None:
        ckpt = out / "autoencoder.ckpt"
        save_autoencoder(best_model[1], ckpt, {"trial": best_model[2]})
    (out / "ae_trials.json").write_text(json.dumps(records, indent=1, default=str))
    return {"records": records, "leaderboard": board, "checkpoint": ckpt}
