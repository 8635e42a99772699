"""Desk-scale experiments shared by the acceptance suite and ``scripts/``.

Each function returns plain dicts so results can be dumped to JSON.
"""
from __future__ import annotations

import logging
import time

import numpy as np

from .controllers import PurePursuit
from .embed.autoencoder import AeTrainConfig, train_autoencoder
from .embed.frames import collect_last_stacks
from .evaluation import evaluate, first_crossing
from .repo import RepositoryIndex, add_source_task, generate_source_dataset, precompute_representations
from .sac.core import SacHyperparams
from .sac.train import train_baseline
from .sim import make_env
from .transfer import TransferConfig, run_fast_training, usage_percentages

log = logging.getLogger(__name__)

AE_CORPUS_TRACKS = ("oval", "mixed", "circle", "long_complex")

# Small networks keep a 200k-step run at a few minutes on one core.
DESK_SAC = SacHyperparams(batch_size=128, hidden=(64, 64), learning_starts=1000)


def build_ae_corpus(tracks=AE_CORPUS_TRACKS, per_track: int = 150, seed: int = 0,
                    max_duration: float = 10.0, noise: float = 0.3) -> np.ndarray:
    """Last-4-frame stacks of short noisy pure-pursuit episodes, one per episode."""
    stacks = []
    for i, track in enumerate(tracks):
        env = make_env(track, seed=seed * 1000 + i, max_duration=max_duration)
        ctrl = PurePursuit(noise=noise, rng=np.random.default_rng([seed, i]))
        kept, _ = collect_last_stacks(env, ctrl, per_track)
        stacks += [s for s, _ in kept]
    return np.stack(stacks)


def train_desk_autoencoder(corpus, seed: int = 0, max_epochs: int = 40):
    cfg = AeTrainConfig(max_epochs=max_epochs, patience=5)
    return train_autoencoder(corpus, cfg, seed=seed)


def lane_centering_oracle(n_episodes: int = 10, seeds=(0,)) -> dict:
    """Pure pursuit at top speed: the reference return for SAC competence."""
    rep = evaluate(PurePursuit(), make_env("lane_centering"), n_episodes, seeds, "pure_pursuit")
    return {"mean": rep.mean, "std": rep.std}


def sac_competence(seeds=(0, 1, 2), timesteps: int = 30_000, n_eval: int = 10, oracle=None) -> dict:
    """Baseline SAC on ``lane_centering``; ratio of its evaluation return to the oracle's."""
    oracle = oracle or lane_centering_oracle(n_eval)
    hp = SacHyperparams(**{**DESK_SAC.to_dict(), "total_timesteps": timesteps})
    runs = []
    for seed in seeds:
        t0 = time.time()
        res = train_baseline(make_env("lane_centering"), hp, seed=seed)
        rep = evaluate(res.policy, make_env("lane_centering"), n_eval, seeds=[100 + seed])
        runs.append({"seed": seed, "eval_AR": rep.mean["AR"], "ratio": rep.mean["AR"] / oracle["mean"]["AR"],
                     "seconds": time.time() - t0})
        log.info("competence seed %d: %s", seed, runs[-1])
    return {"oracle_AR": oracle["mean"]["AR"], "runs": runs,
            "median_ratio": float(np.median([r["ratio"] for r in runs])), "timesteps": timesteps}


def build_source_repository(ae, track: str = "oval_alt", timesteps: int = 200_000, seed: int = 1000):
    """Train one source policy on ``track`` (single car) and register it with F
    and FT representations. Returns ``(index, train_result)``."""
    from .embed.text import description_for_track

    env_kw = {"n_vehicles": 1}
    hp = SacHyperparams(**{**DESK_SAC.to_dict(), "total_timesteps": timesteps})
    res = train_baseline(make_env(track, **env_kw), hp, seed=seed)
    policy = res.policy.frozen_copy(id=track)
    kept = generate_source_dataset(policy, make_env(track, **env_kw), n_episodes=5, keep_top=1,
                                   rng=np.random.default_rng(seed))
    index = add_source_task(RepositoryIndex(), track, description_for_track(track), policy,
                            [s for s, _ in kept], [r for _, r in kept])
    for mode in ("F", "FT"):
        precompute_representations(index, ae, mode=mode)
    log.info("source %s: final training mean %.1f", track, _final_mean(res.curve, 10))
    return index, res


def _final_mean(curve, window: int) -> float:
    return float(np.mean([r for _, r in curve[-window:]]))


def transfer_speedup(ae, seeds=(0, 1, 2, 3, 4), baseline_steps: int = 200_000, fast_steps: int = 100_000,
                     source_steps: int = 200_000, window: int = 10, K: int = 100, theta: float = 0.5,
                     target: str = "oval", source: str = "oval_alt", n_eval: int = 5, index=None,
                     stop_at_threshold: bool = True) -> dict:
    """Steps FAST needs to match the final baseline return, with a source
    pre-trained on a near-identical track.

    ``index`` defaults to a fresh repository from :func:`build_source_repository`.
    The threshold is the median over seeds of the baseline's mean episodic
    return over its last ``window`` training episodes. A FAST run reaches it
    at the first timestep where its own trailing-``window`` mean does; with
    ``stop_at_threshold`` the run ends there instead of using the whole budget.
    """
    env_kw = {"n_vehicles": 1}
    base_hp = SacHyperparams(**{**DESK_SAC.to_dict(), "total_timesteps": baseline_steps})
    fast_hp = SacHyperparams(**{**DESK_SAC.to_dict(), "total_timesteps": fast_steps})
    if index is None:
        index, _ = build_source_repository(ae, source, source_steps)
    policies = [rec.policy for rec in index.records]
    before = [p.checksum() for p in policies]
    out = {"sources": {rec.name: evaluate(rec.policy, make_env(target, **env_kw), n_eval, seeds=[7]).mean
                       for rec in index.records}}

    baselines = []
    for seed in seeds:
        t0 = time.time()
        res = train_baseline(make_env(target, **env_kw), base_hp, seed=seed)
        baselines.append({"seed": seed, "final_mean": _final_mean(res.curve, window),
                          "crossing_self": None, "curve": res.curve, "seconds": time.time() - t0})
        log.info("baseline seed %d final %.1f (%.0fs)", seed, baselines[-1]["final_mean"],
                 baselines[-1]["seconds"])
    threshold = float(np.median([b["final_mean"] for b in baselines]))
    for b in baselines:
        b["crossing_self"] = first_crossing(b["curve"], threshold, window)

    fast = []
    tcfg = TransferConfig(K=K, theta=theta, mode="F")

    def reached(result):
        return first_crossing(result.curve, threshold, window) is not None

    for seed in seeds:
        t0 = time.time()
        res = run_fast_training(make_env(target, **env_kw), index, fast_hp, tcfg, ae, seed=seed,
                                stop=reached if stop_at_threshold else None)
        crossing = first_crossing(res.curve, threshold, window)
        usage = usage_percentages(res.usage)
        target_eval = evaluate(res.policy, make_env(target, **env_kw), n_eval, seeds=[7]).mean
        fast.append({"seed": seed, "crossing": crossing, "steps_run": len(res.usage), "usage": usage,
                     "final_mean": _final_mean(res.curve, window), "target_policy_eval": target_eval,
                     "curve": res.curve, "seconds": time.time() - t0})
        log.info("fast seed %d crossing %s usage %s (%.0fs)", seed, crossing, usage, fast[-1]["seconds"])
    steps = [f["crossing"] if f["crossing"] is not None else float("inf") for f in fast]
    median_steps = float(np.median(steps))
    return {
        "threshold": threshold,
        "baseline_steps": baseline_steps,
        "fast_budget": fast_steps,
        "baselines": baselines,
        "fast": fast,
        "median_crossing": median_steps,
        "fraction_of_baseline": median_steps / baseline_steps,
        "min_usage": min(sum(f["usage"].values()) for f in fast),
        "sources_unchanged": [p.checksum() for p in policies] == before,
        **out,
    }
