"""Acceptance criteria 1-11. Each test records one PASS/FAIL line.

Slow: the full module trains SAC for roughly 1.6M environment steps.
"""
import json
import math
import time

import numpy as np
import pytest

from fast_transfer.config import config_from_dict
from fast_transfer.controllers import CenterlineFollower
from fast_transfer.embed import cosine_similarity, read_frame_dataset, save_autoencoder, write_frame_dataset
from fast_transfer.errors import FrozenPolicy
from fast_transfer.evaluation import (EpisodeMetrics, aggregate, export_curves, export_report_csv, read_curves,
                                      read_report_csv, run_episode)
from fast_transfer.experiments import (DESK_SAC, build_ae_corpus, build_source_repository, sac_competence,
                                       train_desk_autoencoder, transfer_speedup)
from fast_transfer.repo import RepositoryIndex, load_repository, repositories_equal, save_repository
from fast_transfer.sac import Policy, SacHyperparams, SacLearner, load_policy, sac_update, save_policy, train_baseline
from fast_transfer.search import rerun_from_manifest, run_search
from fast_transfer.sim import compute_reward, make_env
from fast_transfer.transfer import TransferConfig, UsageLog, run_fast_training, usage_percentages

from helpers import ae_gradient_errors, small_repository

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


@pytest.fixture(scope="session")
def ae_bundle():
    t0 = time.time()
    corpus = build_ae_corpus()
    model, curves = train_desk_autoencoder(corpus)
    return {"corpus": corpus, "model": model, "curves": curves, "seconds": time.time() - t0}


@pytest.fixture(scope="session")
def source_index(ae_bundle):
    index, _ = build_source_repository(ae_bundle["model"])
    return index


@pytest.fixture(scope="session")
def transfer_result(ae_bundle, source_index):
    t0 = time.time()
    res = transfer_speedup(ae_bundle["model"], index=source_index)
    res["seconds"] = time.time() - t0
    return res


# 1 --------------------------------------------------------------------------

def test_c01_similarity_oracle(criterion):
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst = 0.0
    props = True
    for _ in range(1000):
        d = int(rng.integers(2, 513))
        u, v = rng.standard_normal(d), rng.standard_normal(d)
        dot = math.fsum(a * b for a, b in zip(u, v))
        ref = dot / (math.sqrt(math.fsum(a * a for a in u)) * math.sqrt(math.fsum(b * b for b in v)))
        got = cosine_similarity(u, v)
        worst = max(worst, abs(got - ref))
        scale = float(rng.uniform(1e-3, 1e3))
        props &= abs(cosine_similarity(scale * u, v) - got) < 1e-9
        props &= abs(cosine_similarity(v, u) - got) < 1e-12
    elapsed = time.time() - t0
    criterion(1, worst <= 1e-9 and props and elapsed < 1.0,
              f"max abs error {worst:.2e}, scale/symmetry ok={props}, {elapsed:.2f}s")


# 2 --------------------------------------------------------------------------

def test_c02_baseline_equivalence(criterion, ae_bundle, source_index):
    t0 = time.time()
    hp = SacHyperparams(batch_size=64, hidden=(32, 32), learning_starts=1000, total_timesteps=50_000)

    def env():
        return make_env("oval", n_vehicles=1)

    base = train_baseline(env(), hp, seed=5, record_trajectory=True)
    checks = {}
    for label, index, theta in (("theta=1.1", source_index, 1.1), ("empty", RepositoryIndex(), 0.5)):
        fast = run_fast_training(env(), index, hp, TransferConfig(100, theta, "F"), ae_bundle["model"], seed=5,
                                 record_trajectory=True)
        checks[label] = (np.array_equal(np.stack(base.actions), np.stack(fast.actions))
                         and base.rewards == fast.rewards
                         and base.learner.checksum() == fast.learner.checksum()
                         and usage_percentages(fast.usage) == {})
    elapsed = time.time() - t0
    criterion(2, all(checks.values()) and elapsed < 300,
              f"{hp.total_timesteps} steps, identical={checks}, {elapsed:.0f}s")


# 3 --------------------------------------------------------------------------

def test_c03_autoencoder(criterion, ae_bundle):
    corpus, curves = ae_bundle["corpus"], ae_bundle["curves"]
    grad = max(ae_gradient_errors().values())
    ok = (len(corpus) >= 500 and corpus.shape[1:] == (4, 64, 64) and curves["test_mse"] <= 1e-2
          and grad < 1e-3 and ae_bundle["seconds"] < 900)
    criterion(3, ok, f"{len(corpus)} stacks from 4 tracks, held-out MSE {curves['test_mse']:.3e} "
                     f"(val {curves['val_mse']:.3e}), grad rel err {grad:.1e}, {ae_bundle['seconds']:.0f}s")


# 4 --------------------------------------------------------------------------

def test_c04_sac_competence(criterion):
    t0 = time.time()
    res = sac_competence(seeds=(0, 1, 2), timesteps=30_000)
    elapsed = time.time() - t0
    ratios = [round(r["ratio"], 3) for r in res["runs"]]
    criterion(4, res["median_ratio"] >= 0.8 and res["timesteps"] <= 200_000 and elapsed < 1800,
              f"oracle AR {res['oracle_AR']:.1f}, SAC/oracle ratios {ratios} at {res['timesteps']} steps, "
              f"median {res['median_ratio']:.3f}, {elapsed:.0f}s")


# 5 --------------------------------------------------------------------------

def test_c05_positive_transfer(criterion, transfer_result):
    r = transfer_result
    crossings = [f["crossing"] for f in r["fast"]]
    ok = (r["fraction_of_baseline"] <= 0.5 and r["min_usage"] > 0.10 and r["seconds"] < 3600)
    criterion(5, ok, f"baseline {r['baseline_steps']}-step return {r['threshold']:.1f}; FAST crossings {crossings}, "
                     f"median {r['median_crossing']:.0f} = {r['fraction_of_baseline']:.2f} of baseline; "
                     f"min source usage {r['min_usage']:.2f}; {r['seconds']:.0f}s")


# 6 --------------------------------------------------------------------------

def test_c06_reward_examples(criterion):
    cases = [
        (compute_reward(0.0, 0.0, 20.0, 0, 1, 1, True), 0.0),
        (compute_reward(20.0, 0.0, 20.0, 0, 1, 1, True), 1.0),
        (compute_reward(20.0, 0.0, 20.0, 0, 1, 1, False), -1.0),
        (compute_reward(0.0, 0.0, 20.0, -1, 1, 1, True), -1.0),
    ]
    flip = compute_reward(13.0, 0.0, 20.0, 0, 1, 1, False) == -compute_reward(13.0, 0.0, 20.0, 0, 1, 1, True)
    criterion(6, all(got == want for got, want in cases) and flip,
              f"values {[got for got, _ in cases]}, sign flip ok={flip}")


# 7 --------------------------------------------------------------------------

def test_c07_metrics_oracle(criterion):
    env = make_env("circle", n_vehicles=1, init_speed=10.0, random_spawn=False)
    m = run_episode(CenterlineFollower(10.0), env, seed=0)
    want = {"AD": 1500.0, "AL": 1500.0 / (2 * math.pi * 50), "AS": 10.0}
    got = {"AD": m.distance, "AL": m.laps, "AS": m.mean_speed}
    rel = {k: abs(got[k] - want[k]) / want[k] for k in want}
    fractional = m.laps != int(m.laps)
    rep = aggregate("circle", [m])
    criterion(7, max(rel.values()) <= 0.02 and fractional and rep.mean["AL"] == m.laps,
              "AD {AD:.1f} AL {AL:.4f} AS {AS:.2f}; ".format(**got)
              + f"max rel err {max(rel.values()):.2%}; AL fractional={fractional}")


# 8 --------------------------------------------------------------------------

def test_c08_usage_accounting(criterion, transfer_result, ae_bundle, source_index):
    sums = [sum(f["usage"].values()) for f in transfer_result["fast"]]
    hp = SacHyperparams(batch_size=32, hidden=(16, 16), learning_starts=200, total_timesteps=2000)
    baseline_like = run_fast_training(make_env("oval", n_vehicles=1), source_index, hp,
                                      TransferConfig(100, 1.1, "F"), ae_bundle["model"], seed=0)
    zero = usage_percentages(baseline_like.usage) == {}
    log = UsageLog(["oval_alt", "mixed"])
    # oval_alt acts for 250 + 120 steps, mixed for 130, the target for the rest
    for who, n in [(-1, 100), (0, 250), (-1, 300), (1, 130), (0, 120), (-1, 100)]:
        log.acted.extend([who] * n)
    hand = usage_percentages(log) == {"oval_alt": 0.37, "mixed": 0.13} and len(log) == 1000
    criterion(8, all(s <= 1.0 for s in sums) and zero and hand,
              f"FAST usage sums {[round(s, 3) for s in sums]}, baseline-equivalent run 0%={zero}, "
              f"hand-counted 1000-step log exact={hand}")


# 9 --------------------------------------------------------------------------

def test_c09_source_immutability(criterion, transfer_result, source_index, ae_bundle):
    before = [r.policy.checksum() for r in source_index.records]
    hp = SacHyperparams(batch_size=32, hidden=(16, 16), learning_starts=200, total_timesteps=2000)
    run_fast_training(make_env("oval", n_vehicles=1), source_index, hp, TransferConfig(100, -1.0, "FT"),
                      ae_bundle["model"], target_task="indiana", seed=1)
    unchanged = [r.policy.checksum() for r in source_index.records] == before
    rejected = 0
    for rec in source_index.records:
        learner = SacLearner.create(rec.policy.obs_dim, 2, SacHyperparams(hidden=(64, 64), batch_size=4))
        learner.policy = rec.policy
        obs = np.zeros((4, rec.policy.obs_dim), np.float32)
        try:
            sac_update(learner, (obs, np.zeros((4, 2), np.float32), np.zeros(4, np.float32), obs,
                                 np.zeros(4, np.float32)))
        except FrozenPolicy:
            rejected += 1
        try:
            rec.policy.actor.params[0] = 0.0
        except ValueError:
            rejected += 1
    ok = unchanged and transfer_result["sources_unchanged"] and rejected == 2 * len(source_index.records)
    criterion(9, ok, f"hashes unchanged across FAST runs={unchanged and transfer_result['sources_unchanged']}, "
                     f"{rejected} update attempts rejected")


# 10 -------------------------------------------------------------------------

def test_c10_persistence(criterion, tmp_path, tiny_ae):
    rng = np.random.default_rng(10)
    results = {}
    repo_ok = True
    for seed in range(3):
        idx = small_repository(int(rng.integers(1, 4)), tiny_ae, seed=seed)
        save_repository(idx, tmp_path / f"repo{seed}")
        repo_ok &= repositories_equal(idx, load_repository(tmp_path / f"repo{seed}"))
    results["repository"] = repo_ok
    pol_ok = True
    for seed in range(3):
        pol = Policy.create(45, 2, tuple(int(h) for h in rng.integers(4, 64, size=2)), rng=rng)
        save_policy(pol, tmp_path / f"p{seed}.pol", {"seed": seed})
        back = load_policy(tmp_path / f"p{seed}.pol")
        pol_ok &= back.checksum() == pol.checksum() and back.actor.sizes == pol.actor.sizes
    results["policy"] = pol_ok
    frames = rng.random((int(rng.integers(1, 9)), 4, 16, 16)).astype(np.float32)
    write_frame_dataset(tmp_path / "f.fstk", frames)
    results["frames"] = np.array_equal(read_frame_dataset(tmp_path / "f.fstk"), frames)
    curve = [(int(t), float(r)) for t, r in zip(np.cumsum(rng.integers(1, 800, 50)), rng.normal(0, 300, 50))]
    export_curves(curve, tmp_path / "c.csv")
    eps = [EpisodeMetrics(*rng.uniform(0, 1000, 4)) for _ in range(7)]
    rep = aggregate("fast", eps)
    export_report_csv([rep], tmp_path / "r.csv", usage={"fast": {"oval_alt": 0.42}})
    row = read_report_csv(tmp_path / "r.csv")[0]
    results["csv"] = (read_curves(tmp_path / "c.csv") == curve and row["mean"] == rep.mean
                      and row["std"] == rep.std and row["usage"] == {"oval_alt": 0.42})
    criterion(10, all(results.values()), f"round-trips {results}")


# 11 -------------------------------------------------------------------------

def test_c11_two_phase_search(criterion, tmp_path, ae_bundle, source_index):
    t0 = time.time()
    save_repository(source_index, tmp_path / "repo")
    save_autoencoder(ae_bundle["model"], tmp_path / "ae.ckpt")
    raw = {
        "name": "search", "seed": 3, "mode": "F",
        "env": {"track": "oval", "episode": {"n_vehicles": 1}},
        "sac": DESK_SAC.to_dict(),
        "transfer": {"repository": str(tmp_path / "repo")},
        "embed": {"autoencoder": str(tmp_path / "ae.ckpt")},
        "eval": {"n_episodes": 3},
        "search": {"protocol": "two_phase", "strategy": "grid", "trial_timesteps": 10_000,
                   "sac": {"learning_rate": [3e-4, 1e-3], "batch_size": [64, 128]},
                   "transfer": {"K": [50, 100], "theta": [0.5, 0.9]}},
    }
    out = run_search(config_from_dict(raw), tmp_path / "search")
    sized = {k: len(v) for k, v in out["phases"].items()} == {"phase1": 4, "phase2": 4}
    ordered = all(
        [r["score"] for r in board] == sorted((r["score"] for r in board), reverse=True)
        for board in out["phases"].values())
    csv_rows = (tmp_path / "search" / "leaderboard_phase2.csv").read_text().splitlines()
    win = out["summary"]["winner"]
    again = rerun_from_manifest(win["manifest"], tmp_path / "rerun")
    orig = json.loads(open(win["manifest"]).read())
    reproducible = again["policy_checksum"] == orig["policy_checksum"] and again["score"] == orig["score"]
    elapsed = time.time() - t0
    ok = sized and ordered and len(csv_rows) == 5 and reproducible and elapsed < 1200
    criterion(11, ok, f"leaderboards {{phase1: 4, phase2: 4}} sized={sized} sorted={ordered}; winner trial "
                      f"{win['trial']} score {win['score']:.1f} {win['params']} reruns identically={reproducible}; "
                      f"{elapsed:.0f}s")
