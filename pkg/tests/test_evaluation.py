import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fast_transfer.controllers import CenterlineFollower, PurePursuit, Stationary
from fast_transfer.errors import IoFailure, VersionMismatch
from fast_transfer.evaluation import (EpisodeMetrics, adapt_observation, aggregate, evaluate, export_curves,
                                      export_report_csv, first_crossing, one_shot_eval, plot_curves,
                                      read_curves, read_report_csv, run_episode, smooth)
from fast_transfer.repo import RepositoryIndex, add_source_task
from fast_transfer.sac import SacHyperparams, train_baseline
from fast_transfer.sim import make_env

CIRCUMFERENCE = 2 * math.pi * 50


def test_circle_follower_oracle():
    env = make_env("circle", n_vehicles=1, init_speed=10.0, random_spawn=False)
    m = run_episode(CenterlineFollower(10.0), env, seed=0)
    assert m.distance == pytest.approx(1500.0, rel=0.02)
    assert m.laps == pytest.approx(1500.0 / CIRCUMFERENCE, rel=0.02)
    assert m.mean_speed == pytest.approx(10.0, rel=0.02)
    assert m.laps % 1 != 0  # fractional laps are reported, not floored
    assert m.mean_speed * m.duration == pytest.approx(m.distance, rel=0.02)


def test_stationary_policy_scores_zero():
    env = make_env("oval", n_vehicles=1, max_duration=10.0)
    rep = evaluate(Stationary(), env, n_episodes=3)
    assert rep.mean["AD"] == 0 and rep.mean["AL"] == 0 and rep.mean["AS"] == 0
    assert rep.mean["AR"] == 0


def test_single_episode_std_zero():
    env = make_env("circle", n_vehicles=1, init_speed=10.0, max_duration=20.0)
    rep = evaluate(PurePursuit(10.0), env, n_episodes=1)
    assert all(v == 0 for v in rep.std.values())


def _ep(d, r=0.0):
    return EpisodeMetrics(d, r, d / 100, d / 10)


def test_population_std():
    rep = aggregate("x", [_ep(1.0), _ep(3.0)])
    assert rep.mean["AD"] == 2.0
    assert rep.std["AD"] == 1.0  # sample std would be sqrt(2)


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=20), st.randoms())
def test_aggregate_permutation_invariant(dists, rnd):
    eps = [_ep(d, d / 3) for d in dists]
    shuffled = eps[:]
    rnd.shuffle(shuffled)
    a, b = aggregate("a", eps), aggregate("b", shuffled)
    for k in a.mean:
        assert a.mean[k] == pytest.approx(b.mean[k], rel=1e-12, abs=1e-12)
        assert a.std[k] == pytest.approx(b.std[k], rel=1e-9, abs=1e-9)


def test_evaluate_deterministic():
    env = make_env("oval", n_vehicles=2, max_duration=20.0)
    a = evaluate(PurePursuit(8.0), env, 3, seeds=[5])
    b = evaluate(PurePursuit(8.0), env, 3, seeds=[5])
    assert a.mean == b.mean
    with pytest.raises(ValueError):
        evaluate(PurePursuit(), env, 0)


# -- export -------------------------------------------------------------------

def test_smooth_constant_and_window():
    assert smooth([3.0] * 10, 4) == [3.0] * 10
    assert smooth([0, 2, 4, 6], 2) == [0, 1, 3, 5]


curve_st = st.lists(st.tuples(st.integers(0, 10**7), st.floats(-1e6, 1e6)), max_size=40)


@given(curve_st)
def test_curve_round_trip(tmp_path_factory, curve):
    p = tmp_path_factory.mktemp("c") / "curve.csv"
    export_curves(curve, p, window=5)
    assert read_curves(p) == [(int(t), float(r)) for t, r in curve]


def test_empty_curve_is_header_only(tmp_path):
    p = tmp_path / "c.csv"
    export_curves([], p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2 and lines[1] == "timestep,episodic_reward,smoothed_reward"
    assert read_curves(p) == []


def test_curve_version_checked(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("timestep,episodic_reward\n1,2\n")
    with pytest.raises(VersionMismatch):
        read_curves(p)


def test_unwritable_path_raises_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        export_curves([(1, 1.0)], tmp_path / "missing" / "c.csv")
    with pytest.raises(IoFailure):
        export_report_csv(aggregate("x", [_ep(1.0)]), tmp_path / "missing" / "r.csv")


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=6), st.floats(0, 1))
def test_report_round_trip(tmp_path_factory, dists, frac):
    p = tmp_path_factory.mktemp("r") / "report.csv"
    rep = aggregate("fast", [_ep(d, -d) for d in dists])
    export_report_csv([rep, aggregate("base", [_ep(1.0)])], p, usage={"fast": {"oval": frac}})
    rows = read_report_csv(p)
    assert [r["label"] for r in rows] == ["fast", "base"]
    assert rows[0]["mean"] == rep.mean and rows[0]["std"] == rep.std
    assert rows[0]["usage"] == {"oval": frac} and rows[1]["usage"] == {}


def test_plot_writes_png(tmp_path):
    p = tmp_path / "curves.png"
    plot_curves({"a": [(i, float(i)) for i in range(50)], "empty": []}, p, window=5)
    assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_first_crossing():
    curve = [(i * 10, float(i)) for i in range(10)]
    assert first_crossing(curve, 4.0, window=1) == 40
    assert first_crossing(curve, 100.0) is None


# -- observation adaptation ------------------------------------------------------

def test_adapt_observation():
    obs = np.arange(45, dtype=np.float32).reshape(5, 9)
    assert np.array_equal(adapt_observation(obs, 9), np.arange(9))
    padded = adapt_observation(obs[:1], 45)
    assert padded.shape == (45,) and not padded[9:].any()
    assert np.array_equal(adapt_observation(obs, 45), obs.reshape(-1))


# -- one-shot -------------------------------------------------------------------

def test_one_shot_includes_random_and_trained_source_wins():
    env = make_env("lane_centering", max_duration=30.0)
    hp = SacHyperparams(total_timesteps=4000, learning_starts=500, batch_size=64, hidden=(64, 64))
    res = train_baseline(env, hp, seed=0)
    index = add_source_task(RepositoryIndex(), "lane", "d", res.policy.frozen_copy(id="lane"),
                            np.zeros((1, 4, 64, 64)))
    reports = one_shot_eval(index, env, n_episodes=4, seeds=[1])
    assert set(reports) == {"lane", "random"}
    assert reports["lane"].mean["AR"] > reports["random"].mean["AR"]
