import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fast_transfer.errors import ConfigError, CorruptFile, FrozenPolicy, ShapeMismatch, VersionMismatch
from fast_transfer.sac import (Policy, ReplayBuffer, SacHyperparams, SacLearner, compute_return, load_policy,
                               sac_update, save_policy, run_training, select_action, soft_update,
                               train_baseline)
from fast_transfer.sac.core import actor_loss_and_grad, critic_loss_and_grad, squashed_gaussian_logp
from fast_transfer.sac.nets import MLP
from fast_transfer.sim import make_env

OBS, ACT, HID = 4, 2, 8


def _fd_grad(net, loss_fn, h=1e-7):
    g = np.zeros(net.n_params)
    p = net.params
    for i in range(net.n_params):
        old = p[i]
        p[i] = old + h
        lp = loss_fn()
        p[i] = old - h
        lm = loss_fn()
        p[i] = old
        g[i] = (lp - lm) / (2 * h)
    return g


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def test_critic_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    critic = MLP((OBS + ACT, HID, HID, 1), rng=rng, dtype=np.float64)
    worst = 0.0
    for _ in range(100):
        obs = rng.standard_normal((16, OBS))
        act = rng.uniform(-1, 1, (16, ACT))
        y = rng.standard_normal(16)
        _, g = critic_loss_and_grad(critic, obs, act, y)
        fd = _fd_grad(critic, lambda: critic_loss_and_grad(critic, obs, act, y)[0])
        worst = max(worst, _rel(g, fd))
    assert worst < 1e-3


def test_actor_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    actor = MLP((OBS, HID, HID, 2 * ACT), rng=rng, dtype=np.float64)
    q1 = MLP((OBS + ACT, HID, HID, 1), rng=rng, dtype=np.float64)
    q2 = MLP((OBS + ACT, HID, HID, 1), rng=rng, dtype=np.float64)
    worst = 0.0
    for _ in range(100):
        obs = rng.standard_normal((16, OBS))
        eps = rng.standard_normal((16, ACT))
        _, g, _ = actor_loss_and_grad(actor, q1, q2, obs, eps, 0.2, ACT)
        fd = _fd_grad(actor, lambda: actor_loss_and_grad(actor, q1, q2, obs, eps, 0.2, ACT)[0])
        worst = max(worst, _rel(g, fd))
    assert worst < 1e-3


@pytest.mark.parametrize("mu,log_std", [(0.0, 0.0), (0.3, -0.5), (-1.0, -1.5)])
def test_squashed_gaussian_integrates_to_one(mu, log_std):
    a = np.linspace(-1, 1, 400_001)[1:-1]
    u = np.arctanh(a)[:, None]
    dens = np.exp(squashed_gaussian_logp(u, np.full_like(u, mu), np.full_like(u, log_std)))
    assert abs(np.trapezoid(dens, a) - 1.0) < 1e-2


def test_replay_buffer_overwrites_oldest():
    buf = ReplayBuffer(2, 1, capacity=5)
    for i in range(8):
        buf.add(np.full(2, i), [0.0], float(i), np.zeros(2), False)
    assert len(buf) == 5
    assert sorted(buf.rew.tolist()) == [3, 4, 5, 6, 7]


def test_replay_sampling_only_stored_items(rng):
    buf = ReplayBuffer(1, 1, capacity=10)
    for i in range(4):
        buf.add([i], [0.0], float(i), [0.0], False)
    _, _, r, _, _ = buf.sample(200, rng)
    assert set(r.tolist()) <= {0, 1, 2, 3}


@given(arrays(np.float64, 20, elements=st.floats(-10, 10)), arrays(np.float64, 20, elements=st.floats(-10, 10)),
       st.floats(0.01, 1.0))
def test_soft_update_contracts(target, online, tau):
    before = np.linalg.norm(target - online)
    t = target.copy()
    soft_update(t, online, tau)
    assert np.linalg.norm(t - online) == pytest.approx((1 - tau) * before, rel=1e-9, abs=1e-9)


def test_soft_update_examples():
    t = np.array([0.0])
    soft_update(t, np.array([1.0]), 0.5)
    assert t[0] == 0.5
    soft_update(t, np.array([3.0]), 1.0)
    assert t[0] == 3.0


def test_compute_return_examples():
    assert compute_return([1, 1, 1], 0.0) == 1.0
    assert compute_return([1, 1, 1], 0.5) == 1.75
    assert compute_return([], 0.9) == 0.0


@given(st.lists(st.floats(-1, 1), max_size=200), st.floats(0, 0.99))
def test_return_bound(rewards, gamma):
    assert abs(compute_return(rewards, gamma)) <= 1.0 / (1 - gamma) + 1e-9


def _learner(tau=0.005, alpha=0.2, seed=0):
    hp = SacHyperparams(batch_size=32, hidden=(16, 16), tau=tau, alpha=alpha, replay_capacity=1000)
    learner = SacLearner.create(OBS, ACT, hp, seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        learner.buffer.add(rng.standard_normal(OBS), rng.uniform(-1, 1, ACT), rng.standard_normal(),
                           rng.standard_normal(OBS), rng.random() < 0.1)
    return learner, hp


def test_tau_one_copies_online():
    learner, hp = _learner(tau=1.0)
    sac_update(learner, learner.buffer.sample(32, learner.rng), hp)
    assert np.array_equal(learner.q1_target.params, learner.q1.params)
    assert np.array_equal(learner.q2_target.params, learner.q2.params)


def test_zero_alpha_zero_entropy_term():
    learner, hp = _learner(alpha=0.0)
    losses = sac_update(learner, learner.buffer.sample(32, learner.rng), hp)
    assert losses["entropy_term"] == 0.0
    assert set(losses) == {"critic1", "critic2", "actor", "entropy_term"}


def test_frozen_policy_rejects_update():
    learner, hp = _learner()
    learner.policy.freeze()
    before = learner.checksum()
    with pytest.raises(FrozenPolicy):
        sac_update(learner, learner.buffer.sample(32, learner.rng), hp)
    assert learner.checksum() == before
    with pytest.raises(ValueError):
        learner.policy.actor.params[0] = 1.0


def test_select_action_contracts(rng):
    pol = Policy.create(OBS, ACT, (16, 16), rng=rng)
    obs = rng.standard_normal(OBS)
    assert np.array_equal(select_action(pol, obs, True), select_action(pol, obs, True))
    states = rng.standard_normal((10_000, OBS)) * 10
    for s in states[:10_000:10]:
        a = select_action(pol, s, False, rng)
        assert a.shape == (ACT,) and np.all(np.abs(a) <= 1.0)
    with pytest.raises(ShapeMismatch):
        select_action(pol, np.zeros(OBS + 1))


def test_zero_weight_actor_gives_zero_action():
    pol = Policy(MLP((OBS, 8, 2 * ACT)), ACT)
    assert np.array_equal(select_action(pol, np.ones(OBS)), np.zeros(ACT))


def test_hyperparam_validation():
    with pytest.raises(ConfigError):
        SacHyperparams(gamma=1.0)
    with pytest.raises(ConfigError):
        SacHyperparams(tau=0.0)
    with pytest.raises(ConfigError):
        SacHyperparams(batch_size=10, replay_capacity=5)


def test_policy_checkpoint_round_trip(tmp_path, rng):
    pol = Policy.create(45, 2, (16, 16), rng=rng, id="src").freeze()
    path = tmp_path / "p.pol"
    save_policy(pol, path, {"lr": 1e-3})
    back = load_policy(path)
    assert back.frozen and back.id == "src" and back.checksum() == pol.checksum()
    assert back.meta["hyperparams"] == {"lr": 1e-3}
    with pytest.raises(FrozenPolicy):
        back.assert_mutable()
    with pytest.raises(ShapeMismatch):
        load_policy(path, expected_sizes=(9, 16, 16, 4))


def test_policy_checkpoint_corruption(tmp_path, rng):
    pol = Policy.create(9, 2, (8,), rng=rng)
    path = tmp_path / "p.pol"
    save_policy(pol, path)
    data = bytearray(path.read_bytes())
    path.write_bytes(data[:-7])
    with pytest.raises(CorruptFile):
        load_policy(path)
    data[8] = 99  # version field
    path.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch):
        load_policy(path)


def test_train_baseline_zero_steps():
    res = train_baseline(make_env("lane_centering"), SacHyperparams(total_timesteps=0, hidden=(8, 8)), seed=1)
    assert res.curve == []


def test_train_baseline_deterministic():
    hp = SacHyperparams(total_timesteps=600, learning_starts=100, batch_size=32, hidden=(16, 16))
    env = make_env("lane_centering", max_duration=20.0)
    a = train_baseline(env, hp, seed=5)
    b = train_baseline(env, hp, seed=5)
    assert a.curve == b.curve and len(a.curve) > 0
    assert a.learner.checksum() == b.learner.checksum()


def test_stop_predicate_ends_training_after_episode():
    hp = SacHyperparams(total_timesteps=5000, learning_starts=100, batch_size=16, hidden=(8, 8))
    res = run_training(make_env("oval", n_vehicles=1, max_duration=20.0), hp, 0, stop=lambda r: len(r.curve) == 2)
    assert len(res.curve) == 2
    assert res.learner.buffer.inserted == res.curve[-1][0]
