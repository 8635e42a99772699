"""Episode evaluation, racing metrics and CSV/plot export.

Metrics per episode: distance (gross forward progress along the
centreline), reward (sum), laps (distance / track length, fractional) and
mean speed. Reports aggregate mean and *population* standard deviation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .controllers import RandomPolicy
from .errors import IoFailure, VersionMismatch
from .sac.core import Policy, select_action

METRICS = ("AD", "AR", "AL", "AS")
_METRIC_FIELDS = {"AD": "distance", "AR": "reward", "AL": "laps", "AS": "mean_speed"}
CURVE_HEADER = "# fast-curve v1"
REPORT_HEADER = "# fast-report v1; std is population (divide by N)"


@dataclass
class EpisodeMetrics:
    distance: float
    reward: float
    laps: float
    mean_speed: float
    net_distance: float = 0.0
    steps: int = 0
    duration: float = 0.0


@dataclass
class EvalReport:
    label: str
    mean: dict
    std: dict
    n_episodes: int
    seeds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    episodes: list = field(default_factory=list)


def as_controller(policy):
    """Wrap a :class:`Policy` into ``(obs, env) -> action`` (deterministic)."""
    if isinstance(policy, Policy):
        return lambda obs, env: select_action(policy, adapt_observation(obs, policy.obs_dim), True)
    return policy


def adapt_observation(obs, in_dim: int) -> np.ndarray:
    """Fit a row-major observation to a policy input of ``in_dim`` values.

    Extra rows are dropped, missing rows are zero (absent vehicles), so an
    ego-only policy reads row 0 of a full observation and vice versa.
    """
    flat = np.asarray(obs, dtype=np.float32).reshape(-1)
    if flat.size == in_dim:
        return flat
    if flat.size > in_dim:
        return flat[:in_dim]
    return np.concatenate([flat, np.zeros(in_dim - flat.size, np.float32)])


def run_episode(controller, env, seed: int | None = None) -> EpisodeMetrics:
    obs = env.reset(seed=seed)
    done = False
    while not done:
        obs, _, done, _ = env.step(controller(obs, env))
    m = env.episode_metrics()
    return EpisodeMetrics(m["distance"], m["reward"], m["laps"], m["mean_speed"],
                          m["net_distance"], m["steps"], m["duration"])


def aggregate(label: str, episodes, seeds=(), config=None) -> EvalReport:
    mean, std = {}, {}
    for key, attr in _METRIC_FIELDS.items():
        vals = np.array([getattr(e, attr) for e in episodes], dtype=np.float64)
        mean[key] = float(vals.mean())
        std[key] = float(vals.std())  # population
    return EvalReport(label, mean, std, len(episodes), list(seeds), dict(config or {}), list(episodes))


def episode_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate(policy, env, n_episodes: int = 50, seeds=(0,), label: str = "policy") -> EvalReport:
    """Deterministic-action evaluation; episode i runs with a seed derived
    from ``seeds[i % len(seeds)]`` and i."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    seeds = list(seeds) or [0]
    controller = as_controller(policy)
    episodes = [run_episode(controller, env, episode_seed(seeds[i % len(seeds)], i))
                for i in range(n_episodes)]
    return aggregate(label, episodes, seeds, {"track": env.track.name, **env.config.to_dict()})


def one_shot_eval(index, env, n_episodes: int = 50, seeds=(0,), random_seed: int = 0) -> dict:
    """Every frozen source policy, plus a uniform-random policy, on ``env``."""
    reports = {}
    for rec in index.records:
        reports[rec.name] = evaluate(rec.policy, env, n_episodes, seeds, label=rec.name)
    reports["random"] = evaluate(RandomPolicy(np.random.default_rng(random_seed)), env,
                                 n_episodes, seeds, label="random")
    return reports


# -- export -------------------------------------------------------------------

def smooth(values, window: int = 100) -> list:
    """Trailing mean over up to ``window`` previous values."""
    out = []
    acc = 0.0
    vals = list(values)
    for i, v in enumerate(vals):
        acc += v
        if i >= window:
            acc -= vals[i - window]
        out.append(acc / min(i + 1, window))
    return out


def export_curves(curve, path, window: int = 100) -> None:
    rewards = [r for _, r in curve]
    sm = smooth(rewards, window)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CURVE_HEADER + f"; window={window}\n")
            w = csv.writer(fh)
            w.writerow(["timestep", "episodic_reward", "smoothed_reward"])
            for (t, r), s in zip(curve, sm):
                w.writerow([int(t), repr(float(r)), repr(float(s))])
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_curves(path) -> list:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(CURVE_HEADER):
            raise VersionMismatch(f"{path}: not a v1 curve file")
        rows = list(csv.DictReader(fh))
    return [(int(r["timestep"]), float(r["episodic_reward"])) for r in rows]


def export_report_csv(reports, path, usage: dict | None = None) -> None:
    """One row per configuration; ``usage`` maps label -> {source: fraction}."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    cols = ["label", "n_episodes"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")] + ["usage"]
    try:
        with open(path, "w", newline="") as fh:
            fh.write(REPORT_HEADER + "\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for rep in reports:
                u = (usage or {}).get(rep.label, {})
                row = [rep.label, rep.n_episodes]
                for m in METRICS:
                    row += [repr(float(rep.mean[m])), repr(float(rep.std[m]))]
                row.append(";".join(f"{k}={v!r}" for k, v in sorted(u.items())))
                w.writerow(row)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_report_csv(path) -> list:
    """Rows as dicts: label, n_episodes, mean/std dicts, usage dict."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# fast-report v1"):
            raise VersionMismatch(f"{path}: not a v1 report file")
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        usage = {}
        if r["usage"]:
            for item in r["usage"].split(";"):
                k, v = item.split("=")
                usage[k] = float(v)
        out.append({
            "label": r["label"],
            "n_episodes": int(r["n_episodes"]),
            "mean": {m: float(r[f"{m}_mean"]) for m in METRICS},
            "std": {m: float(r[f"{m}_std"]) for m in METRICS},
            "usage": usage,
        })
    return out


def plot_curves(curves: dict, path, window: int = 100) -> None:
    """Reward-vs-timestep chart, one line per labelled curve."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, curve in curves.items():
        if not curve:
            continue
        ts = [t for t, _ in curve]
        ax.plot(ts, smooth([r for _, r in curve], window), label=label)
    ax.set_xlabel("timestep")
    ax.set_ylabel("episodic reward (smoothed)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def report_to_dict(rep: EvalReport) -> dict:
    d = asdict(rep)
    d["episodes"] = [asdict(e) if not isinstance(e, dict) else e for e in rep.episodes]
    return d


def first_crossing(curve, threshold: float, window: int = 10):
    """First timestep where the trailing-mean episodic reward reaches
    ``threshold``; None if it never does."""
    rewards = [r for _, r in curve]
    for (t, _), s in zip(curve, smooth(rewards, window)):
        if s >= threshold and math.isfinite(s):
            return t
    return None
