"""Racing environment: kinematic ego car, centreline-following traffic.

The API is gym-like but deliberately minimal::

    env = RacingEnv(get_track_spec("oval"), EpisodeConfig(seed=0))
    obs = env.reset()
    obs, reward, done, info = env.step(np.array([steering, acceleration]))
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import ConfigError, DegenerateSpeedRange, PlacementFailure, SteppedDoneEpisode
from .render import Camera, Snapshot, render_snapshot
from .track import Track, TrackSpec, wrap_angle
from .tracks import get_track_spec

FEATURES = ("presence", "x", "y", "vx", "vy", "heading", "long_off", "lat_off", "ang_off")
N_FEATURES = len(FEATURES)
MAX_OBSERVED = 5


@dataclass
class EpisodeConfig:
    max_duration: float = 150.0  # seconds; 400 for the extended ablation
    dt: float = 0.2
    n_vehicles: int | None = None  # including the ego car; None samples uniformly in [1, 5]
    seed: int = 0
    reward_a: float = 1.0
    reward_b: float = 1.0
    random_spawn: bool = True
    v_min: float = 0.0
    v_max: float = 20.0
    init_speed: float = 0.0
    steering_gain: float = 0.1  # curvature (1/m) at full steering
    accel_gain: float = 5.0  # m/s^2 at full throttle
    traffic_speed: tuple = (4.0, 10.0)
    vehicle_radius: float = 2.0
    perception_range: float = 50.0
    obs_rows: int = MAX_OBSERVED
    open_spawn_fraction: float = 0.05
    resolution: int = 64
    camera_extent: float = 64.0

    def __post_init__(self):
        self.traffic_speed = tuple(self.traffic_speed)
        if self.max_duration <= 0 or self.dt <= 0:
            raise ConfigError("max_duration and dt must be positive")
        if self.n_vehicles is not None and not 1 <= self.n_vehicles <= MAX_OBSERVED:
            raise ConfigError(f"n_vehicles must lie in [1, {MAX_OBSERVED}]")
        if not 1 <= self.obs_rows <= MAX_OBSERVED:
            raise ConfigError("obs_rows must lie in [1, 5]")
        if self.v_max <= self.v_min:
            raise ConfigError("v_max must exceed v_min")

    @property
    def max_steps(self) -> int:
        return int(round(self.max_duration / self.dt))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["traffic_speed"] = list(self.traffic_speed)
        return d


# track-specific overrides used by make_env
TRACK_DEFAULTS = {
    "lane_centering": {"n_vehicles": 1, "obs_rows": 1},
}


@dataclass
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float
    arc_length_progress: float = 0.0
    lap_count: int = 0
    alive: bool = True
    lateral: float = 0.0
    segment: int = 0


@dataclass
class TrafficCar:
    id: int
    s: float
    offset: float
    speed: float
    active: bool = True


def compute_reward(v, v_min, v_max, collision, a=1.0, b=1.0, progressing=True) -> float:
    """Normalised-speed reward with a collision penalty (collision in {0, -1}).

    Backward motion flips the sign of the speed term only, so a crash is
    never turned into a bonus.
    """
    if v_max == v_min:
        raise DegenerateSpeedRange("v_max equals v_min")
    speed_term = a * (v - v_min) / (v_max - v_min)
    if not progressing:
        speed_term = -speed_term
    return speed_term + b * collision


def progress_update(prev: VehicleState, new: VehicleState, track: Track):
    """Arc-length change between two projected states.

    Returns ``(distance_delta, lap_completed, progressing)``.
    """
    delta = track.progress_delta(prev.arc_length_progress, new.arc_length_progress)
    lap_completed = (not track.open) and prev.arc_length_progress + delta >= track.total_length
    return delta, bool(lap_completed), delta > 0.0


def _scale(value, lo, hi):
    return min(1.0, max(-1.0, 2.0 * (value - lo) / (hi - lo) - 1.0))


class RacingEnv:
    def __init__(self, track: Track | TrackSpec | str, config: EpisodeConfig | None = None):
        if isinstance(track, str):
            track = get_track_spec(track)
        if isinstance(track, TrackSpec):
            track = Track(track)
        self.track = track
        self.config = config or EpisodeConfig()
        self.camera = Camera(self.config.resolution, self.config.camera_extent)
        self.rng = np.random.default_rng(self.config.seed)
        x0, y0, x1, y1 = track.extent
        self._world = (x0, y0, x1, y1)
        self.obs_shape = (self.config.obs_rows, N_FEATURES)
        self.ego: VehicleState | None = None
        self.traffic: list[TrafficCar] = []
        self.steps = 0
        self.done = True
        self.history = deque(maxlen=4)

    # -- episode control -------------------------------------------------
    def seed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.seed(seed)
        cfg = self.config
        L = self.track.total_length
        n = cfg.n_vehicles if cfg.n_vehicles is not None else int(self.rng.integers(1, MAX_OBSERVED + 1))
        if cfg.random_spawn:
            hi = L * cfg.open_spawn_fraction if self.track.open else L
            s_ego = float(self.rng.uniform(0.0, hi))
        else:
            s_ego = 0.0
        x, y, h = self.track.pose_at(s_ego)
        proj = self.track.project(x, y)
        self.ego = VehicleState(x, y, h, float(np.clip(cfg.init_speed, cfg.v_min, cfg.v_max)),
                                arc_length_progress=proj.s, segment=proj.segment)
        self.traffic = []
        min_gap = 2 * cfg.vehicle_radius + 6.0
        for vid in range(1, n):
            for _ in range(200):
                if self.track.open:
                    s = float(self.rng.uniform(s_ego, min(s_ego + 400.0, L)))
                else:
                    s = float(self.rng.uniform(0.0, L))
                off = float(self.rng.uniform(-self.track.lane_width / 4, self.track.lane_width / 4))
                car = TrafficCar(vid, s, off, float(self.rng.uniform(*cfg.traffic_speed)))
                px, py, _ = self._traffic_pose(car)
                others = [(self.ego.x, self.ego.y)] + [self._traffic_pose(c)[:2] for c in self.traffic]
                if all(math.hypot(px - ox, py - oy) >= min_gap for ox, oy in others):
                    self.traffic.append(car)
                    break
            else:
                raise PlacementFailure(f"could not place vehicle {vid} on {self.track.name}")
        self.steps = 0
        self.done = False
        self._metrics = {"gross": 0.0, "net": 0.0, "speed_sum": 0.0, "reward": 0.0}
        self.history.clear()
        self.history.append(self.snapshot())
        return self.observe()

    def _traffic_pose(self, car: TrafficCar):
        x, y, h = self.track.pose_at(car.s)
        return x - car.offset * math.sin(h), y + car.offset * math.cos(h), h

    def step(self, action):
        if self.done:
            raise SteppedDoneEpisode("episode is over; call reset()")
        cfg = self.config
        steer = float(np.clip(action[0], -1.0, 1.0))
        accel = float(np.clip(action[1], -1.0, 1.0))
        ego = self.ego
        prev = VehicleState(ego.x, ego.y, ego.heading, ego.speed, ego.arc_length_progress, ego.lap_count)

        v = min(cfg.v_max, max(cfg.v_min, ego.speed + cfg.accel_gain * accel * cfg.dt))
        kappa = cfg.steering_gain * steer
        dtheta = v * kappa * cfg.dt
        h = ego.heading
        if abs(kappa) < 1e-9:
            ego.x += v * cfg.dt * math.cos(h)
            ego.y += v * cfg.dt * math.sin(h)
        else:
            ego.x += (math.sin(h + dtheta) - math.sin(h)) / kappa
            ego.y += (math.cos(h) - math.cos(h + dtheta)) / kappa
        ego.heading = wrap_angle(h + dtheta)
        ego.speed = v

        L = self.track.total_length
        for car in self.traffic:
            if not car.active:
                continue
            car.s += car.speed * cfg.dt
            if self.track.open:
                if car.s > L:
                    car.active = False
            else:
                car.s %= L

        proj = self.track.project(ego.x, ego.y, hint=ego.segment)
        ego.arc_length_progress = proj.s
        ego.lateral = proj.lateral
        ego.segment = proj.segment
        delta, lap_done, progressing = progress_update(prev, ego, self.track)
        if not self.track.open:
            raw = prev.arc_length_progress + delta
            if raw >= L:
                ego.lap_count += 1
            elif raw < 0.0:
                ego.lap_count -= 1

        off_track = abs(proj.lateral) > self.track.lane_width / 2 or proj.outside
        crashed = False
        limit = 2 * cfg.vehicle_radius
        for car in self.traffic:
            if car.active:
                tx, ty, _ = self._traffic_pose(car)
                if math.hypot(ego.x - tx, ego.y - ty) < limit:
                    crashed = True
                    break
        collision = -1.0 if (crashed or off_track) else 0.0
        reward = compute_reward(v, cfg.v_min, cfg.v_max, collision, cfg.reward_a, cfg.reward_b, progressing)

        self.steps += 1
        timeout = self.steps >= cfg.max_steps
        self.done = crashed or off_track or timeout
        ego.alive = not (crashed or off_track)
        m = self._metrics
        m["gross"] += max(delta, 0.0)
        m["net"] += delta
        m["speed_sum"] += v
        m["reward"] += reward
        self.history.append(self.snapshot())
        info = {
            "distance_delta": delta,
            "lap_completed": lap_done,
            "crashed": crashed,
            "off_track": off_track,
            "progressing": progressing,
            "timeout": timeout and not (crashed or off_track),
            "speed": v,
            "elapsed": self.steps * cfg.dt,
        }
        return self.observe(), reward, self.done, info

    # -- observation -----------------------------------------------------
    def _row(self, x, y, vx, vy, heading, s, lat, tangent, ref=None):
        cfg = self.config
        if ref is None:
            x0, y0, x1, y1 = self._world
            fx, fy = _scale(x, x0, x1), _scale(y, y0, y1)
            fvx, fvy = vx / cfg.v_max, vy / cfg.v_max
        else:
            r = cfg.perception_range
            fx, fy = (x - ref[0]) / r, (y - ref[1]) / r
            fvx, fvy = (vx - ref[2]) / cfg.v_max, (vy - ref[3]) / cfg.v_max
        hw = self.track.lane_width / 2
        row = [1.0, fx, fy, fvx, fvy, wrap_angle(heading) / math.pi,
               _scale(s, 0.0, self.track.total_length), lat / hw,
               wrap_angle(heading - tangent) / math.pi]
        return [min(1.0, max(-1.0, v)) for v in row]

    def observe(self) -> np.ndarray:
        ego = self.ego
        obs = np.zeros(self.obs_shape, dtype=np.float32)
        evx, evy = ego.speed * math.cos(ego.heading), ego.speed * math.sin(ego.heading)
        tangent = self.track.pose_at(ego.arc_length_progress)[2]
        obs[0] = self._row(ego.x, ego.y, evx, evy, ego.heading, ego.arc_length_progress,
                           ego.lateral, tangent)
        if self.obs_shape[0] == 1:
            return obs
        cands = []
        for car in self.traffic:
            if not car.active:
                continue
            x, y, h = self._traffic_pose(car)
            cands.append((math.hypot(x - ego.x, y - ego.y), car.id, car, x, y, h))
        cands.sort(key=lambda c: (c[0], c[1]))
        ref = (ego.x, ego.y, evx, evy)
        for i, (_, _, car, x, y, h) in enumerate(cands[: self.obs_shape[0] - 1], start=1):
            obs[i] = self._row(x, y, car.speed * math.cos(h), car.speed * math.sin(h), h,
                               car.s, car.offset, h, ref=ref)
        return obs

    # -- frames ----------------------------------------------------------
    def snapshot(self) -> Snapshot:
        ego = self.ego
        cars = tuple(self._traffic_pose(c) for c in self.traffic if c.active)
        return Snapshot((ego.x, ego.y, ego.heading), cars)

    def render_frame(self) -> np.ndarray:
        return render_snapshot(self.track, self.snapshot(), self.camera)

    def recent_frames(self) -> list:
        """Frames of the (up to) four most recent states of this episode."""
        return [render_snapshot(self.track, s, self.camera) for s in self.history]

    def episode_metrics(self) -> dict:
        m = self._metrics
        n = max(self.steps, 1)
        return {
            "distance": m["gross"],
            "net_distance": m["net"],
            "reward": m["reward"],
            "laps": m["gross"] / self.track.total_length,
            "mean_speed": m["speed_sum"] / n if self.steps else 0.0,
            "steps": self.steps,
            "duration": self.steps * self.config.dt,
        }


def make_env(track: str | TrackSpec, seed: int = 0, **overrides) -> RacingEnv:
    """Environment with the catalogue defaults for a named track."""
    spec = get_track_spec(track) if isinstance(track, str) else track
    kw = dict(TRACK_DEFAULTS.get(spec.name, {}))
    kw.update(overrides)
    cfg = EpisodeConfig(seed=seed, **kw)
    return RacingEnv(spec, cfg)


def episode_config_from_dict(d: dict) -> EpisodeConfig:
    known = set(EpisodeConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown episode keys: {sorted(unknown)}")
    return EpisodeConfig(**d)


def with_seed(cfg: EpisodeConfig, seed: int) -> EpisodeConfig:
    return replace(cfg, seed=seed)
