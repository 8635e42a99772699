from .env import (
    FEATURES,
    EpisodeConfig,
    RacingEnv,
    VehicleState,
    compute_reward,
    make_env,
    progress_update,
)
from .render import Camera, Snapshot, render_snapshot
from .track import Arc, Straight, Track, TrackSpec, build_track, load_track_spec, save_track_spec
from .tracks import BUILTIN_TRACKS, get_track_spec

__all__ = [
    "FEATURES", "EpisodeConfig", "RacingEnv", "VehicleState", "compute_reward", "make_env",
    "progress_update", "Camera", "Snapshot", "render_snapshot", "Arc", "Straight", "Track",
    "TrackSpec", "build_track", "load_track_spec", "save_track_spec", "BUILTIN_TRACKS",
    "get_track_spec",
]
