"""Built-in track catalogue.

Closed circuits are rounded rectangles whose sides may contain chicanes.
A chicane (left, right, right, left arcs of equal radius and sweep) has
zero net lateral shift and replaces ``4 r sin(sweep)`` of straight, so each
circuit closes exactly when opposite sides have equal length.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError
from .track import Arc, Straight, TrackSpec

HALF_PI = math.pi / 2
# open roads must outlast the default time cap at top speed (20 m/s x 150 s)
OPEN_ROAD_LENGTH = 3400.0


def chicane(radius: float, sweep: float) -> list:
    return [Arc(radius, sweep, "left"), Arc(radius, sweep, "right"),
            Arc(radius, sweep, "right"), Arc(radius, sweep, "left")]


def chicane_length(radius: float, sweep: float) -> float:
    """Straight-line span covered by :func:`chicane`."""
    return 4.0 * radius * math.sin(sweep)


def _rounded_rectangle(sides: list, radius: float) -> list:
    """Four sides (lists of segments) joined by left quarter turns."""
    segs = []
    for side in sides:
        segs.extend(side)
        segs.append(Arc(radius, HALF_PI, "left"))
    return segs


def circle(radius: float = 50.0, lane_width: float = 10.0) -> TrackSpec:
    return TrackSpec("circle", [Arc(radius, 2 * math.pi, "left")], lane_width)


def oval(straight: float = 200.0, radius: float = 30.0, lane_width: float = 10.0,
         name: str = "oval") -> TrackSpec:
    segs = [Straight(straight), Arc(radius, math.pi), Straight(straight), Arc(radius, math.pi)]
    return TrackSpec(name, segs, lane_width)


def mixed(lane_width: float = 10.0) -> TrackSpec:
    ch_a = (30.0, 0.5)
    ch_b = (40.0, 0.35)
    bottom = [Straight(60.0), *chicane(*ch_b)]
    right = [Straight(40.0), *chicane(*ch_a)]
    top = [Straight(60.0 + chicane_length(*ch_b))]
    left = [Straight(40.0 + chicane_length(*ch_a))]
    return TrackSpec("mixed", _rounded_rectangle([bottom, right, top, left], 25.0), lane_width)


def long_complex(lane_width: float = 10.0) -> TrackSpec:
    ch1, ch2, ch3 = (25.0, 0.7), (20.0, 0.9), (35.0, 0.5)
    bottom = [Straight(80.0), *chicane(*ch1), Straight(30.0), *chicane(*ch2), Straight(60.0)]
    right = [Straight(50.0), *chicane(*ch3), *chicane(*ch2), Straight(20.0)]
    top = [Straight(20.0), *chicane(*ch3), Straight(
        170.0 + chicane_length(*ch1) + chicane_length(*ch2) - chicane_length(*ch3) - 20.0)]
    left = [*chicane(*ch1), Straight(
        70.0 + chicane_length(*ch3) + chicane_length(*ch2) - chicane_length(*ch1))]
    return TrackSpec("long_complex", _rounded_rectangle([bottom, right, top, left], 20.0), lane_width)


def lane_centering(lane_width: float = 8.0, seed: int = 7) -> TrackSpec:
    """Open winding road: alternating arcs whose heading oscillates around 0."""
    rng = np.random.default_rng(seed)
    segs = [Straight(60.0)]
    length = 60.0
    prev = 0.0
    direction = "left"
    while length < OPEN_ROAD_LENGTH:
        amp = float(rng.uniform(0.15, 0.45))
        radius = float(rng.uniform(70.0, 140.0))
        arc = Arc(radius, prev + amp, direction)
        segs.append(arc)
        length += arc.arc_length
        prev = amp
        direction = "right" if direction == "left" else "left"
    return TrackSpec("lane_centering", segs, lane_width, open=True)


def straight_traffic(lane_width: float = 12.0) -> TrackSpec:
    return TrackSpec("straight_traffic", [Straight(OPEN_ROAD_LENGTH)], lane_width, open=True)


def merge_like(lane_width: float = 12.0) -> TrackSpec:
    segs = [Straight(400.0), Arc(300.0, 0.15, "right"), Arc(300.0, 0.15, "left"),
            Straight(OPEN_ROAD_LENGTH - 400.0 - 90.0)]
    return TrackSpec("merge_like", segs, lane_width, open=True)


def cross_like(lane_width: float = 10.0) -> TrackSpec:
    segs = [Straight(200.0), Arc(25.0, HALF_PI, "left"), Straight(OPEN_ROAD_LENGTH - 200.0)]
    return TrackSpec("cross_like", segs, lane_width, open=True)


def ring_like(lane_width: float = 8.0) -> TrackSpec:
    return TrackSpec("ring_like", [Arc(25.0, 2 * math.pi, "left")], lane_width)


BUILTIN_TRACKS = {
    "circle": circle,
    "oval": oval,
    "oval_alt": lambda: oval(straight=220.0, radius=34.0, name="oval_alt"),
    "mixed": mixed,
    "long_complex": long_complex,
    "lane_centering": lane_centering,
    "straight_traffic": straight_traffic,
    "merge_like": merge_like,
    "cross_like": cross_like,
    "ring_like": ring_like,
}


def get_track_spec(name: str) -> TrackSpec:
    try:
        return BUILTIN_TRACKS[name]()
    except KeyError:
        raise ConfigError(f"unknown track {name!r}; choose from {sorted(BUILTIN_TRACKS)}") from None
