"""Track geometry: straight and arc segments chained into a centerline.

A track is a sequence of segments starting at the pose (0, 0, heading 0).
Arc length ``s`` runs along the centerline; lateral offsets are positive
to the left of the direction of travel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from ..errors import ConfigError, NonClosedTrack, VersionMismatch

TWO_PI = 2.0 * math.pi
CLOSURE_TOL = 1e-6
TRACK_FORMAT_VERSION = 1


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Straight:
    length: float

    @property
    def arc_length(self) -> float:
        return self.length


@dataclass(frozen=True)
class Arc:
    radius: float
    sweep: float
    direction: str = "left"

    def __post_init__(self):
        if self.direction not in ("left", "right"):
            raise ConfigError(f"arc direction must be left/right, got {self.direction!r}")

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "left" else -1.0

    @property
    def arc_length(self) -> float:
        return self.radius * self.sweep


Segment = Union[Straight, Arc]


@dataclass
class TrackSpec:
    name: str
    segments: list
    lane_width: float = 10.0
    open: bool = False

    def __post_init__(self):
        if self.lane_width <= 0:
            raise ConfigError("lane_width must be positive")
        if not self.segments:
            raise ConfigError("track needs at least one segment")
        for seg in self.segments:
            if seg.arc_length <= 0:
                raise ConfigError(f"segment {seg} has non-positive length")

    @property
    def total_length(self) -> float:
        return float(sum(seg.arc_length for seg in self.segments))


class Projection(NamedTuple):
    s: float  # arc length of the closest centerline point
    lateral: float  # signed, positive to the left
    tangent: float  # centerline heading at s
    distance: float  # euclidean distance to the closest point
    segment: int
    outside: bool  # past either end of an open track


@dataclass
class _Piece:
    kind: str
    s0: float
    length: float
    x0: float
    y0: float
    h0: float
    # arcs only
    radius: float = 0.0
    sign: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    bbox: tuple = field(default=(0.0, 0.0, 0.0, 0.0))

    @property
    def curvature(self) -> float:
        return self.sign / self.radius if self.kind == "arc" else 0.0

    def pose(self, t: float):
        """Centerline pose at local arc length t in [0, length]."""
        if self.kind == "straight":
            c, s = math.cos(self.h0), math.sin(self.h0)
            return self.x0 + t * c, self.y0 + t * s, self.h0
        h = self.h0 + self.sign * t / self.radius
        x = self.cx + self.sign * self.radius * math.sin(h)
        y = self.cy - self.sign * self.radius * math.cos(h)
        return x, y, h

    def project(self, x: float, y: float):
        """Return (t, lateral, longitudinal_excess) for the closest point."""
        if self.kind == "straight":
            c, s = math.cos(self.h0), math.sin(self.h0)
            dx, dy = x - self.x0, y - self.y0
            along = dx * c + dy * s
            lat = -dx * s + dy * c
            if along < 0.0:
                return 0.0, lat, -along
            if along > self.length:
                return self.length, lat, along - self.length
            return along, lat, 0.0
        vx, vy = x - self.cx, y - self.cy
        rho = math.hypot(vx, vy)
        psi = math.atan2(vy, vx)
        # radial angle of the start point
        alpha0 = self.h0 - self.sign * math.pi / 2
        phi = ((psi - alpha0) * self.sign) % TWO_PI
        sweep = self.length / self.radius
        lat = self.sign * (self.radius - rho)
        if phi <= sweep + 1e-12:
            return min(phi, sweep) * self.radius, lat, 0.0
        # outside the swept sector: snap to the nearer endpoint
        if phi - sweep < TWO_PI - phi:
            t = self.length
        else:
            t = 0.0
        px, py, _ = self.pose(t)
        d = math.hypot(x - px, y - py)
        excess = math.sqrt(max(d * d - lat * lat, 0.0))
        return t, lat, excess


class Track:
    """Realized centerline with arc-length queries and projection."""

    def __init__(self, spec: TrackSpec):
        self.spec = spec
        self.name = spec.name
        self.lane_width = float(spec.lane_width)
        self.open = bool(spec.open)
        self.pieces: list[_Piece] = []
        x = y = h = 0.0
        s0 = 0.0
        for seg in spec.segments:
            if isinstance(seg, Straight):
                piece = _Piece("straight", s0, float(seg.length), x, y, h)
            else:
                sign = seg.sign
                cx = x - sign * seg.radius * math.sin(h)
                cy = y + sign * seg.radius * math.cos(h)
                piece = _Piece("arc", s0, seg.arc_length, x, y, h,
                               radius=float(seg.radius), sign=sign, cx=cx, cy=cy)
            piece.bbox = self._bbox(piece)
            self.pieces.append(piece)
            x, y, h = piece.pose(piece.length)
            s0 += piece.length
        self.total_length = s0
        self.end_pose = (x, y, h)
        self._starts = np.array([p.s0 for p in self.pieces])
        if not self.open:
            gap = math.hypot(x, y)
            dh = abs(wrap_angle(h))
            if gap > CLOSURE_TOL or dh > CLOSURE_TOL:
                raise NonClosedTrack(
                    f"track {spec.name!r} does not close: gap {gap:.3e} m, heading {dh:.3e} rad"
                )
        bb = np.array([p.bbox for p in self.pieces])
        self.extent = (bb[:, 0].min(), bb[:, 1].min(), bb[:, 2].max(), bb[:, 3].max())

    def _bbox(self, piece: _Piece):
        n = 2 if piece.kind == "straight" else 33
        pts = [piece.pose(t) for t in np.linspace(0.0, piece.length, n)]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        m = self.lane_width
        return (min(xs) - m, min(ys) - m, max(xs) + m, max(ys) + m)

    def _locate(self, s: float):
        if self.open:
            s = min(max(s, 0.0), self.total_length)
        else:
            s = s % self.total_length
        i = int(np.searchsorted(self._starts, s, side="right")) - 1
        i = max(0, min(i, len(self.pieces) - 1))
        return i, s - self.pieces[i].s0

    def pose_at(self, s: float):
        """Centerline (x, y, heading) at arc length s (wrapped or clamped)."""
        i, t = self._locate(s)
        return self.pieces[i].pose(min(t, self.pieces[i].length))

    def curvature_at(self, s: float) -> float:
        i, _ = self._locate(s)
        return self.pieces[i].curvature

    def wrap_s(self, s: float) -> float:
        if self.open:
            return min(max(s, 0.0), self.total_length)
        return s % self.total_length

    def project(self, x: float, y: float, hint: int | None = None) -> Projection:
        """Closest centerline point. ``hint`` restricts the search to
        neighbouring segments first and falls back to a global search."""
        n = len(self.pieces)
        if hint is not None and n > 3:
            cand = [(hint - 1) % n, hint % n, (hint + 1) % n]
            best = self._best(x, y, cand)
            if abs(best.lateral) <= self.lane_width and not best.outside:
                return best
        return self._best(x, y, range(n))

    def _best(self, x: float, y: float, indices) -> Projection:
        best = None
        best_d = math.inf
        for i in indices:
            p = self.pieces[i]
            t, lat, excess = p.project(x, y)
            d = math.hypot(lat, excess)
            if d < best_d - 1e-12:
                best_d = d
                best = (i, t, lat, excess)
        i, t, lat, excess = best
        p = self.pieces[i]
        s = p.s0 + t
        outside = False
        if self.open and excess > 0.0:
            outside = (i == 0 and t == 0.0) or (i == len(self.pieces) - 1 and t == p.length)
        if not self.open and s >= self.total_length:
            s -= self.total_length
        return Projection(s, lat, p.pose(t)[2], best_d, i, outside)

    def progress_delta(self, s_old: float, s_new: float) -> float:
        """Signed arc-length change, taking the short way around on circuits."""
        d = s_new - s_old
        if self.open:
            return d
        L = self.total_length
        return (d + L / 2) % L - L / 2


def build_track(spec: TrackSpec) -> Track:
    return Track(spec)


# ---------------------------------------------------------------------------
# TrackSpec files (TOML)

def _load_toml(path):
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def track_spec_to_toml(spec: TrackSpec) -> str:
    lines = [
        f"format_version = {TRACK_FORMAT_VERSION}",
        f'name = "{spec.name}"',
        f"lane_width = {float(spec.lane_width)!r}",
        f"open = {'true' if spec.open else 'false'}",
    ]
    for seg in spec.segments:
        lines.append("")
        lines.append("[[segments]]")
        if isinstance(seg, Straight):
            lines.append('kind = "straight"')
            lines.append(f"length = {float(seg.length)!r}")
        else:
            lines.append('kind = "arc"')
            lines.append(f"radius = {float(seg.radius)!r}")
            lines.append(f"sweep = {float(seg.sweep)!r}")
            lines.append(f'direction = "{seg.direction}"')
    return "\n".join(lines) + "\n"


def save_track_spec(spec: TrackSpec, path) -> None:
    Path(path).write_text(track_spec_to_toml(spec))


def track_spec_from_dict(data: dict) -> TrackSpec:
    version = data.get("format_version")
    if version != TRACK_FORMAT_VERSION:
        raise VersionMismatch(f"track format_version {version!r}, expected {TRACK_FORMAT_VERSION}")
    segments = []
    for raw in data.get("segments", []):
        kind = raw.get("kind")
        if kind == "straight":
            segments.append(Straight(float(raw["length"])))
        elif kind == "arc":
            segments.append(Arc(float(raw["radius"]), float(raw["sweep"]), raw.get("direction", "left")))
        else:
            raise ConfigError(f"unknown segment kind {kind!r}")
    return TrackSpec(
        name=str(data["name"]),
        segments=segments,
        lane_width=float(data.get("lane_width", 10.0)),
        open=bool(data.get("open", False)),
    )


def load_track_spec(path) -> TrackSpec:
    return track_spec_from_dict(_load_toml(path))
