"""Top-down grayscale frames centred on the ego vehicle (north-up)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BACKGROUND = 0.0
ROAD = 0.45
EDGE = 0.7
TRAFFIC = 0.85
EGO = 1.0

VEHICLE_LENGTH = 4.5
VEHICLE_WIDTH = 2.0


@dataclass(frozen=True)
class Camera:
    resolution: int = 64
    extent: float = 64.0  # metres covered by the full frame width
    edge_width: float = 0.8


@dataclass(frozen=True)
class Snapshot:
    """The minimal world state a frame is rendered from."""
    ego: tuple  # (x, y, heading)
    traffic: tuple = ()  # ((x, y, heading), ...)


_GRID_CACHE: dict = {}


def _pixel_offsets(cam: Camera):
    key = (cam.resolution, cam.extent)
    if key not in _GRID_CACHE:
        r = cam.resolution
        m = cam.extent / r
        c = (np.arange(r) + 0.5 - r / 2) * m
        gx, gy = np.meshgrid(c, -c)  # row 0 is the top of the image
        _GRID_CACHE[key] = (gx.ravel(), gy.ravel())
    return _GRID_CACHE[key]


def _abs_lateral(piece, px, py):
    """|lateral offset| of points to one piece, inf where the closest point
    is past a piece end (the neighbouring piece covers those points)."""
    if piece.kind == "straight":
        c, s = math.cos(piece.h0), math.sin(piece.h0)
        dx, dy = px - piece.x0, py - piece.y0
        along = dx * c + dy * s
        lat = np.abs(-dx * s + dy * c)
        lat[(along < 0.0) | (along > piece.length)] = np.inf
        return lat
    vx, vy = px - piece.cx, py - piece.cy
    rho = np.hypot(vx, vy)
    alpha0 = piece.h0 - piece.sign * math.pi / 2
    phi = ((np.arctan2(vy, vx) - alpha0) * piece.sign) % (2 * math.pi)
    lat = np.abs(piece.radius - rho)
    lat[phi > piece.length / piece.radius + 1e-9] = np.inf
    return lat


def render_snapshot(track, snap: Snapshot, cam: Camera = Camera()) -> np.ndarray:
    ox, oy = _pixel_offsets(cam)
    ex, ey, _ = snap.ego
    px, py = ox + ex, oy + ey
    half = cam.extent / 2
    view = (ex - half, ey - half, ex + half, ey + half)
    img = np.full(px.shape, BACKGROUND, dtype=np.float32)
    dist = np.full(px.shape, np.inf)
    for piece in track.pieces:
        x0, y0, x1, y1 = piece.bbox
        if x1 < view[0] or x0 > view[2] or y1 < view[1] or y0 > view[3]:
            continue
        np.minimum(dist, _abs_lateral(piece, px, py), out=dist)
    hw = track.lane_width / 2
    img[dist <= hw] = ROAD
    img[np.abs(dist - hw) <= cam.edge_width / 2] = EDGE
    reach = half * math.sqrt(2) + VEHICLE_LENGTH
    for pose, value in [(p, TRAFFIC) for p in snap.traffic] + [(snap.ego, EGO)]:
        vx, vy, vh = pose
        if abs(vx - ex) > reach or abs(vy - ey) > reach:
            continue
        c, s = math.cos(vh), math.sin(vh)
        dx, dy = px - vx, py - vy
        lon = dx * c + dy * s
        lat = -dx * s + dy * c
        inside = (np.abs(lon) <= VEHICLE_LENGTH / 2) & (np.abs(lat) <= VEHICLE_WIDTH / 2)
        img[inside] = value
    return img.reshape(cam.resolution, cam.resolution)
