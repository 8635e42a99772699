import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fast_transfer.errors import NonClosedTrack, VersionMismatch
from fast_transfer.sim import BUILTIN_TRACKS, Arc, Straight, TrackSpec, build_track, get_track_spec
from fast_transfer.sim.track import (load_track_spec, save_track_spec, track_spec_from_dict,
                                     track_spec_to_toml, wrap_angle)


def test_circle_length():
    track = build_track(TrackSpec("c", [Arc(50.0, 2 * math.pi)]))
    assert track.total_length == pytest.approx(2 * math.pi * 50, abs=1e-9)
    assert track.total_length == pytest.approx(314.159, abs=1e-3)


def test_two_straights_do_not_close():
    with pytest.raises(NonClosedTrack):
        build_track(TrackSpec("bad", [Straight(100.0), Straight(100.0)]))


def test_open_spec_needs_no_closure():
    track = build_track(TrackSpec("road", [Straight(100.0)], open=True))
    assert track.total_length == 100.0


def test_oval_length():
    spec = TrackSpec("o", [Straight(200), Arc(30, math.pi), Straight(200), Arc(30, math.pi)])
    assert build_track(spec).total_length == pytest.approx(400 + 60 * math.pi, abs=1e-9)


@pytest.mark.parametrize("name", sorted(BUILTIN_TRACKS))
def test_builtin_tracks_build(name):
    track = build_track(get_track_spec(name))
    assert track.total_length > 0
    x, y, h = track.pose_at(0.0)
    p = track.project(x, y)
    assert abs(p.lateral) < 1e-6


@given(st.floats(0.0, 1.0), st.floats(-4.0, 4.0))
def test_projection_inverts_pose(frac, offset):
    track = build_track(get_track_spec("mixed"))
    s = frac * track.total_length * 0.999
    x, y, h = track.pose_at(s)
    px, py = x - offset * math.sin(h), y + offset * math.cos(h)
    p = track.project(px, py)
    assert p.lateral == pytest.approx(offset, abs=1e-6)
    ds = track.progress_delta(s, p.s)
    assert abs(ds) < 1e-6


def test_progress_delta_wraps():
    track = build_track(get_track_spec("circle"))
    L = track.total_length
    assert track.progress_delta(313.0, 1.0) == pytest.approx(L - 313.0 + 1.0)
    assert track.progress_delta(1.0, 313.0) == pytest.approx(-(L - 313.0 + 1.0))


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


@pytest.mark.parametrize("name", ["oval", "mixed", "lane_centering"])
def test_track_toml_round_trip(tmp_path, name):
    spec = get_track_spec(name)
    path = tmp_path / "t.toml"
    save_track_spec(spec, path)
    back = load_track_spec(path)
    assert back == spec
    assert build_track(back).total_length == pytest.approx(build_track(spec).total_length)


def test_track_future_version():
    import tomli

    data = tomli.loads(track_spec_to_toml(get_track_spec("circle")))
    data["format_version"] = 99
    with pytest.raises(VersionMismatch):
        track_spec_from_dict(data)


def test_curvature_of_arcs():
    track = build_track(get_track_spec("circle"))
    assert track.curvature_at(10.0) == pytest.approx(1 / 50)
    assert np.isfinite(track.extent).all()
