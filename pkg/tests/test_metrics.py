"""Driving scores (HD-Score family) and reconstruction metrics."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from hugsim.errors import ConfigError
from hugsim.metrics.hd import (ScoreTrace, comfort_score, drivable_compliance,
                               hd_score, hd_score_step, point_in_polygon,
                               route_completion, score_report,
                               time_to_collision_score, write_score_report)
from hugsim.metrics.recon import (chamfer_semantic, depth_rmse, pose_error,
                                  psnr, ssim)

SQUARE = [[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0]]
L_SHAPE = [[0, 0], [6, 0], [6, 2], [2, 2], [2, 6], [0, 6]]


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-2.0, 8.0), z=st.floats(-2.0, 8.0))
def test_point_in_polygon_matches_shapely(x, z):
    for poly in (SQUARE, L_SHAPE):
        ref = Polygon(poly)
        d = ref.exterior.distance(Point(x, z))
        if d < 1e-9:
            continue  # boundary: conventions differ, tested separately
        assert point_in_polygon((x, z), poly) == ref.contains(Point(x, z))


def test_point_on_edge_counts_as_inside():
    assert point_in_polygon((2.0, 0.0), SQUARE)
    assert point_in_polygon((0.0, 0.0), SQUARE)
    assert point_in_polygon((4.0, 4.0), SQUARE)


def test_drivable_compliance_gate():
    inside = [[1, 1], [3, 1], [3, 3], [1, 3]]
    leaking = [[1, 1], [5, 1], [5, 3], [1, 3]]
    assert drivable_compliance(inside, [SQUARE]) == 1.0
    assert drivable_compliance(leaking, [SQUARE]) == 0.0
    # union of polygons: corners may be split across overlapping areas
    right = [[3.0, 0.0], [8.0, 0.0], [8.0, 4.0], [3.0, 4.0]]
    assert drivable_compliance(leaking, [SQUARE, right]) == 1.0
    with pytest.raises(ConfigError):
        drivable_compliance(inside, [])


def test_ttc_constant_velocity_projection():
    ego = (0.0, 0.0, 0.0, 5.0)
    lw = (4.0, 2.0)
    # stationary actor 8 m ahead: gap 4 m closes in 0.8 s -> TTC trips
    assert time_to_collision_score(ego, lw, [(8.0, 0.0, 0.0, 0.0)], [lw]) == 0.0
    # 12 m ahead: gap 8 m needs 1.6 s, beyond the 1 s horizon
    assert time_to_collision_score(ego, lw, [(12.0, 0.0, 0.0, 0.0)], [lw]) == 1.0
    # same-speed leader never closes
    assert time_to_collision_score(ego, lw, [(8.0, 0.0, 0.0, 5.0)], [lw]) == 1.0
    assert time_to_collision_score(ego, lw, [], []) == 1.0


def test_comfort_thresholds():
    assert comfort_score(0.0, 0.0, 0.0) == 1.0
    assert comfort_score(3.0, 5.0, 0.95) == 1.0  # at the limits
    assert comfort_score(3.1, 0.0, 0.0) == 0.0
    assert comfort_score(0.0, -5.1, 0.0) == 0.0
    assert comfort_score(0.0, 0.0, 1.0) == 0.0


def test_hd_score_step_arithmetic():
    assert hd_score_step(1, 1, 1, 1) == pytest.approx(1.0)
    assert hd_score_step(0, 1, 1, 1) == 0.0
    assert hd_score_step(1, 0, 1, 1) == 0.0
    assert hd_score_step(1, 1, 0.5, 1.0) == pytest.approx((5 * 0.5 + 2) / 7)
    assert hd_score_step(1, 1, 1.0, 0.0) == pytest.approx(5 / 7)


def test_route_completion_cases():
    route = [[0.0, 0.0], [10.0, 0.0]]
    assert route_completion([[5.0, 0.5]], route) == pytest.approx(0.5)
    assert route_completion([[20.0, 0.0]], route) == 1.0
    # monotone: driving backwards never loses credit
    path = [[0, 0], [6, 0], [3, 0]]
    assert route_completion(path, route) == pytest.approx(0.6)
    # multi-segment arc length
    bent = [[0, 0], [10, 0], [10, 10]]
    assert route_completion([[10.0, 5.0]], bent) == pytest.approx(0.75)
    with pytest.raises(ConfigError):
        route_completion([[0, 0]], [[1.0, 1.0]])
    with pytest.raises(ConfigError):
        route_completion([[0, 0]], [[1.0, 1.0], [1.0, 1.0]])


def test_score_trace_and_report(tmp_path):
    trace = ScoreTrace()
    trace.append(1, 1, 1, 1)
    trace.append(1, 1, 0.0, 1.0)
    trace.r_c = 0.5
    per_step = trace.step_scores()
    assert per_step == pytest.approx([1.0, 2 / 7])
    assert hd_score(trace) == pytest.approx(0.5 * (1.0 + 2 / 7) / 2)
    report = score_report(trace)
    assert report["R_c"] == 0.5
    assert report["sub_score_means"]["TTC"] == pytest.approx(0.5)
    path = tmp_path / "score.json"
    write_score_report(trace, path)
    assert json.loads(path.read_text())["hd_score"] == pytest.approx(hd_score(trace))
    with pytest.raises(ConfigError, match="sub-score"):
        trace.append(1, 1, 1.5, 1)
    assert hd_score(ScoreTrace()) == 0.0


# -- reconstruction metrics --------------------------------------------------------

def test_psnr_oracle(rng):
    ref = rng.uniform(0, 1, (16, 16, 3))
    assert psnr(ref, ref) == 99.0
    noisy = ref + 0.1
    assert psnr(np.clip(noisy, 0, 2), ref) == pytest.approx(20.0, abs=0.5)
    assert psnr(ref, ref, peak=2.0) == 99.0


def test_ssim_bounds(rng):
    ref = rng.uniform(0, 1, (32, 32, 3))
    assert ssim(ref, ref) == pytest.approx(1.0, abs=1e-9)
    assert ssim(1.0 - ref, ref) < 0.5
    gray = rng.uniform(0, 1, (32, 32))
    assert ssim(gray, gray) == pytest.approx(1.0, abs=1e-9)


def test_pose_error_oracle():
    th = 0.3
    r = np.array([[math.cos(th), -math.sin(th), 0],
                  [math.sin(th), math.cos(th), 0],
                  [0, 0, 1.0]])
    e_r, e_t = pose_error(r, [1.0, 0.0, 0.0], np.eye(3), [0.0, 0.0, 0.0])
    assert e_r == pytest.approx(th)
    assert e_t == pytest.approx(1.0)
    e_r, _ = pose_error(np.eye(3), [0, 0, 0], np.eye(3), [0, 0, 0])
    assert e_r == 0.0


def test_chamfer_semantic_oracle():
    ref = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0]])
    labels = np.array([0, 0, 1])
    acc, comp, miou = chamfer_semantic(ref, labels, ref, labels)
    assert acc == 0.0 and comp == 0.0 and miou == 1.0
    pred = ref + [0.1, 0.0, 0.0]
    acc, comp, miou = chamfer_semantic(pred, labels, ref, labels)
    assert acc == pytest.approx(0.1)
    assert comp == pytest.approx(0.1)
    assert miou == 1.0
    # middle label flipped: both classes get IoU 1/2 (each has one matched
    # point and a two-point union)
    flipped = np.array([0, 1, 1])
    _, _, miou = chamfer_semantic(ref, flipped, ref, labels)
    assert miou == pytest.approx(0.5)


def test_depth_rmse_masked():
    rendered = np.array([[1.0, 2.0], [3.0, 4.0]])
    reference = np.array([[1.0, 0.0], [3.5, 0.0]])
    valid = np.array([[True, False], [True, False]])
    assert depth_rmse(rendered, reference, valid) == pytest.approx(
        math.sqrt(0.25 / 2))
    assert depth_rmse(rendered, reference, np.zeros((2, 2), bool)) == 0.0
