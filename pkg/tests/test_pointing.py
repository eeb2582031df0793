import json
import math

import numpy as np
import pytest

from oracles import collinearity_residual, ray_plane_oracle
from pointray.frames import BoundingBox, DetectionFrame, RoiPointSet
from pointray.geometry import CameraIntrinsics, Point3, WORLD_FRAME, world_to_camera
from pointray.pointing import (
    DegenerateDirectionError,
    EstimatorParams,
    NoGroundIntersectionError,
    NoHandError,
    estimate_frame,
    ground_intersection,
    ground_intersection_world,
    pointing_angles,
    result_to_dict,
    result_to_line,
    select_pointing_hand,
)
from pointray.roi import KeypointStrategy


def bbox(u0, v0, u1, v1, label="hand", conf=1.0):
    return BoundingBox(u0, v0, u1, v1, label=label, confidence=conf)


def wp(x, y, z):
    return Point3(x, y, z, WORLD_FRAME)


# ---------------------------------------------------------------------------
# Hand selection
# ---------------------------------------------------------------------------

def test_select_topmost_hand():
    low = bbox(10, 300, 60, 360)
    high = bbox(400, 120, 450, 180)
    assert select_pointing_hand([low, high]) is high


def test_select_single_hand():
    only = bbox(0, 0, 10, 10)
    assert select_pointing_hand([only]) is only


def test_select_tie_breaks_on_confidence_then_left():
    a = bbox(100, 50, 150, 100, conf=0.7)
    b = bbox(300, 50, 350, 100, conf=0.9)
    assert select_pointing_hand([a, b]) is b
    c = bbox(50, 50, 90, 100, conf=0.9)
    assert select_pointing_hand([b, c]) is c


def test_select_empty_raises():
    with pytest.raises(NoHandError):
        select_pointing_hand([])


# ---------------------------------------------------------------------------
# Angles
# ---------------------------------------------------------------------------

def test_angles_forward_down_diagonal():
    # ray (0, +1, -1): straight ahead and 45 degrees down
    pitch, yaw = pointing_angles((0.0, -2.0, 2.0))  # P = face - hand
    assert yaw == pytest.approx(0.0)
    assert pitch == pytest.approx(45.0)


def test_angles_horizontal_quadrant():
    pitch, yaw = pointing_angles((-3.0, -3.0, 0.0))  # ray (3, 3, 0)
    assert yaw == pytest.approx(45.0)
    assert pitch == pytest.approx(0.0)


def test_angles_straight_down_pole():
    pitch, yaw = pointing_angles((0.0, 0.0, 1.0))  # ray (0, 0, -1)
    assert pitch == pytest.approx(90.0)
    assert yaw == 0.0


def test_angles_scale_invariant():
    rng = np.random.default_rng(13)
    for _ in range(300):
        p = rng.uniform(-1, 1, 3)
        if np.linalg.norm(p) < 1e-6:
            continue
        k = float(rng.uniform(0.01, 100.0))
        a1 = pointing_angles(p)
        a2 = pointing_angles(k * p)
        assert a1[0] == pytest.approx(a2[0], abs=1e-9)
        assert a1[1] == pytest.approx(a2[1], abs=1e-9)


def test_angles_ranges():
    rng = np.random.default_rng(19)
    for _ in range(500):
        p = rng.uniform(-1, 1, 3)
        if np.linalg.norm(p) < 1e-6:
            continue
        pitch, yaw = pointing_angles(p)
        assert abs(pitch) <= 90.0
        assert -180.0 < yaw <= 180.0


def test_angles_zero_vector_raises():
    with pytest.raises(DegenerateDirectionError):
        pointing_angles((0.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# Ground intersection
# ---------------------------------------------------------------------------

def test_ground_intersection_worked_example():
    # face (0, 0, 1.6), hand (0, 0.3, 1.2): P = (0, -0.3, 0.4), t = 4,
    # goal (0, 1.2, 0) -- cross-checked against the parametric oracle.
    face = wp(0.0, 0.0, 1.6)
    hand = wp(0.0, 0.3, 1.2)
    goal = ground_intersection_world(face, hand)
    assert goal.x == pytest.approx(0.0, abs=1e-12)
    assert goal.y == pytest.approx(1.2, abs=1e-12)
    assert goal.z == 0.0
    oracle = ray_plane_oracle((0, 0, 1.6), (0, 0.3, 1.2))
    assert np.allclose([goal.x, goal.y], oracle, atol=1e-12)


def test_ground_intersection_camera_frame_wrapper():
    intr = CameraIntrinsics(fx=500, fy=500, cx=320, cy=240, width=640, height=480,
                            camera_height=1.0)
    face_cam = world_to_camera(wp(0.0, 0.0, 1.6), intr)
    hand_cam = world_to_camera(wp(0.0, 0.3, 1.2), intr)
    goal = ground_intersection(face_cam, hand_cam, intr)
    assert goal.x == pytest.approx(0.0, abs=1e-12)
    assert goal.y == pytest.approx(1.2, abs=1e-12)


def test_ground_intersection_vertical_ray():
    goal = ground_intersection_world(wp(0.5, 2.0, 1.6), wp(0.5, 2.0, 1.2))
    assert (goal.x, goal.y) == (0.5, 2.0)


def test_ground_intersection_ascending_raises():
    with pytest.raises(NoGroundIntersectionError):
        ground_intersection_world(wp(0, 0, 1.2), wp(0, 0.3, 1.6))
    with pytest.raises(NoGroundIntersectionError):
        ground_intersection_world(wp(0, 0, 1.6), wp(0, 0.3, 1.6 - 1e-9))


def test_ground_intersection_matches_oracle_bulk():
    rng = np.random.default_rng(37)
    checked = 0
    while checked < 10_000:
        f = np.array([rng.uniform(-3, 3), rng.uniform(0.3, 6), rng.uniform(0.8, 2.2)])
        h = f + np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                          -rng.uniform(1e-5, 0.8)])
        oracle = ray_plane_oracle(f, h)
        if oracle is None:
            continue
        goal = ground_intersection_world(wp(*f), wp(*h))
        assert math.hypot(goal.x - oracle[0], goal.y - oracle[1]) < 1e-9
        assert collinearity_residual((goal.x, goal.y), f, h) < 1e-9
        checked += 1


def test_goal_translates_with_keypoints():
    rng = np.random.default_rng(41)
    for _ in range(200):
        f = np.array([rng.uniform(-2, 2), rng.uniform(0.5, 5), rng.uniform(1.0, 2.0)])
        h = f + np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                          -rng.uniform(0.1, 0.7)])
        off = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), 0.0])
        g1 = ground_intersection_world(wp(*f), wp(*h))
        g2 = ground_intersection_world(wp(*(f + off)), wp(*(h + off)))
        assert g2.x - g1.x == pytest.approx(off[0], abs=1e-9)
        assert g2.y - g1.y == pytest.approx(off[1], abs=1e-9)


# ---------------------------------------------------------------------------
# Frame-level estimation
# ---------------------------------------------------------------------------

def roi(label, box, samples):
    return RoiPointSet(label, np.array(samples, dtype=float).reshape(-1, 3),
                       BoundingBox(*box, label=label))


def face_roi(z=2.0):
    return roi("face", (300, 80, 360, 160), [[330, 120, z], [331, 121, z]])


def hand_roi(z=1.8, box=(300, 250, 350, 300)):
    cu, cv = 0.5 * (box[0] + box[2]), 0.5 * (box[1] + box[3])
    return roi("hand", box, [[cu, cv, z], [cu + 1, cv + 1, z]])


PARAMS = EstimatorParams()


def test_estimate_frame_no_face(intr):
    frame = DetectionFrame(0.0, None, (hand_roi(),))
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert res.estimate is None and res.goal is None and res.reason == "no_face"


def test_estimate_frame_no_hand(intr):
    frame = DetectionFrame(0.0, face_roi(), ())
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert res.reason == "no_hand"


def test_estimate_frame_empty_roi(intr):
    # all hand samples in a corner outside the center circle
    bad_hand = roi("hand", (100, 200, 200, 260), [[101, 201, 1.5], [199, 259, 1.6]])
    frame = DetectionFrame(0.0, face_roi(), (bad_hand,))
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert res.estimate is None and res.reason == "empty_roi"


def test_estimate_frame_no_cluster(intr):
    scattered = roi("hand", (100, 200, 200, 260),
                    [[120, 210, 0.8], [150, 230, 1.6], [180, 250, 2.9]])
    frame = DetectionFrame(0.0, face_roi(), (scattered,))
    res = estimate_frame(frame, KeypointStrategy.DBSCAN_CLUSTER, PARAMS, intr)
    assert res.estimate is None and res.reason == "no_cluster"


def test_estimate_frame_no_ground_hit(intr):
    # hand above the face in world height: ray ascends
    frame = DetectionFrame(0.0, face_roi(z=2.0), (hand_roi(z=2.0, box=(300, 10, 350, 60)),))
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert res.estimate is not None
    assert res.goal is None and res.reason == "no_ground_hit"


def test_estimate_frame_success_schema(intr):
    frame = DetectionFrame(0.25, face_roi(), (hand_roi(),))
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert res.estimate is not None and res.goal is not None and res.reason is None
    est = res.estimate
    # direction must equal face - hand componentwise
    d = est.face_kp - est.hand_kp
    assert tuple(d) == est.direction
    rec = result_to_dict(res)
    assert set(rec) == {"t", "face", "hand", "pitch_deg", "yaw_deg", "goal", "reason"}
    parsed = json.loads(result_to_line(res))
    assert parsed["t"] == 0.25
    assert parsed["reason"] is None
    assert len(parsed["goal"]) == 2


def test_estimate_frame_failure_record(intr):
    frame = DetectionFrame(1.0, None, ())
    rec = result_to_dict(estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr))
    assert rec == {"t": 1.0, "face": None, "hand": None, "pitch_deg": None,
                   "yaw_deg": None, "goal": None, "reason": "no_face"}


def test_estimate_frame_selects_topmost_hand(intr):
    top = hand_roi(z=1.5, box=(200, 100, 250, 150))
    low = hand_roi(z=0.9, box=(400, 300, 450, 350))
    frame = DetectionFrame(0.0, face_roi(), (low, top))
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert res.estimate.hand_kp.to_array()[1] == pytest.approx(1.5, abs=1e-9)


def test_estimate_frame_goal_collinearity(intr):
    frame = DetectionFrame(0.0, face_roi(), (hand_roi(),))
    res = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    f = res.estimate.face_kp.to_array()
    h = res.estimate.hand_kp.to_array()
    assert collinearity_residual((res.goal.x, res.goal.y), f, h) < 1e-9


def test_estimate_frame_deterministic(intr):
    frame = DetectionFrame(0.0, face_roi(), (hand_roi(),))
    r1 = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    r2 = estimate_frame(frame, KeypointStrategy.MEAN_DEPTH, PARAMS, intr)
    assert result_to_line(r1) == result_to_line(r2)


def test_estimator_params_validation():
    with pytest.raises(ValueError):
        EstimatorParams(cobb_ratio=0.0)
    with pytest.raises(ValueError):
        EstimatorParams(dbscan_eps=-1.0)
    with pytest.raises(ValueError):
        EstimatorParams(dbscan_min_pts=0)
