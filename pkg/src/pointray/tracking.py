"""Kalman smoothing of detections across frames and the goal commit gate.

The tracker runs one constant-velocity Kalman filter per detection track
(state: bbox center, size, center velocity). Association is greedy nearest
neighbor on center distance within a gate radius, separately per label.

The goal gate buffers the most recent goal points (30 by default, capped at
one second of age) and commits their mean once the buffer is full and the
positional sample-covariance trace falls below a threshold. A flag switches
the gated quantity to pointing-direction covariance instead.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .frames import BoundingBox
from .pointing import GoalPoint

GATE_MODE_GOAL = "goal"
GATE_MODE_DIRECTION = "direction"


@dataclass(frozen=True)
class TrackerParams:
    """Kalman and association tunables; defaults suit 640-px 30 Hz streams."""

    sigma_accel: float = 200.0  # px/s^2 white acceleration on the center
    sigma_meas: float = 4.0  # px measurement noise on center and size
    miss_limit: int = 5  # consecutive unmatched frames before a track dies
    image_width: int = 640
    gate_min_px: float = 30.0
    gate_max_px: float = 150.0
    init_speed_sigma: float = 200.0  # px/s prior uncertainty on velocity


def association_gate_px(params: TrackerParams, dt: float) -> float:
    gate = 0.5 * params.image_width * dt * 4.0
    return min(max(gate, params.gate_min_px), params.gate_max_px)


class Track:
    """One tracked detection; state [cu, cv, w, h, du, dv]."""

    def __init__(self, track_id: int, bbox: BoundingBox, params: TrackerParams):
        self.id = track_id
        self.label = bbox.label
        self.confidence = bbox.confidence
        self.misses = 0
        cu, cv = bbox.center
        self.state = np.array([cu, cv, bbox.width, bbox.height, 0.0, 0.0])
        sm2 = params.sigma_meas**2
        sv2 = params.init_speed_sigma**2
        self.covariance = np.diag([sm2, sm2, sm2, sm2, sv2, sv2])
        self._params = params

    def predict(self, dt: float) -> None:
        p = self._params
        f = np.eye(6)
        f[0, 4] = dt
        f[1, 5] = dt
        sa2 = p.sigma_accel**2
        q_pos = 0.25 * dt**4 * sa2
        q_cross = 0.5 * dt**3 * sa2
        q_vel = dt**2 * sa2
        q = np.zeros((6, 6))
        for pos, vel in ((0, 4), (1, 5)):
            q[pos, pos] = q_pos
            q[pos, vel] = q[vel, pos] = q_cross
            q[vel, vel] = q_vel
        # Sizes have no velocity state; a small random walk keeps them adaptive.
        q[2, 2] = q[3, 3] = q_pos
        self.state = f @ self.state
        cov = f @ self.covariance @ f.T + q
        self.covariance = 0.5 * (cov + cov.T)

    def update(self, bbox: BoundingBox) -> None:
        p = self._params
        h = np.zeros((4, 6))
        h[0, 0] = h[1, 1] = h[2, 2] = h[3, 3] = 1.0
        r = np.eye(4) * p.sigma_meas**2
        cu, cv = bbox.center
        z = np.array([cu, cv, bbox.width, bbox.height])
        innovation = z - h @ self.state
        s = h @ self.covariance @ h.T + r
        gain = self.covariance @ h.T @ np.linalg.inv(s)
        self.state = self.state + gain @ innovation
        ikh = np.eye(6) - gain @ h
        # Joseph form keeps the covariance symmetric PSD under roundoff.
        cov = ikh @ self.covariance @ ikh.T + gain @ r @ gain.T
        self.covariance = 0.5 * (cov + cov.T)
        self.confidence = bbox.confidence
        self.misses = 0

    @property
    def center(self) -> np.ndarray:
        return self.state[:2]

    def bbox(self) -> BoundingBox:
        cu, cv, w, h = self.state[:4]
        w = max(w, 1e-6)
        h = max(h, 1e-6)
        return BoundingBox(
            cu - 0.5 * w, cv - 0.5 * h, cu + 0.5 * w, cv + 0.5 * h,
            self.label, self.confidence,
        )


@dataclass(frozen=True)
class TrackedDetection:
    """Smoothed stand-in for one input detection."""

    detection_index: int
    track_id: int
    bbox: BoundingBox


class DetectionTracker:
    """Bank of Kalman filters over face/hand detections.

    Stateful and single-threaded: frames must arrive in timestamp order from
    one caller. Output is invariant to the ordering of detections within a
    frame (they are canonically sorted before association).
    """

    def __init__(self, params: TrackerParams | None = None):
        self.params = params or TrackerParams()
        self.tracks: list[Track] = []
        self._next_id = 1

    def step(self, detections: list[BoundingBox], dt: float) -> list[TrackedDetection]:
        """Advance one frame; returns a smoothed bbox per input detection."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        for track in self.tracks:
            track.predict(dt)

        canonical = sorted(
            range(len(detections)),
            key=lambda i: (
                detections[i].label,
                detections[i].u_min,
                detections[i].v_min,
                detections[i].u_max,
                detections[i].v_max,
                -detections[i].confidence,
            ),
        )
        gate = association_gate_px(self.params, dt)
        pairs = []
        for rank, det_idx in enumerate(canonical):
            det = detections[det_idx]
            cu, cv = det.center
            for track in self.tracks:
                if track.label != det.label:
                    continue
                dist = float(np.hypot(track.state[0] - cu, track.state[1] - cv))
                if dist <= gate:
                    pairs.append((dist, track.id, rank, track, det_idx))
        pairs.sort(key=lambda p: (p[0], p[1], p[2]))

        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        assignment: dict[int, Track] = {}
        for _, track_id, _, track, det_idx in pairs:
            if track_id in matched_tracks or det_idx in matched_dets:
                continue
            matched_tracks.add(track_id)
            matched_dets.add(det_idx)
            assignment[det_idx] = track

        survivors = []
        for track in self.tracks:
            if track.id not in matched_tracks:
                track.misses += 1
                if track.misses > self.params.miss_limit:
                    continue
            survivors.append(track)
        self.tracks = survivors

        results = []
        for det_idx in canonical:
            det = detections[det_idx]
            track = assignment.get(det_idx)
            if track is not None:
                track.update(det)
            else:
                track = Track(self._next_id, det, self.params)
                self._next_id += 1
                self.tracks.append(track)
            results.append(TrackedDetection(det_idx, track.id, track.bbox()))
        results.sort(key=lambda r: r.detection_index)
        return results


@dataclass(frozen=True)
class GateParams:
    """Commit rule: full window within the age limit, covariance below tau."""

    window: int = 30
    tau: float = 0.01  # m^2, trace of the goal (x, y) sample covariance
    max_age_s: float = 1.0
    mode: str = GATE_MODE_GOAL
    tau_angle: float = 4.0  # deg^2, trace over (pitch, yaw) in direction mode

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.tau <= 0 or self.tau_angle <= 0:
            raise ValueError("covariance thresholds must be positive")
        if self.max_age_s <= 0:
            raise ValueError(f"max_age_s must be positive, got {self.max_age_s}")
        if self.mode not in (GATE_MODE_GOAL, GATE_MODE_DIRECTION):
            raise ValueError(f"mode must be 'goal' or 'direction', got {self.mode!r}")


@dataclass(frozen=True)
class CommittedGoal:
    """A goal point the gate released for navigation."""

    timestamp: float
    x: float
    y: float
    cov_trace: float


@dataclass
class _GateEntry:
    t: float
    x: float
    y: float
    pitch_deg: float | None
    yaw_deg: float | None


@dataclass
class GoalGate:
    """Windowed covariance gate over per-frame goal points."""

    params: GateParams = field(default_factory=GateParams)

    def __post_init__(self) -> None:
        self._entries: deque[_GateEntry] = deque(maxlen=self.params.window)

    def __len__(self) -> int:
        return len(self._entries)

    def reset(self) -> None:
        self._entries.clear()

    def update(
        self,
        t: float,
        goal: GoalPoint | None,
        pitch_deg: float | None = None,
        yaw_deg: float | None = None,
    ) -> CommittedGoal | None:
        """Push this frame's goal (if any) and report a commitment if due.

        Entries older than the age limit are evicted first. After a commit
        the window clears, so each gesture commits at most once.
        """
        cutoff = t - self.params.max_age_s
        while self._entries and self._entries[0].t < cutoff:
            self._entries.popleft()
        if goal is not None:
            if self.params.mode == GATE_MODE_DIRECTION and (
                pitch_deg is None or yaw_deg is None
            ):
                raise ValueError("direction-mode gating needs pitch/yaw with each goal")
            self._entries.append(_GateEntry(t, goal.x, goal.y, pitch_deg, yaw_deg))
        if len(self._entries) < self.params.window:
            return None
        if self.params.mode == GATE_MODE_GOAL:
            xs = np.array([e.x for e in self._entries])
            ys = np.array([e.y for e in self._entries])
            trace = float(np.var(xs, ddof=1) + np.var(ys, ddof=1))
            threshold = self.params.tau
        else:
            ps = np.array([e.pitch_deg for e in self._entries], dtype=float)
            yws = np.array([e.yaw_deg for e in self._entries], dtype=float)
            trace = float(np.var(ps, ddof=1) + np.var(yws, ddof=1))
            threshold = self.params.tau_angle
        if trace >= threshold:
            return None
        commit = CommittedGoal(
            timestamp=t,
            x=float(np.mean([e.x for e in self._entries])),
            y=float(np.mean([e.y for e in self._entries])),
            cov_trace=trace,
        )
        self._entries.clear()
        return commit


def commit_to_dict(commit: CommittedGoal) -> dict:
    return {
        "t": commit.timestamp,
        "committed_goal": [commit.x, commit.y],
        "cov_trace": commit.cov_trace,
    }
