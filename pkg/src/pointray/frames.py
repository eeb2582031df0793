"""Detection-frame data model and the line-delimited JSON log format.

One log line per frame::

    {"t": 0.033,
     "face": {"bbox": [u0, v0, u1, v1], "conf": 0.98, "samples": [[u, v, z], ...]} | null,
     "hands": [{"bbox": [...], "conf": 0.91, "samples": [...]}, ...]}

Depth samples carry pixel coordinates and depth in meters; invalid depth is
never encoded (no zero sentinels), it is simply absent from ``samples``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

FACE = "face"
HAND = "hand"


class FrameFormatError(ValueError):
    """Malformed frame record (bad JSON, missing keys, invalid samples)."""


class StreamOrderError(FrameFormatError):
    """Frame timestamps must strictly increase within a stream."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel-space box for one detected face or hand."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float
    label: str
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not self.u_min < self.u_max:
            raise FrameFormatError(f"u_min must be < u_max, got [{self.u_min}, {self.u_max}]")
        if not self.v_min < self.v_max:
            raise FrameFormatError(f"v_min must be < v_max, got [{self.v_min}, {self.v_max}]")
        if self.label not in (FACE, HAND):
            raise FrameFormatError(f"label must be 'face' or 'hand', got {self.label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise FrameFormatError(f"confidence must lie in [0, 1], got {self.confidence}")

    @property
    def width(self) -> float:
        return self.u_max - self.u_min

    @property
    def height(self) -> float:
        return self.v_max - self.v_min

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))

    def contains(self, u: float, v: float) -> bool:
        return self.u_min <= u <= self.u_max and self.v_min <= v <= self.v_max

    def clamped(self, width: int, height: int) -> "BoundingBox":
        """Clip the box to image bounds (raises if nothing is left)."""
        return BoundingBox(
            max(self.u_min, 0.0),
            max(self.v_min, 0.0),
            min(self.u_max, float(width - 1)),
            min(self.v_max, float(height - 1)),
            self.label,
            self.confidence,
        )


@dataclass(frozen=True, eq=False)
class RoiPointSet:
    """Depth samples belonging to one detected region of interest.

    ``samples`` is an (n, 3) float array with columns u, v, z. All samples
    lie inside ``source_bbox`` and have positive depth; a raw detection may
    legitimately carry zero samples (the sensor returned nothing).
    """

    label: str
    samples: np.ndarray
    source_bbox: BoundingBox

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise FrameFormatError(f"samples must have shape (n, 3), got {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.label != self.source_bbox.label:
            raise FrameFormatError(
                f"label {self.label!r} does not match bbox label {self.source_bbox.label!r}"
            )
        if arr.shape[0]:
            if not (arr[:, 2] > 0).all():
                raise FrameFormatError("all depth samples must have z > 0")
            bb = self.source_bbox
            inside = (
                (arr[:, 0] >= bb.u_min)
                & (arr[:, 0] <= bb.u_max)
                & (arr[:, 1] >= bb.v_min)
                & (arr[:, 1] <= bb.v_max)
            )
            if not inside.all():
                raise FrameFormatError("depth samples must lie inside their bounding box")

    @property
    def u(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.samples[:, 2]

    def __len__(self) -> int:
        return self.samples.shape[0]

    def subset(self, mask_or_indices) -> "RoiPointSet":
        """Same bbox, restricted sample set."""
        return RoiPointSet(self.label, self.samples[mask_or_indices], self.source_bbox)

    def with_bbox(self, bbox: BoundingBox) -> "RoiPointSet":
        """Rebind to a new bbox, dropping samples that fall outside it."""
        arr = self.samples
        if arr.shape[0]:
            inside = (
                (arr[:, 0] >= bbox.u_min)
                & (arr[:, 0] <= bbox.u_max)
                & (arr[:, 1] >= bbox.v_min)
                & (arr[:, 1] <= bbox.v_max)
            )
            arr = arr[inside]
        return RoiPointSet(bbox.label, arr, bbox)


@dataclass(frozen=True, eq=False)
class DetectionFrame:
    """One timestamped set of face/hand detections with sparse depth samples."""

    timestamp: float
    face: RoiPointSet | None
    hands: tuple[RoiPointSet, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp):
            raise FrameFormatError(f"timestamp must be finite, got {self.timestamp}")
        if self.face is not None and self.face.label != FACE:
            raise FrameFormatError("face slot must hold a face-labelled ROI")
        object.__setattr__(self, "hands", tuple(self.hands))
        for h in self.hands:
            if h.label != HAND:
                raise FrameFormatError("hands slot must hold hand-labelled ROIs")


def _roi_from_dict(obj: dict, label: str, drop_bad_samples: bool) -> RoiPointSet:
    try:
        bbox_vals = obj["bbox"]
        conf = float(obj.get("conf", 1.0))
        raw = obj.get("samples", [])
    except (TypeError, KeyError) as exc:
        raise FrameFormatError(f"malformed ROI object: {exc}") from exc
    if not isinstance(bbox_vals, (list, tuple)) or len(bbox_vals) != 4:
        raise FrameFormatError(f"bbox must be [u0, v0, u1, v1], got {bbox_vals!r}")
    bbox = BoundingBox(*(float(c) for c in bbox_vals), label=label, confidence=conf)
    arr = np.asarray(raw, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise FrameFormatError(f"samples must be [[u, v, z], ...], got shape {arr.shape}")
    if drop_bad_samples and arr.shape[0]:
        ok = (
            (arr[:, 2] > 0)
            & (arr[:, 0] >= bbox.u_min)
            & (arr[:, 0] <= bbox.u_max)
            & (arr[:, 1] >= bbox.v_min)
            & (arr[:, 1] <= bbox.v_max)
        )
        arr = arr[ok]
    return RoiPointSet(label, arr, bbox)


def parse_frame(line: str, *, drop_bad_samples: bool = False) -> DetectionFrame:
    """Parse one JSON log line into a DetectionFrame.

    With ``drop_bad_samples`` the parser silently discards samples with
    non-positive depth or outside their bbox instead of rejecting the frame.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "t" not in obj:
        raise FrameFormatError("frame record must be an object with a 't' field")
    try:
        t = float(obj["t"])
    except (TypeError, ValueError) as exc:
        raise FrameFormatError(f"bad timestamp: {obj.get('t')!r}") from exc
    face_obj = obj.get("face")
    face = None if face_obj is None else _roi_from_dict(face_obj, FACE, drop_bad_samples)
    hands_obj = obj.get("hands", [])
    if not isinstance(hands_obj, list):
        raise FrameFormatError("'hands' must be an array")
    hands = tuple(_roi_from_dict(h, HAND, drop_bad_samples) for h in hands_obj)
    return DetectionFrame(t, face, hands)


def _roi_to_dict(roi: RoiPointSet) -> dict:
    bb = roi.source_bbox
    return {
        "bbox": [bb.u_min, bb.v_min, bb.u_max, bb.v_max],
        "conf": bb.confidence,
        "samples": roi.samples.tolist(),
    }


def frame_to_dict(frame: DetectionFrame) -> dict:
    return {
        "t": frame.timestamp,
        "face": None if frame.face is None else _roi_to_dict(frame.face),
        "hands": [_roi_to_dict(h) for h in frame.hands],
    }


def frame_to_line(frame: DetectionFrame) -> str:
    return json.dumps(frame_to_dict(frame), separators=(",", ":"))


def read_frames(
    lines: Iterable[str],
    *,
    errors: str = "raise",
    on_skip: Callable[[int, str], None] | None = None,
) -> Iterator[DetectionFrame]:
    """Iterate frames from JSON log lines, enforcing strictly increasing time.

    ``errors='raise'`` aborts on the first malformed line or timestamp
    regression; ``errors='skip'`` drops the offending line (reporting it via
    ``on_skip(line_number, message)``) and continues.
    """
    if errors not in ("raise", "skip"):
        raise ValueError(f"errors must be 'raise' or 'skip', got {errors!r}")
    lenient = errors == "skip"
    last_t = None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            frame = parse_frame(line, drop_bad_samples=lenient)
            if last_t is not None and frame.timestamp <= last_t:
                raise StreamOrderError(
                    f"timestamp {frame.timestamp} does not increase past {last_t}"
                )
        except FrameFormatError as exc:
            if not lenient:
                raise type(exc)(f"line {line_no}: {exc}") from exc
            if on_skip is not None:
                on_skip(line_no, str(exc))
            continue
        last_t = frame.timestamp
        yield frame
