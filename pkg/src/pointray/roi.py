"""Outlier rejection inside a detection ROI and keypoint estimation.

Two complementary filters remove background and spurious depth readings:

* a center-circle mask that keeps only samples within a radius of
  0.35 * min(bbox width, height) around the bbox center (fast, O(n));
* 1-D DBSCAN over the depth values, keeping the most populated cluster.

The surviving samples are summarized into a single 3D keypoint: pixel
centroid plus a depth statistic chosen by :class:`KeypointStrategy`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .frames import RoiPointSet
from .geometry import CameraIntrinsics, DepthSample, Point3, deproject

DEFAULT_COBB_RATIO = 0.35
DEFAULT_DBSCAN_EPS = 0.15  # meters; hands span well under 15 cm in depth
DEFAULT_DBSCAN_MIN_PTS = 4


class EmptyRoiError(Exception):
    """No usable samples remain in the ROI; the frame is skipped for it."""


class NoTargetClusterError(Exception):
    """Depth clustering rejected every sample as noise."""


class KeypointStrategy(Enum):
    """How the depth of an ROI keypoint is summarized."""

    MEAN_DEPTH = "mean"
    MEDIAN_DEPTH = "median"
    CLOSEST_POINT = "closest"
    DBSCAN_CLUSTER = "dbscan"

    @classmethod
    def from_name(cls, name: str) -> "KeypointStrategy":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown strategy {name!r}; expected one of "
                         f"{[m.value for m in cls]}")


@dataclass(frozen=True, eq=False)
class DepthCluster:
    """One DBSCAN cluster over depth values."""

    member_indices: np.ndarray  # ascending indices into the input array
    mean_depth: float

    @property
    def size(self) -> int:
        return int(self.member_indices.size)


def cobb_filter(roi: RoiPointSet, ratio: float = DEFAULT_COBB_RATIO) -> RoiPointSet:
    """Keep samples within ``ratio * min(w, h)`` pixels of the bbox center.

    Raises :class:`EmptyRoiError` when nothing survives.
    """
    if not 0.0 < ratio <= 0.5:
        raise ValueError(f"ratio must lie in (0, 0.5], got {ratio}")
    bbox = roi.source_bbox
    radius = ratio * min(bbox.width, bbox.height)
    cu, cv = bbox.center
    d2 = (roi.u - cu) ** 2 + (roi.v - cv) ** 2
    mask = d2 <= radius * radius
    if not mask.any():
        raise EmptyRoiError(
            f"no {roi.label} samples within {radius:.1f}px of the bbox center"
        )
    return roi.subset(mask)


def dbscan_depth(
    depths, eps: float, min_pts: int
) -> tuple[list[DepthCluster], np.ndarray]:
    """1-D DBSCAN over depth values.

    A point is core when at least ``min_pts`` samples (itself included) lie
    within ``eps`` of it. Core points whose depths differ by at most ``eps``
    are density-connected; border points join the cluster of the first core
    point (in input order) that reaches them; everything else is noise.

    Returns ``(clusters, noise_indices)``; clusters are ordered by ascending
    mean depth and each lists its member indices in ascending input order.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    depths = np.asarray(depths, dtype=float).ravel()
    n = depths.size
    if n == 0:
        return [], np.empty(0, dtype=int)

    order = np.argsort(depths, kind="stable")
    zs = depths[order]
    lo = np.searchsorted(zs, zs - eps, side="left")
    hi = np.searchsorted(zs, zs + eps, side="right")
    is_core = (hi - lo) >= min_pts

    labels = np.full(n, -1, dtype=int)  # cluster id per sorted position
    core_pos = np.flatnonzero(is_core)
    core_cluster = np.empty(core_pos.size, dtype=int)
    cid = -1
    prev_z = None
    for k, p in enumerate(core_pos):
        if prev_z is None or zs[p] - prev_z > eps:
            cid += 1
        core_cluster[k] = cid
        labels[p] = cid
        prev_z = zs[p]
    n_clusters = cid + 1

    if core_pos.size and core_pos.size < n:
        # Border points: sliding-window minimum of the cores' input indexes.
        core_z = zs[core_pos]
        core_orig = order[core_pos]
        noncore_pos = np.flatnonzero(~is_core)
        win_lo = np.searchsorted(core_z, zs[noncore_pos] - eps, side="left")
        win_hi = np.searchsorted(core_z, zs[noncore_pos] + eps, side="right")
        candidates: deque[int] = deque()
        pushed = 0
        for i, p in enumerate(noncore_pos):
            while pushed < win_hi[i]:
                while candidates and core_orig[candidates[-1]] >= core_orig[pushed]:
                    candidates.pop()
                candidates.append(pushed)
                pushed += 1
            while candidates and candidates[0] < win_lo[i]:
                candidates.popleft()
            if candidates:
                labels[p] = core_cluster[candidates[0]]

    orig_labels = np.empty(n, dtype=int)
    orig_labels[order] = labels
    clusters = []
    for c in range(n_clusters):
        members = np.flatnonzero(orig_labels == c)
        clusters.append(
            DepthCluster(member_indices=members, mean_depth=float(depths[members].mean()))
        )
    noise = np.flatnonzero(orig_labels == -1)
    return clusters, noise


def select_target_cluster(clusters: list[DepthCluster]) -> DepthCluster:
    """Largest cluster wins; equal sizes fall back to the nearer one."""
    if not clusters:
        raise NoTargetClusterError("no depth clusters to select from")
    return min(clusters, key=lambda c: (-c.size, c.mean_depth))


def estimate_keypoint(
    roi: RoiPointSet,
    strategy: KeypointStrategy,
    intr: CameraIntrinsics,
    *,
    eps: float = DEFAULT_DBSCAN_EPS,
    min_pts: int = DEFAULT_DBSCAN_MIN_PTS,
) -> Point3:
    """Summarize an ROI into one camera-frame 3D keypoint.

    The pixel location is the centroid of the retained samples; the depth is
    the strategy's statistic over their z values. For the first three
    strategies the ROI is expected to be pre-filtered (center-circle mask);
    the clustering strategy consumes the raw ROI and picks its own inliers.
    """
    if len(roi) == 0:
        raise EmptyRoiError(f"{roi.label} ROI holds no samples")
    if strategy is KeypointStrategy.DBSCAN_CLUSTER:
        clusters, _ = dbscan_depth(roi.z, eps, min_pts)
        target = select_target_cluster(clusters)
        chosen = roi.samples[target.member_indices]
        depth = target.mean_depth
    else:
        chosen = roi.samples
        if strategy is KeypointStrategy.MEAN_DEPTH:
            depth = float(np.mean(roi.z))
        elif strategy is KeypointStrategy.MEDIAN_DEPTH:
            depth = float(np.median(roi.z))
        elif strategy is KeypointStrategy.CLOSEST_POINT:
            depth = float(np.min(roi.z))
        else:
            raise ValueError(f"unhandled strategy {strategy!r}")
    u_c = float(np.mean(chosen[:, 0]))
    v_c = float(np.mean(chosen[:, 1]))
    return deproject(DepthSample(u_c, v_c, depth), intr)
