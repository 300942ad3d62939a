"""From 2D detections, line segments and depth to 3D macro-features."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import Kind, MacroFeature, RigidTransform

ANGLE_THRESHOLD_DEG = 2.0
GAP_THRESHOLD_PX = 10.0
VERTICAL_TOLERANCE_DEG = 20.0
SAMPLES_PER_SIDE = 20
MIN_VALID_SAMPLES = 8
LINE_OUTLIER_THRESHOLD = 0.05
MERGE_RADIUS = 0.5

DEPTH_MAGIC = b"MRDEPTH1"


class SideNotFoundError(ValueError):
    pass


class InsufficientDepthError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    def project(self, p) -> np.ndarray:
        """Pinhole projection of camera-frame points to pixels."""
        p = np.asarray(p, dtype=float)
        return np.stack([self.fx * p[..., 0] / p[..., 2] + self.cx,
                         self.fy * p[..., 1] / p[..., 2] + self.cy], axis=-1)


@dataclass(frozen=True, eq=False)
class Segment2D:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.start, dtype=float)
        e = np.asarray(self.end, dtype=float)
        if s.shape != (2,) or e.shape != (2,):
            raise ValueError("segment endpoints must be 2D points")
        if np.array_equal(s, e):
            raise ValueError("segment endpoints coincide")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def midpoint(self) -> np.ndarray:
        return (self.start + self.end) / 2.0

    @property
    def direction_deg(self) -> float:
        """Undirected orientation in [0, 180)."""
        d = self.end - self.start
        return float(np.degrees(np.arctan2(d[1], d[0])) % 180.0)

    def __eq__(self, other):
        if not isinstance(other, Segment2D):
            return NotImplemented
        return np.array_equal(self.start, other.start) and np.array_equal(self.end, other.end)

    def __repr__(self):
        return f"Segment2D({self.start.tolist()}, {self.end.tolist()})"


@dataclass(frozen=True)
class DetectionBox:
    kind: Kind
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    confidence: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("degenerate detection box")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


class DepthMap:
    """Row-major depth image in metres; non-positive or non-finite entries are invalid."""

    def __init__(self, width: int, height: int, depth):
        d = np.asarray(depth, dtype=float)
        if d.size != width * height:
            raise ValueError("depth buffer size does not match width x height")
        self.width = int(width)
        self.height = int(height)
        self.depth = d.reshape(self.height, self.width)

    def valid(self, row: int, col: int) -> bool:
        if not (0 <= row < self.height and 0 <= col < self.width):
            return False
        v = self.depth[row, col]
        return bool(np.isfinite(v) and v > 0)

    def sample(self, u: float, v: float) -> float | None:
        """Depth at pixel position (u, v) = (column, row).

        Inverse depth is interpolated bilinearly (it is affine across a
        plane); when a neighbour is invalid the nearest pixel is used.
        """
        c0, r0 = int(np.floor(u)), int(np.floor(v))
        cells = [(r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)]
        if all(self.valid(r, c) for r, c in cells):
            fu, fv = u - c0, v - r0
            w = [(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv]
            inv = sum(wi / self.depth[r, c] for wi, (r, c) in zip(w, cells))
            return float(1.0 / inv)
        r, c = int(round(v)), int(round(u))
        return float(self.depth[r, c]) if self.valid(r, c) else None

    def to_bytes(self) -> bytes:
        body = self.depth.astype("<f4").tobytes()
        return DEPTH_MAGIC + struct.pack("<II", self.width, self.height) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "DepthMap":
        if data[:8] != DEPTH_MAGIC:
            raise ValueError("not a depth map file (bad magic)")
        width, height = struct.unpack("<II", data[8:16])
        body = data[16:]
        if len(body) != 4 * width * height:
            raise ValueError("depth map payload has the wrong size")
        return cls(width, height, np.frombuffer(body, dtype="<f4").astype(float))


@dataclass(frozen=True, eq=False)
class Line3D:
    point: np.ndarray
    direction: np.ndarray

    def project(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return self.point + np.outer((p - self.point) @ self.direction, self.direction).reshape(p.shape)

    def distances(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        rel = pts - self.point
        return np.linalg.norm(rel - np.outer(rel @ self.direction, self.direction), axis=1)


def _angle_diff(a: float, b: float) -> float:
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def _try_join(s1: Segment2D, s2: Segment2D, angle_threshold: float, gap_threshold: float):
    if _angle_diff(s1.direction_deg, s2.direction_deg) > angle_threshold:
        return None
    ends1, ends2 = (s1.start, s1.end), (s2.start, s2.end)
    gap = min(np.linalg.norm(p - q) for p in ends1 for q in ends2)
    if gap > gap_threshold:
        return None
    pts = ends1 + ends2
    best, pair = -1.0, None
    for i in range(4):
        for j in range(i + 1, 4):
            d = np.linalg.norm(pts[i] - pts[j])
            if d > best:
                best, pair = d, (pts[i], pts[j])
    return Segment2D(*pair)


def join_segments(segments: Iterable[Segment2D], angle_threshold: float = ANGLE_THRESHOLD_DEG,
                  gap_threshold: float = GAP_THRESHOLD_PX) -> list[Segment2D]:
    """Merge broken segments until no pair is both parallel and end-to-end close."""
    segs = list(segments)
    merged = True
    while merged:
        merged = False
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                joined = _try_join(segs[i], segs[j], angle_threshold, gap_threshold)
                if joined is not None:
                    segs[i] = joined
                    del segs[j]
                    merged = True
                    break
            if merged:
                break
    return segs


def select_vertical_sides(box: DetectionBox, segments: Sequence[Segment2D],
                          gap_threshold: float = GAP_THRESHOLD_PX,
                          vertical_tolerance: float = VERTICAL_TOLERANCE_DEG,
                          ) -> tuple[Segment2D, Segment2D]:
    """The longest near-vertical segments on the left and right halves of a box."""
    left, right = [], []
    for s in segments:
        mx, my = s.midpoint
        if not (box.x_min - gap_threshold <= mx <= box.x_max + gap_threshold
                and box.y_min - gap_threshold <= my <= box.y_max + gap_threshold):
            continue
        if _angle_diff(s.direction_deg, 90.0) > vertical_tolerance:
            continue
        dl, dr = abs(mx - box.x_min), abs(mx - box.x_max)
        (left if dl <= dr else right).append((s, dl if dl <= dr else dr))
    picked = []
    for name, cands in (("left", left), ("right", right)):
        if not cands:
            raise SideNotFoundError(f"side not found: no {name} vertical segment")
        # longest wins; nearer to the edge breaks length ties
        picked.append(min(cands, key=lambda sd: (-sd[0].length, sd[1]))[0])
    return picked[0], picked[1]


def back_project(p2, d: float, K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame 3D point seen at pixel ``p2`` with depth ``d``."""
    if not d > 0:
        raise ValueError("invalid depth")
    u, v = float(p2[0]), float(p2[1])
    return np.array([d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d])


def _principal_line(pts: np.ndarray) -> Line3D:
    centroid = pts.mean(axis=0)
    _, sv, Vt = np.linalg.svd(pts - centroid)
    if sv[0] <= 1e-12 * max(1.0, np.abs(pts).max()):
        raise ValueError("points are coincident")
    direction = Vt[0]
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    return Line3D(centroid, direction)


def fit_line_3d(points, outlier_threshold: float = LINE_OUTLIER_THRESHOLD) -> Line3D:
    """Orthogonal-regression line, refitted once after dropping far points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise ValueError("too few inliers")
    first = _principal_line(pts)
    keep = pts[first.distances(pts) <= outlier_threshold]
    if len(keep) < 3:
        raise ValueError("too few inliers")
    return _principal_line(keep)


def _closest_on_line_to_ray(line: Line3D, ray: np.ndarray) -> np.ndarray:
    # ray through the camera origin; solve for the closest pair of points
    r = ray / np.linalg.norm(ray)
    b = float(line.direction @ r)
    denom = 1.0 - b * b
    if denom < 1e-12:
        return line.point
    p = line.point
    s = (b * float(p @ r) - float(p @ line.direction)) / denom
    return p + s * line.direction


def _side_corners(seg: Segment2D, depth: DepthMap, K: CameraIntrinsics,
                  n_samples: int, min_valid: int) -> tuple[np.ndarray, np.ndarray]:
    ts = np.linspace(0.0, 1.0, n_samples)
    pix = seg.start + ts[:, None] * (seg.end - seg.start)
    pts, valid = [], []
    for u, v in pix:
        d = depth.sample(u, v)
        valid.append(d is not None)
        if d is not None:
            pts.append(back_project((u, v), d, K))
    if len(pts) < min_valid:
        raise InsufficientDepthError(
            f"insufficient depth: {len(pts)} of {n_samples} samples valid, need {min_valid}")
    line = fit_line_3d(pts)
    ends = []
    for k, ok in ((0, valid[0]), (n_samples - 1, valid[-1])):
        u, v = pix[k]
        if ok:
            ends.append(line.project(back_project((u, v), depth.sample(u, v), K)))
        else:
            ray = np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])
            ends.append(_closest_on_line_to_ray(line, ray))
    # order (top, bottom) by image row
    if pix[0][1] <= pix[-1][1]:
        return ends[0], ends[1]
    return ends[1], ends[0]


def reconstruct_feature(box: DetectionBox, segments: Sequence[Segment2D], depth: DepthMap,
                        K: CameraIntrinsics, camera_pose: RigidTransform, feature_id: int = 0,
                        n_samples: int = SAMPLES_PER_SIDE,
                        min_valid: int = MIN_VALID_SAMPLES) -> MacroFeature:
    """3D door/window from its detection box; ``camera_pose`` maps camera to world.

    Corners are ordered left-top, left-bottom, right-top, right-bottom.
    """
    left, right = select_vertical_sides(box, segments)
    lt, lb = _side_corners(left, depth, K, n_samples, min_valid)
    rt, rb = _side_corners(right, depth, K, n_samples, min_valid)
    corners = camera_pose.apply(np.array([lt, lb, rt, rb]))
    return MacroFeature.from_corners(feature_id, box.kind, corners)


def merge_duplicate_features(features: Sequence[MacroFeature],
                             merge_radius: float = MERGE_RADIUS) -> list[MacroFeature]:
    """Collapse same-kind features linked by centroid gaps within ``merge_radius``.

    Clusters are the connected components of the "within radius" relation.
    Each becomes one feature at the mean centroid carrying the lowest id; its
    corners are the lowest-id member's quad, shifted onto the new centroid.
    """
    feats = sorted(features, key=lambda f: f.id)
    n = len(feats)
    cluster = [-1] * n
    groups = []
    for seed in range(n):
        if cluster[seed] >= 0:
            continue
        cluster[seed] = len(groups)
        members, frontier = [seed], [seed]
        while frontier:
            i = frontier.pop()
            for j in range(n):
                if cluster[j] < 0 and feats[j].kind is feats[i].kind and \
                        np.linalg.norm(feats[j].centroid - feats[i].centroid) <= merge_radius:
                    cluster[j] = cluster[seed]
                    members.append(j)
                    frontier.append(j)
        groups.append(sorted(members))
    out = []
    for members in groups:
        first = feats[members[0]]
        centroid = np.mean([feats[m].centroid for m in members], axis=0)
        if first.corners is None:
            out.append(MacroFeature(first.id, first.kind, centroid))
        else:
            corners = first.corners - first.centroid + centroid
            out.append(MacroFeature.from_corners(first.id, first.kind, corners))
    return out
