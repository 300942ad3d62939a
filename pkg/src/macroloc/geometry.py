"""Rigid transforms, macro-features and the centroid k-d tree."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass
from typing import Iterable

import numpy as np

_ORTHO_TOL = 1e-9
_CENTROID_TOL = 1e-9


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite components")
    return arr


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion ``p -> R p + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("transform has non-finite entries")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(rotation_about(axis, angle), translation)

    @classmethod
    def from_matrix(cls, T) -> "RigidTransform":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3])

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, points) -> np.ndarray:
        """Transform a single point (3,) or an (n, 3) array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)

    def inverse(self) -> "RigidTransform":
        return inverse(self)

    def __repr__(self):
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for ``angle`` radians about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation (from a normalised Gaussian quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_angle(R) -> float:
    """Geodesic angle (radians) of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    # arccos of the trace is inaccurate near 0; the axis-angle atan2 form is not
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(np.linalg.norm(skew) / 2.0, (np.trace(R) - 1.0) / 2.0))


def apply_transform(T: RigidTransform, p) -> np.ndarray:
    return T.apply(as_point(p))


def compose(T1: RigidTransform, T2: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``T2`` first, then ``T1``."""
    R = T1.rotation @ T2.rotation
    # re-orthonormalise so long chains stay within the SO(3) tolerance
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    return RigidTransform(R, T1.rotation @ T2.translation + T1.translation)


def inverse(T: RigidTransform) -> RigidTransform:
    Rt = T.rotation.T
    return RigidTransform(Rt, -Rt @ T.translation)


class Kind(enum.Enum):
    DOOR = "door"
    WINDOW = "window"

    @property
    def type_bit(self) -> int:
        return 0 if self is Kind.DOOR else 1


@dataclass(frozen=True, eq=False)
class MacroFeature:
    """A door or window reduced to its centroid and (optionally) its corner quad."""

    id: int
    kind: Kind
    centroid: np.ndarray
    corners: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "kind", Kind(self.kind))
        c = as_point(self.centroid).copy()
        c.setflags(write=False)
        object.__setattr__(self, "centroid", c)
        if self.corners is not None:
            q = np.array(self.corners, dtype=float)
            if q.shape != (4, 3) or not np.all(np.isfinite(q)):
                raise ValueError("corners must be four finite 3D points")
            if np.max(np.abs(q.mean(axis=0) - c)) > _CENTROID_TOL:
                raise ValueError(f"feature {self.id}: centroid is not the mean of its corners")
            q.setflags(write=False)
            object.__setattr__(self, "corners", q)

    @classmethod
    def from_corners(cls, id: int, kind, corners) -> "MacroFeature":
        q = np.asarray(corners, dtype=float)
        return cls(id, kind, q.mean(axis=0), q)

    def transformed(self, T: RigidTransform) -> "MacroFeature":
        if self.corners is None:
            return MacroFeature(self.id, self.kind, T.apply(self.centroid))
        q = T.apply(self.corners)
        return MacroFeature(self.id, self.kind, q.mean(axis=0), q)

    def __repr__(self):
        return f"MacroFeature(id={self.id}, kind={self.kind.value}, centroid={self.centroid.tolist()})"


class KDTree:
    """Static 3D k-d tree with deterministic (distance, id) ordering.

    Points added through :meth:`insert` sit in a brute-force overflow list
    until the total size reaches twice the size of the last build, at which
    point the tree is rebuilt.
    """

    leaf_size = 8

    def __init__(self, points, ids):
        self._points = np.asarray(points, dtype=float).reshape(-1, 3)
        self._ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if len(self._points) != len(self._ids):
            raise ValueError("points and ids differ in length")
        self._build()

    def __len__(self):
        return len(self._points)

    def _build(self):
        n = len(self._points)
        self._built = n
        self._order = np.arange(n)
        self._nodes: list[tuple] = []
        if n:
            self._root = self._build_node(0, n)

    def _build_node(self, lo: int, hi: int) -> int:
        idx = self._order[lo:hi]
        if hi - lo <= self.leaf_size:
            self._nodes.append(("leaf", lo, hi))
            return len(self._nodes) - 1
        pts = self._points[idx]
        dim = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
        # stable ordering keeps the build deterministic for duplicate coordinates
        perm = np.lexsort((self._ids[idx], pts[:, dim]))
        self._order[lo:hi] = idx[perm]
        mid = (lo + hi) // 2
        split = float(self._points[self._order[mid], dim])
        node = len(self._nodes)
        self._nodes.append(None)
        left = self._build_node(lo, mid)
        right = self._build_node(mid, hi)
        self._nodes[node] = ("split", dim, split, left, right)
        return node

    def insert(self, point, id: int) -> None:
        self._points = np.vstack([self._points, as_point(point)])
        self._ids = np.append(self._ids, np.int64(id))
        if len(self._points) >= 2 * max(self._built, 1):
            self._build()

    def query(self, q, k: int, exclude_id: int | None = None) -> list[tuple[int, float]]:
        """k nearest (index, distance) pairs, ordered by (distance, id)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if len(self._points) == 0:
            raise ValueError("empty index")
        q = as_point(q)
        # max-heap of (-d2, -id, index) holding the current best k
        heap: list[tuple[float, int, int]] = []

        def consider(indices):
            diff = self._points[indices] - q
            d2 = np.sum(diff * diff, axis=1)
            for i, d in zip(indices.tolist(), d2.tolist()):
                pid = int(self._ids[i])
                if pid == exclude_id:
                    continue
                item = (-d, -pid, i)
                if len(heap) < k:
                    heapq.heappush(heap, item)
                elif item > heap[0]:
                    heapq.heapreplace(heap, item)

        if self._built:
            stack = [(self._root, 0.0)]
            while stack:
                node_id, bound = stack.pop()
                if len(heap) == k and bound > -heap[0][0]:
                    continue
                node = self._nodes[node_id]
                if node[0] == "leaf":
                    consider(self._order[node[1]:node[2]])
                    continue
                _, dim, split, left, right = node
                delta = q[dim] - split
                near, far = (left, right) if delta < 0 else (right, left)
                stack.append((far, max(bound, delta * delta)))
                stack.append((near, bound))
        if len(self._points) > self._built:
            consider(np.arange(self._built, len(self._points)))

        best = sorted((-d, -nid, i) for d, nid, i in heap)
        return [(i, float(np.sqrt(d))) for d, _, i in best]


class FeatureSet:
    """Immutable collection of macro-features indexed by a centroid k-d tree."""

    def __init__(self, features: Iterable[MacroFeature]):
        feats = tuple(features)
        ids = [f.id for f in feats]
        if len(set(ids)) != len(ids):
            raise ValueError("feature ids must be unique")
        self._features = feats
        self._by_id = {f.id: f for f in feats}
        self._centroids = np.array([f.centroid for f in feats], dtype=float).reshape(-1, 3)
        self._centroids.setflags(write=False)
        self.index = KDTree(self._centroids, ids)

    @property
    def features(self) -> tuple[MacroFeature, ...]:
        return self._features

    @property
    def centroids(self) -> np.ndarray:
        return self._centroids

    @property
    def ids(self) -> list[int]:
        return [f.id for f in self._features]

    def __len__(self):
        return len(self._features)

    def __iter__(self):
        return iter(self._features)

    def __contains__(self, id: int) -> bool:
        return id in self._by_id

    def __getitem__(self, id: int) -> MacroFeature:
        return self._by_id[id]

    def knn(self, query, k: int, exclude_id: int | None = None) -> list[tuple[MacroFeature, float]]:
        hits = self.index.query(query, k, exclude_id=exclude_id)
        return [(self._features[i], d) for i, d in hits]

    def transformed(self, T: RigidTransform) -> "FeatureSet":
        return FeatureSet(f.transformed(T) for f in self._features)

    def extended(self, features: Iterable[MacroFeature]) -> "FeatureSet":
        return FeatureSet(self._features + tuple(features))


def knn(fs: FeatureSet, query, k: int, exclude_id: int | None = None) -> list[tuple[MacroFeature, float]]:
    """Nearest features to ``query``; ``exclude_id`` drops the querying feature itself."""
    return fs.knn(query, k, exclude_id=exclude_id)
