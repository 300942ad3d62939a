"""64-bit rigid-invariant macro-feature descriptors.

A feature is described by its 5 nearest neighbours. The closest one is the
base; for the other four the descriptor stores the binned distance from the
feature and the binned angle, seen from the feature, between that neighbour
and the base. Bit layout, most significant first::

    [type:1][angle1:7][dist1:8][angle2:8][dist2:8][angle3:8][dist3:8][angle4:8][dist4:8]

The type bit is 0 for doors and 1 for windows.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .binning import LookupTable, quantize
from .geometry import FeatureSet, Kind, MacroFeature

NEIGHBORS = 5
TYPE_SHIFT = 63


class InsufficientNeighborsError(ValueError):
    pass


class CoincidentCentroidsError(ValueError):
    pass


class DescriptorFields(NamedTuple):
    kind: Kind
    angles: tuple[int, int, int, int]
    dists: tuple[int, int, int, int]


def pack_descriptor(kind: Kind, angles, dists) -> int:
    kind = Kind(kind)
    angles = [int(a) for a in angles]
    dists = [int(d) for d in dists]
    if len(angles) != 4 or len(dists) != 4:
        raise ValueError("need four angle and four distance bins")
    if not 0 <= angles[0] < 128:
        raise ValueError("angle1 must fit in 7 bits")
    if any(not 0 <= v < 256 for v in angles + dists):
        raise ValueError("bin indices must fit in 8 bits")
    bits = 0
    for a, d in zip(angles, dists):
        bits = (bits << 16) | (a << 8) | d
    # angle1 < 128 leaves the top bit free for the type
    return (kind.type_bit << TYPE_SHIFT) | bits


def unpack_descriptor(bits: int) -> DescriptorFields:
    bits = int(bits)
    if not 0 <= bits < 1 << 64:
        raise ValueError("descriptor must be a 64-bit unsigned value")
    kind = Kind.WINDOW if bits >> TYPE_SHIFT else Kind.DOOR
    angles, dists = [], []
    for slot in range(4):
        shift = 48 - 16 * slot
        angles.append((bits >> (shift + 8)) & 0xFF)
        dists.append((bits >> shift) & 0xFF)
    angles[0] &= 0x7F
    return DescriptorFields(kind, tuple(angles), tuple(dists))


def descriptor_kind(bits: int) -> Kind:
    return Kind.WINDOW if int(bits) >> TYPE_SHIFT else Kind.DOOR


def neighbor_angle(a, b) -> float:
    """Angle in [0, pi] between two vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise CoincidentCentroidsError("coincident centroids")
    c = float(np.dot(a, b) / (na * nb))
    return float(np.arccos(min(1.0, max(-1.0, c))))


def _neighbor_vectors(feature: MacroFeature, fs: FeatureSet) -> np.ndarray:
    hits = fs.knn(feature.centroid, NEIGHBORS, exclude_id=feature.id)
    if len(hits) < NEIGHBORS:
        raise InsufficientNeighborsError(
            f"insufficient neighbors: feature {feature.id} has {len(hits)}, needs {NEIGHBORS}")
    vecs = np.array([nb.centroid for nb, _ in hits]) - feature.centroid
    if hits[0][1] == 0.0:
        raise CoincidentCentroidsError(f"coincident centroids at feature {feature.id}")
    return vecs


def _lengths_and_angles(vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lengths of all neighbour vectors and angles of vecs[1:] to the base vecs[0]."""
    lengths = np.sqrt((vecs * vecs).sum(axis=1))
    cos = (vecs[1:] @ vecs[0]) / (lengths[1:] * lengths[0])
    return lengths, np.arccos(np.clip(cos, -1.0, 1.0))


def compute_descriptor(feature: MacroFeature, fs: FeatureSet,
                       dist_table: LookupTable, angle_table: LookupTable) -> int:
    lengths, thetas = _lengths_and_angles(_neighbor_vectors(feature, fs))
    dists = [quantize(dist_table, float(d)) for d in lengths[1:]]
    angles = [quantize(angle_table, float(a)) for a in thetas]
    if angles[0] > 127:
        raise ValueError("angle table has more than 127 bins")
    return pack_descriptor(feature.kind, angles, dists)


def compute_all_descriptors(fs: FeatureSet, dist_table: LookupTable,
                            angle_table: LookupTable) -> tuple[dict[int, int], dict[int, str]]:
    """Descriptors for every feature that has enough neighbours.

    Returns ``(descriptors, skipped)``, both keyed by feature id in ascending
    order; ``skipped`` maps each omitted feature to the reason.
    """
    descriptors: dict[int, int] = {}
    skipped: dict[int, str] = {}
    for f in sorted(fs, key=lambda f: f.id):
        try:
            descriptors[f.id] = compute_descriptor(f, fs, dist_table, angle_table)
        except (InsufficientNeighborsError, CoincidentCentroidsError) as exc:
            skipped[f.id] = str(exc)
    return descriptors, skipped


def collect_training_values(fs: FeatureSet) -> tuple[list[float], list[float]]:
    """All neighbour distances (5 per feature) and angles (4 per feature) in ``fs``."""
    if len(fs) < NEIGHBORS + 1:
        raise InsufficientNeighborsError(
            f"insufficient neighbors: need at least {NEIGHBORS + 1} features, got {len(fs)}")
    distances: list[float] = []
    angles: list[float] = []
    for f in sorted(fs, key=lambda f: f.id):
        lengths, thetas = _lengths_and_angles(_neighbor_vectors(f, fs))
        distances.extend(lengths.tolist())
        angles.extend(thetas.tolist())
    return distances, angles


def format_descriptor(bits: int) -> str:
    return f"{int(bits):016x}"


def parse_descriptor(text: str) -> int:
    if len(text) != 16:
        raise ValueError(f"descriptor must be 16 hex digits, got {text!r}")
    return int(text, 16)
