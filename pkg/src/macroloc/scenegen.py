"""Synthetic building layouts with a known frame offset, for closed-loop testing.

Observed feature ids equal the id of the reference feature they came from;
spurious features get ids above every reference id. That is the ground-truth
labelling used for match scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import FeatureSet, Kind, MacroFeature, RigidTransform, inverse, random_rotation
from .reconstruction import CameraIntrinsics, DepthMap, DetectionBox, Segment2D

LAYOUTS = ("corridor", "grid", "ring", "wall")

# width, bottom height, top height (metres)
QUAD_SIZE = {Kind.DOOR: (0.9, 0.0, 2.1), Kind.WINDOW: (1.2, 0.9, 2.4)}
MIN_SEPARATION = 0.3
SLOT_CLEARANCE = 0.3
MIN_FEATURES = 6


def random_transform(rng: np.random.Generator, max_offset: float = 10.0) -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-max_offset, max_offset, size=3))


@dataclass(frozen=True, eq=False)
class SceneSpec:
    layout: str = "corridor"
    door_count: int = 20
    window_count: int = 10
    extent: tuple[float, float, float] = (60.0, 8.0, 3.0)
    noise_sigma: float = 0.0
    dropout_rate: float = 0.0
    spurious_rate: float = 0.0
    transform: RigidTransform | None = None
    rng_seed: int = 42

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.door_count < 0 or self.window_count < 0:
            raise ValueError("feature counts must be non-negative")
        if self.door_count + self.window_count < MIN_FEATURES:
            raise ValueError(f"need at least {MIN_FEATURES} features for descriptors")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        for name in ("dropout_rate", "spurious_rate"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        if self.transform is None:
            rng = np.random.default_rng([self.rng_seed, 7])
            object.__setattr__(self, "transform", random_transform(rng))

    @property
    def feature_count(self) -> int:
        return self.door_count + self.window_count


def wall_quad(kind: Kind, center_xy, along) -> np.ndarray:
    """Corners of a wall-mounted quad, ordered left-top, left-bottom, right-top, right-bottom.

    ``along`` is the horizontal wall direction; "left" is the ``-along`` side.
    """
    width, z0, z1 = QUAD_SIZE[kind]
    c = np.array([center_xy[0], center_xy[1], 0.0])
    a = np.array([along[0], along[1], 0.0]) / math.hypot(along[0], along[1])
    lo, hi = c - a * width / 2, c + a * width / 2
    up = np.array([0.0, 0.0, 1.0])
    return np.array([lo + up * z1, lo + up * z0, hi + up * z1, hi + up * z0])


ROOM_MODULES = (3.0, 3.6, 4.2, 4.8, 5.4, 6.0)
CORRIDOR_WIDTH = 2.4


def _wall_slots(count: int, length: float, min_step: float, layout: str) -> list[float]:
    step = length / count
    if step < min_step:
        raise ValueError(f"{count} features do not fit a {length} m {layout} wall")
    return [step * (k + 0.5) for k in range(count)]


def _place_walls(spec: SceneSpec, rng: np.random.Generator):
    """Corridor (two facing walls) or a single wall: even slots with jitter."""
    L, W, _ = spec.extent
    n = spec.feature_count
    kinds = [Kind.DOOR] * spec.door_count + [Kind.WINDOW] * spec.window_count
    kinds = [kinds[k] for k in rng.permutation(n)]
    walls = [(0.0, 1.0)] if spec.layout == "wall" else [(0.0, 1.0), (W, -1.0)]
    min_step = max(w for w, _, _ in QUAD_SIZE.values()) + SLOT_CLEARANCE
    placed = []
    k = 0
    for w_idx, (y, direction) in enumerate(walls):
        count = n // len(walls) + (1 if w_idx < n % len(walls) else 0)
        if count == 0:
            continue
        step = L / count
        for x in _wall_slots(count, L, min_step, spec.layout):
            kind = kinds[k]
            k += 1
            slack = max(0.0, (step - QUAD_SIZE[kind][0] - SLOT_CLEARANCE) / 2.0)
            x = x + rng.uniform(-slack, slack)
            if direction < 0:
                x = L - x
            placed.append((kind, wall_quad(kind, (x, y), (direction, 0.0))))
    return placed


def _place_ring(spec: SceneSpec, rng: np.random.Generator):
    """Evenly spaced around a circle, no jitter: deliberately self-similar."""
    n = spec.feature_count
    kinds = [Kind.DOOR] * spec.door_count + [Kind.WINDOW] * spec.window_count
    kinds = [kinds[k] for k in rng.permutation(n)]
    radius = spec.extent[0] / 2.0
    min_step = max(w for w, _, _ in QUAD_SIZE.values()) + SLOT_CLEARANCE
    if 2 * math.pi * radius / n < min_step:
        raise ValueError(f"{n} features do not fit a ring of diameter {spec.extent[0]} m")
    placed = []
    for k, kind in enumerate(kinds):
        th = 2 * math.pi * k / n
        pos = (radius * math.cos(th), radius * math.sin(th))
        placed.append((kind, wall_quad(kind, pos, (-math.sin(th), math.cos(th)))))
    return placed


def _place_grid(spec: SceneSpec, rng: np.random.Generator):
    """Two rows of rooms either side of a central corridor.

    Room widths are drawn from a small set of building modules. Every room
    has one door on the corridor wall (near either end or centred); windows
    go on the outer walls of randomly chosen rooms, centred in the room.
    """
    L, W, _ = spec.extent
    depth = (W - CORRIDOR_WIDTH) / 2.0
    if depth < 2.0:
        raise ValueError("extent too narrow for rooms either side of a corridor")
    rooms = []  # (side, x0, width)
    for side, count in enumerate((spec.door_count - spec.door_count // 2, spec.door_count // 2)):
        widths = rng.choice(ROOM_MODULES, size=count)
        if widths.sum() > L:
            raise ValueError(f"{count} rooms do not fit along a {L} m floor")
        x0 = (L - widths.sum()) / 2.0
        for w in widths:
            rooms.append((side, x0, float(w)))
            x0 += float(w)
    if not rooms:
        raise ValueError("grid layout needs at least one door")
    windows_per_room = np.zeros(len(rooms), dtype=int)
    for k in range(spec.window_count):
        free = np.flatnonzero(windows_per_room == windows_per_room.min())
        windows_per_room[rng.choice(free)] += 1

    placed = []
    half = CORRIDOR_WIDTH / 2.0
    door_w = QUAD_SIZE[Kind.DOOR][0]
    for (side, x0, w), n_win in zip(rooms, windows_per_room):
        sign = 1.0 if side == 0 else -1.0
        inset = door_w / 2 + 0.15
        x = x0 + (inset, w / 2.0, w - inset)[rng.integers(3)]
        placed.append((Kind.DOOR, wall_quad(Kind.DOOR, (x, sign * half), (1.0, 0.0))))
        win_w = QUAD_SIZE[Kind.WINDOW][0]
        if n_win * (win_w + SLOT_CLEARANCE) > w:
            raise ValueError("too many windows for the room sizes")
        for j in range(n_win):
            xw = x0 + w * (j + 0.5) / n_win
            placed.append((Kind.WINDOW, wall_quad(Kind.WINDOW, (xw, sign * (half + depth)), (1.0, 0.0))))
    return placed


def generate_reference(spec: SceneSpec) -> FeatureSet:
    """Reference layout; a pure function of the scene description and its seed."""
    L, W, H = spec.extent
    if H < max(top for _, _, top in QUAD_SIZE.values()):
        raise ValueError("extent height is below the tallest feature")
    rng = np.random.default_rng([spec.rng_seed, 0])
    place = {"corridor": _place_walls, "wall": _place_walls,
             "ring": _place_ring, "grid": _place_grid}[spec.layout]
    features = [MacroFeature.from_corners(fid, kind, quad)
                for fid, (kind, quad) in enumerate(place(spec, rng))]
    _check_separation(features)
    return FeatureSet(features)


def _check_separation(features) -> None:
    pts = np.array([f.centroid for f in features])
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    np.fill_diagonal(d, np.inf)
    if d.min() < MIN_SEPARATION:
        raise ValueError("layout placed two features closer than the minimum separation")


def generate_observed(reference: FeatureSet, spec: SceneSpec) -> tuple[FeatureSet, RigidTransform]:
    """Corrupted copy of ``reference`` in the observed frame, and the observed-to-reference truth.

    Corruption is applied in order: frame change, noise, dropout, spurious
    additions. Noise shifts each feature's centroid by an isotropic Gaussian
    draw and perturbs its corners about that centroid.
    """
    rng = np.random.default_rng([spec.rng_seed, 1])
    truth = spec.transform
    to_observed = inverse(truth)
    sigma = spec.noise_sigma

    observed = []
    for f in sorted(reference, key=lambda f: f.id):
        shift = rng.normal(0.0, sigma, size=3)
        centroid = to_observed.apply(f.centroid) + shift
        corners = None
        if f.corners is not None:
            wobble = rng.normal(0.0, sigma, size=(4, 3))
            corners = to_observed.apply(f.corners) + shift + wobble - wobble.mean(axis=0)
            centroid = corners.mean(axis=0)
        observed.append(MacroFeature(f.id, f.kind, centroid, corners))

    keep = rng.random(len(observed)) >= spec.dropout_rate
    observed = [f for f, k in zip(observed, keep) if k]

    n_spurious = int(round(spec.spurious_rate * len(reference)))
    if n_spurious:
        observed.extend(_spurious(reference, n_spurious, rng, to_observed))
    return FeatureSet(observed), truth


def _spurious(reference: FeatureSet, count: int, rng, to_observed: RigidTransform):
    pts = reference.centroids
    lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
    next_id = max(reference.ids) + 1
    taken = list(pts)
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValueError("no free space left for spurious features")
        kind = Kind.DOOR if rng.random() < 0.5 else Kind.WINDOW
        heading = rng.uniform(0, 2 * math.pi)
        base = rng.uniform(lo[:2], hi[:2])
        quad = wall_quad(kind, base, (math.cos(heading), math.sin(heading)))
        quad[:, 2] += rng.uniform(lo[2], hi[2]) - quad[:, 2].mean()
        c = quad.mean(axis=0)
        if min(np.linalg.norm(p - c) for p in taken) < MIN_SEPARATION:
            continue
        taken.append(c)
        out.append(MacroFeature.from_corners(next_id, kind, to_observed.apply(quad)))
        next_id += 1
    return out


def generate_scene(spec: SceneSpec) -> tuple[FeatureSet, FeatureSet, RigidTransform]:
    reference = generate_reference(spec)
    observed, truth = generate_observed(reference, spec)
    return reference, observed, truth


def default_intrinsics(image_size=(640, 480)) -> CameraIntrinsics:
    w, h = image_size
    return CameraIntrinsics(500.0, 500.0, (w - 1) / 2.0, (h - 1) / 2.0)


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera-to-world pose (x right, y down, z forward) looking from ``eye`` at ``target``."""
    eye, target, up = (np.asarray(v, dtype=float) for v in (eye, target, up))
    z = target - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return RigidTransform(np.column_stack([x, y, z]), eye)


def _split(p0, p1, pieces: int, gap_px: float) -> list[Segment2D]:
    length = float(np.linalg.norm(p1 - p0))
    d = (p1 - p0) / length
    piece = (length - gap_px * (pieces - 1)) / pieces
    out, s = [], 0.0
    for _ in range(pieces):
        out.append(Segment2D(p0 + d * s, p0 + d * (s + piece)))
        s += piece + gap_px
    return out


def render_depth_scene(feature: MacroFeature, K: CameraIntrinsics, camera_pose: RigidTransform,
                       image_size=(640, 480), split_pieces: int = 1, split_gap: float = 6.0,
                       dilate_px: float = 2.0):
    """Exact depth, detection box and vertical edge segments of one quad.

    Depth is rasterised from the quad's plane for pixels whose centre lies
    inside the projected quad grown by ``dilate_px``; everything else is
    invalid (0). ``split_pieces > 1`` breaks each edge into pieces separated
    by ``split_gap`` pixels.
    """
    if feature.corners is None:
        raise ValueError("rendering needs corner data")
    width, height = image_size
    cam = inverse(camera_pose).apply(feature.corners)
    if np.any(cam[:, 2] <= 0):
        raise ValueError("feature is behind the camera")
    pix = K.project(cam)

    # left pair = smaller u, then top = smaller v
    order = np.argsort(pix[:, 0], kind="stable")
    left = sorted(order[:2], key=lambda i: pix[i, 1])
    right = sorted(order[2:], key=lambda i: pix[i, 1])
    lt, lb, rt, rb = left[0], left[1], right[0], right[1]

    normal = np.cross(cam[lb] - cam[lt], cam[rt] - cam[lt])
    normal /= np.linalg.norm(normal)
    offset = float(normal @ cam[lt])
    u, v = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    rays = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1)
    denom = rays @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(np.abs(denom) > 1e-12, offset / denom, 0.0)

    poly = pix[[lt, lb, rb, rt]]
    area = 0.5 * sum(poly[i, 0] * poly[(i + 1) % 4, 1] - poly[(i + 1) % 4, 0] * poly[i, 1]
                     for i in range(4))
    inside = np.ones_like(u, dtype=bool)
    for i in range(4):
        a, b = poly[i], poly[(i + 1) % 4]
        e = b - a
        cross = e[0] * (v - a[1]) - e[1] * (u - a[0])
        signed = np.sign(area) * cross / np.linalg.norm(e)
        inside &= signed >= -dilate_px
    depth = np.where(inside & (z > 0), z, 0.0)

    box = DetectionBox(feature.kind, float(pix[:, 0].min()), float(pix[:, 1].min()),
                       float(pix[:, 0].max()), float(pix[:, 1].max()), 1.0)
    segments = []
    for top, bottom in ((lt, lb), (rt, rb)):
        if split_pieces > 1:
            segments.extend(_split(pix[top], pix[bottom], split_pieces, split_gap))
        else:
            segments.append(Segment2D(pix[top], pix[bottom]))
    return DepthMap(width, height, depth), box, segments
