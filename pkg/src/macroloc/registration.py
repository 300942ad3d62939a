"""Rigid registration of matched features: RANSAC over centroids, SVD fitting,
and a final least-squares pass over corner points."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import FeatureSet, RigidTransform
from .matching import Correspondence

SAMPLE_SIZE = 4
COPLANARITY_EPS = 0.01


class DegenerateConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class RansacConfig:
    success_probability: float = 0.99
    inlier_ratio: float = 0.5
    sample_size: int = SAMPLE_SIZE
    inlier_threshold: float = 0.3
    rng_seed: int = 0
    coplanarity_eps: float = COPLANARITY_EPS

    def __post_init__(self):
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        self.hypotheses  # validates p, omega, m

    @property
    def hypotheses(self) -> int:
        return hypothesis_count(self.success_probability, self.inlier_ratio, self.sample_size)


@dataclass(frozen=True, eq=False)
class RegistrationResult:
    transform: RigidTransform
    inliers: tuple[Correspondence, ...]
    rmse: float
    hypotheses_used: int
    refined: bool = False


def hypothesis_count(p: float, omega: float, m: int) -> int:
    """RANSAC iterations needed to draw one all-inlier sample with probability p."""
    if not 0.0 < p < 1.0:
        raise ValueError("success probability must lie in (0, 1)")
    if not 0.0 < omega < 1.0:
        raise ValueError("inlier ratio must lie in (0, 1)")
    if m < 1:
        raise ValueError("sample size must be >= 1")
    miss = 1.0 - omega ** m
    if miss <= 0.0:
        return 1
    return max(1, math.ceil(math.log(1.0 - p) / math.log(miss)))


def triple_product(x1, x2, x3, x4) -> float:
    x1, x2, x3, x4 = (np.asarray(v, dtype=float) for v in (x1, x2, x3, x4))
    return float(np.dot(x3 - x1, np.cross(x2 - x1, x4 - x1)))


def coplanarity_check(x1, x2, x3, x4, eps: float = COPLANARITY_EPS) -> bool:
    """True when the four points are (nearly) coplanar, i.e. unusable as a sample."""
    return abs(triple_product(x1, x2, x3, x4)) < eps


def rigid_fit(source, dest, weights=None) -> RigidTransform:
    """Weighted least-squares rotation and translation taking ``source`` onto ``dest``."""
    A = np.asarray(source, dtype=float).reshape(-1, 3)
    B = np.asarray(dest, dtype=float).reshape(-1, 3)
    if A.shape != B.shape:
        raise ValueError("source and dest differ in size")
    if len(A) < 3:
        raise DegenerateConfigurationError("degenerate point set: need at least 3 pairs")
    w = np.ones(len(A)) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != (len(A),) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per pair")

    a_bar = w @ A / w.sum()
    b_bar = w @ B / w.sum()
    X = (A - a_bar).T
    Y = (B - b_bar).T
    S = X @ np.diag(w) @ Y.T
    U, sv, Vt = np.linalg.svd(S)
    if not sv[0] > 0 or sv[1] <= 1e-12 * sv[0]:
        raise DegenerateConfigurationError("degenerate point set")
    V = Vt.T
    # without this sign flip V U^T can be a reflection
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(V @ U.T))])
    R = V @ D @ U.T
    return RigidTransform(R, b_bar - R @ a_bar)


def _residuals(T: RigidTransform, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.linalg.norm(T.apply(A) - B, axis=1)


def ransac_register(correspondences: Sequence[Correspondence], observed: FeatureSet,
                    reference: FeatureSet, cfg: RansacConfig = RansacConfig()) -> RegistrationResult:
    """Observed-to-reference transform from putative centroid correspondences.

    Each hypothesis draws its sample from its own generator seeded with
    ``(rng_seed, hypothesis index)``, so the outcome does not depend on the
    evaluation order.
    """
    corr = list(correspondences)
    if len(corr) < cfg.sample_size:
        raise ValueError(f"insufficient matches: {len(corr)} < {cfg.sample_size}")
    A = np.array([observed[c.observed_id].centroid for c in corr])
    B = np.array([reference[c.reference_id].centroid for c in corr])

    n_hyp = cfg.hypotheses
    redraw_budget = 10 * n_hyp
    redraws = 0
    best = None  # (inlier count, hypothesis index, mask, transform)
    used = 0
    for h in range(n_hyp):
        rng = np.random.default_rng([cfg.rng_seed, h])
        sample = None
        while redraws <= redraw_budget:
            idx = rng.choice(len(corr), size=cfg.sample_size, replace=False)
            if (coplanarity_check(*A[idx], eps=cfg.coplanarity_eps)
                    or coplanarity_check(*B[idx], eps=cfg.coplanarity_eps)):
                redraws += 1
                continue
            sample = idx
            break
        if sample is None:
            break
        used += 1
        try:
            T = rigid_fit(A[sample], B[sample])
        except DegenerateConfigurationError:
            continue
        mask = _residuals(T, A, B) <= cfg.inlier_threshold
        count = int(mask.sum())
        if best is None or count > best[0]:
            best = (count, h, mask, T)

    if best is None:
        raise DegenerateConfigurationError("degenerate configuration")
    count, _, mask, T = best
    if count < cfg.sample_size:
        raise DegenerateConfigurationError(
            f"no consensus: best hypothesis supports only {count} correspondences")
    try:
        T = rigid_fit(A[mask], B[mask])
    except DegenerateConfigurationError:
        pass
    rmse = float(np.sqrt(np.mean(_residuals(T, A[mask], B[mask]) ** 2)))
    inliers = tuple(c for c, keep in zip(corr, mask) if keep)
    return RegistrationResult(T, inliers, rmse, used, refined=False)


def corner_pairs(result: RegistrationResult, observed: FeatureSet,
                 reference: FeatureSet) -> tuple[np.ndarray, np.ndarray, int]:
    """Point pairs used for refinement, plus how many inliers contributed corners.

    Each observed corner is paired with the reference corner of its matched
    feature nearest to it under the current transform; features without
    corner data on either side contribute their centroids.
    """
    src, dst = [], []
    with_corners = 0
    for c in result.inliers:
        fo, fr = observed[c.observed_id], reference[c.reference_id]
        if fo.corners is None or fr.corners is None:
            src.append(fo.centroid)
            dst.append(fr.centroid)
            continue
        with_corners += 1
        moved = result.transform.apply(fo.corners)
        d = np.linalg.norm(moved[:, None, :] - fr.corners[None, :, :], axis=2)
        for k in range(4):
            src.append(fo.corners[k])
            dst.append(fr.corners[int(np.argmin(d[k]))])
    return np.array(src).reshape(-1, 3), np.array(dst).reshape(-1, 3), with_corners


def refine_with_corners(result: RegistrationResult, observed: FeatureSet,
                        reference: FeatureSet) -> RegistrationResult:
    src, dst, with_corners = corner_pairs(result, observed, reference)
    if with_corners == 0:
        return replace(result, refined=False)
    T = rigid_fit(src, dst)
    rmse = float(np.sqrt(np.mean(_residuals(T, src, dst) ** 2)))
    return replace(result, transform=T, rmse=rmse, refined=True)
