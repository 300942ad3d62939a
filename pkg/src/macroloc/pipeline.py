"""End-to-end preprocessing and localisation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .binning import LookupTable, build_lookup_table
from .descriptor import InsufficientNeighborsError, collect_training_values, compute_all_descriptors
from .geometry import FeatureSet
from .matching import Correspondence, match_descriptors
from .registration import (DegenerateConfigurationError, RansacConfig, RegistrationResult,
                           ransac_register, refine_with_corners)

INDEX_VERSION = 1


class LocalizationError(RuntimeError):
    """Localisation failed; ``stage`` is one of parse, descriptor, match, ransac."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass(frozen=True, eq=False)
class PreprocessedIndex:
    reference: FeatureSet
    distance_table: LookupTable
    angle_table: LookupTable
    descriptors: dict[int, int]
    skipped: dict[int, str] = field(default_factory=dict)
    version: int = INDEX_VERSION


@dataclass(frozen=True, eq=False)
class Localization:
    result: RegistrationResult
    descriptors: dict[int, int]
    correspondences: list[Correspondence]
    wall_time: float


def build_index(reference: FeatureSet) -> PreprocessedIndex:
    distances, angles = collect_training_values(reference)
    dist_table = build_lookup_table(distances, "distance")
    angle_table = build_lookup_table(angles, "angle")
    descriptors, skipped = compute_all_descriptors(reference, dist_table, angle_table)
    return PreprocessedIndex(reference, dist_table, angle_table, descriptors, skipped)


def localize(index: PreprocessedIndex, observed: FeatureSet, cfg: RansacConfig = RansacConfig(),
             max_hamming: int = 63, refine: bool = True) -> Localization:
    """Observed-to-reference transform; raises :class:`LocalizationError` naming the failed stage."""
    t0 = time.perf_counter()
    descriptors, _ = compute_all_descriptors(observed, index.distance_table, index.angle_table)
    if not descriptors:
        raise LocalizationError(
            "descriptor", f"insufficient neighbors: no observed feature has 5 neighbours "
                          f"({len(observed)} features observed)")
    if not index.descriptors:
        raise LocalizationError("descriptor", "reference index holds no descriptors")
    matches = match_descriptors(descriptors, index.descriptors, max_hamming=max_hamming)
    if len(matches) < cfg.sample_size:
        raise LocalizationError(
            "match", f"insufficient matches: {len(matches)} < {cfg.sample_size}")
    try:
        result = ransac_register(matches, observed, index.reference, cfg)
    except DegenerateConfigurationError as exc:
        raise LocalizationError("ransac", str(exc)) from exc
    if refine:
        result = refine_with_corners(result, observed, index.reference)
    return Localization(result, descriptors, matches, time.perf_counter() - t0)


__all__ = ["InsufficientNeighborsError", "LocalizationError", "PreprocessedIndex", "Localization",
           "build_index", "localize", "INDEX_VERSION"]
