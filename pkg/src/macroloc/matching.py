"""Brute-force Hamming matching of descriptors, gated on feature type."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .descriptor import TYPE_SHIFT

MAX_HAMMING = 64


@dataclass(frozen=True)
class Correspondence:
    observed_id: int
    reference_id: int
    hamming: int


def hamming_distance(d1: int, d2: int) -> int:
    d1, d2 = int(d1), int(d2)
    if (d1 ^ d2) >> TYPE_SHIFT:
        return MAX_HAMMING
    return (d1 ^ d2).bit_count()


def hamming_matrix(observed: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Pairwise type-gated Hamming distances between two uint64 arrays."""
    x = observed[:, None] ^ reference[None, :]
    dist = np.bitwise_count(x).astype(np.int64)
    dist[(x >> np.uint64(TYPE_SHIFT)) != 0] = MAX_HAMMING
    return dist


def match_descriptors(observed: Mapping[int, int], reference: Mapping[int, int],
                      max_hamming: int = 63) -> list[Correspondence]:
    """Nearest reference descriptor for each observed one.

    Observed features whose minimum distance is shared by several reference
    descriptors are dropped as ambiguous, as are matches above
    ``max_hamming`` (type mismatches always score 64).
    """
    if not observed or not reference:
        raise ValueError("cannot match against an empty descriptor set")
    obs_ids = sorted(observed)
    ref_ids = sorted(reference)
    obs = np.array([observed[i] for i in obs_ids], dtype=np.uint64)
    ref = np.array([reference[i] for i in ref_ids], dtype=np.uint64)
    dist = hamming_matrix(obs, ref)
    best = dist.min(axis=1)
    n_best = (dist == best[:, None]).sum(axis=1)
    arg = dist.argmin(axis=1)
    limit = min(max_hamming, MAX_HAMMING - 1)
    out = []
    for row, oid in enumerate(obs_ids):
        if best[row] > limit or n_best[row] != 1:
            continue
        out.append(Correspondence(oid, ref_ids[arg[row]], int(best[row])))
    return out
