"""KDE-driven lookup tables that quantise distances and angles into bins.

Values are smoothed with a Gaussian kernel density estimate and the density
is cut at its local minima, so values near a common local mode share a bin.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

import numpy as np

GRID_POINTS = 1024
MAX_BINS = {"distance": 255, "angle": 127}

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def silverman_bandwidth(samples) -> float:
    """Silverman's rule of thumb, ``1.06 * std * n**(-1/5)`` (std with ddof=1)."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("degenerate samples")
    sigma = float(np.std(x, ddof=1))
    if not sigma > 0.0:
        raise ValueError("degenerate samples")
    return 1.06 * sigma * n ** (-0.2)


@dataclass(frozen=True, eq=False)
class KdeModel:
    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size == 0:
            raise ValueError("KDE needs at least one sample")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @classmethod
    def fit(cls, samples) -> "KdeModel":
        return cls(samples, silverman_bandwidth(samples))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = (x[..., None] - self.samples) / self.bandwidth
        k = np.exp(-0.5 * u * u) * _INV_SQRT_2PI
        return k.sum(axis=-1) / (self.samples.size * self.bandwidth)


def kde_evaluate(model: KdeModel, x):
    return model(x)


@dataclass(frozen=True)
class LookupTable:
    """Sorted interior bin edges; a value's bin is the number of edges below it."""

    boundaries: tuple[float, ...]
    value_kind: str

    def __post_init__(self):
        b = tuple(float(v) for v in self.boundaries)
        if self.value_kind not in MAX_BINS:
            raise ValueError(f"unknown value kind {self.value_kind!r}")
        if any(not np.isfinite(v) for v in b):
            raise ValueError("boundaries must be finite")
        if any(b1 >= b2 for b1, b2 in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly ascending")
        if len(b) + 1 > MAX_BINS[self.value_kind]:
            raise ValueError(f"{self.value_kind} table exceeds {MAX_BINS[self.value_kind]} bins")
        object.__setattr__(self, "boundaries", b)

    @property
    def bin_count(self) -> int:
        return len(self.boundaries) + 1

    def __call__(self, x: float) -> int:
        return quantize(self, x)


def quantize(table: LookupTable, x: float) -> int:
    # a value equal to a boundary belongs to the upper bin
    return bisect.bisect_right(table.boundaries, float(x))


def _local_minima(density: np.ndarray) -> list[int]:
    """Interior strict local minima; a flat-bottomed minimum reports its leftmost point."""
    minima = []
    n = density.size
    i = 1
    while i < n - 1:
        if density[i] < density[i - 1]:
            j = i + 1
            while j < n and density[j] == density[i]:
                j += 1
            if j < n and density[j] > density[i]:
                minima.append(i)
            i = j
        else:
            i += 1
    return minima


def _prune_minima(density: np.ndarray, minima: list[int], keep: int) -> list[int]:
    """Drop the shallowest minima until at most ``keep`` remain.

    A minimum's depth is the smaller of the density rises to the highest
    point on its left and on its right, each side bounded by the adjacent
    retained minimum (or the grid edge).
    """
    minima = list(minima)
    while len(minima) > keep:
        edges = [0] + minima + [density.size - 1]
        depths = []
        for k, m in enumerate(minima, start=1):
            left = density[edges[k - 1]:m + 1].max()
            right = density[m:edges[k + 1] + 1].max()
            depths.append(min(left, right) - density[m])
        # argmin picks the leftmost on ties, which keeps this deterministic
        del minima[int(np.argmin(depths))]
    return minima


def _round_sig(x: float, digits: int = 12) -> float:
    return float(f"{x:.{digits}g}")


def build_lookup_table(values: Sequence[float], value_kind: str,
                       grid_points: int = GRID_POINTS) -> LookupTable:
    """Bin edges at the local minima of the Gaussian KDE of ``values``.

    Boundaries are rounded to 12 significant digits so a table written to
    disk and read back quantises identically.
    """
    if value_kind not in MAX_BINS:
        raise ValueError(f"unknown value kind {value_kind!r}")
    x = np.asarray(values, dtype=float).ravel()
    model = KdeModel.fit(x)
    h = model.bandwidth
    grid = np.linspace(x.min() - h, x.max() + h, grid_points)
    density = model(grid)
    minima = _local_minima(density)
    minima = _prune_minima(density, minima, MAX_BINS[value_kind] - 1)
    boundaries = []
    for m in minima:
        b = _round_sig(float(grid[m]))
        if not boundaries or b > boundaries[-1]:
            boundaries.append(b)
    return LookupTable(tuple(boundaries), value_kind)
