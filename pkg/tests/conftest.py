import numpy as np
import pytest

from macroloc.geometry import FeatureSet, Kind, MacroFeature


def random_feature_set(rng, n, spread=10.0, min_gap=0.5):
    """Random typed centroids with a minimum pairwise gap (so neighbour order is stable)."""
    pts = np.empty((0, 3))
    while len(pts) < n:
        p = rng.uniform(-spread, spread, size=3)
        if len(pts) == 0 or np.sqrt(((pts - p) ** 2).sum(axis=1)).min() >= min_gap:
            pts = np.vstack([pts, p])
    kinds = rng.integers(0, 2, size=n)
    return FeatureSet(MacroFeature(i, Kind.WINDOW if k else Kind.DOOR, p)
                      for i, (p, k) in enumerate(zip(pts, kinds)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
