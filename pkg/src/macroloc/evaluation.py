"""Pose and matching error metrics against ground truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np

from .geometry import RigidTransform, rotation_angle
from .matching import Correspondence


@dataclass(frozen=True)
class EvalReport:
    rotation_error: float
    translation_error: float
    goal_error: float | None = None
    trajectory_pct: float | None = None
    match_accuracy: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)

    def __str__(self):
        lines = [f"rotation error:    {self.rotation_error:.6f} deg",
                 f"translation error: {self.translation_error:.6f} m"]
        if self.goal_error is not None:
            lines.append(f"goal error:        {self.goal_error:.6f} m")
        if self.trajectory_pct is not None:
            lines.append(f"goal error:        {self.trajectory_pct:.3f} % of trajectory")
        if self.match_accuracy is not None:
            lines.append(f"match accuracy:    {self.match_accuracy:.4f}")
        return "\n".join(lines)


def rotation_error_deg(estimate: RigidTransform, truth: RigidTransform) -> float:
    return float(np.degrees(rotation_angle(estimate.rotation @ truth.rotation.T)))


def translation_error(estimate: RigidTransform, truth: RigidTransform) -> float:
    return float(np.linalg.norm(estimate.translation - truth.translation))


def goal_error(estimate: RigidTransform, truth: RigidTransform, goal) -> float:
    """Distance between where the two transforms place the same goal point."""
    g = np.asarray(goal, dtype=float)
    return float(np.linalg.norm(estimate.apply(g) - truth.apply(g)))


def same_id(observed_id: int, reference_id: int) -> bool:
    return observed_id == reference_id


def match_accuracy(correspondences: Iterable[Correspondence],
                   is_correct: Callable[[int, int], bool] = same_id) -> float:
    """Fraction of correspondences that pair an observed feature with its true reference.

    The default labelling is the synthetic-scene convention where a true
    observed feature keeps its reference id. No correspondences scores 0.
    """
    corr = list(correspondences)
    if not corr:
        return 0.0
    return sum(is_correct(c.observed_id, c.reference_id) for c in corr) / len(corr)


def evaluate(estimate: RigidTransform, truth: RigidTransform, goal=None,
             trajectory_length: float | None = None,
             correspondences: Iterable[Correspondence] | None = None) -> EvalReport:
    g_err = goal_error(estimate, truth, goal) if goal is not None else None
    pct = None
    if g_err is not None and trajectory_length:
        pct = 100.0 * g_err / trajectory_length
    acc = match_accuracy(correspondences) if correspondences is not None else None
    return EvalReport(rotation_error_deg(estimate, truth), translation_error(estimate, truth),
                      g_err, pct, acc)
