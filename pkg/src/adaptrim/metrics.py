"""Error and classification metrics for trial records."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["TrialRecord", "rotation_error", "translation_error", "classification_rates"]


@dataclass(frozen=True)
class TrialRecord:
    method: str
    outlier_fraction: float
    trial: int
    seed: int
    rotation_error: float | None
    translation_error: float | None
    tpr: float
    fpr: float
    chi: object
    solver_calls: int | None
    wall_time: float

    def __post_init__(self):
        if not (0.0 <= self.tpr <= 1.0 and 0.0 <= self.fpr <= 1.0):
            raise ValueError("tpr and fpr must lie in [0, 1]")
        for name in ("rotation_error", "translation_error"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")


def rotation_error(R_est, R_true) -> float:
    """Geodesic angle in radians between two rotations.

    Small angles come from the chordal distance, since
    ``||R1 - R2||_F = 2 sqrt(2) sin(theta / 2)``, which stays accurate near zero
    where ``acos`` of the trace does not. Large angles use the trace formula.
    """
    R_est = np.asarray(R_est, dtype=float)
    R_true = np.asarray(R_true, dtype=float)
    cos = (np.trace(R_est.T @ R_true) - 1.0) / 2.0
    if cos < 0.5:
        return float(math.acos(max(-1.0, cos)))
    chord = float(np.linalg.norm(R_est - R_true)) / (2.0 * math.sqrt(2.0))
    return float(2.0 * math.asin(min(1.0, chord)))


def translation_error(t_est, t_true) -> float:
    return float(np.linalg.norm(np.asarray(t_est, dtype=float) - np.asarray(t_true, dtype=float)))


def classification_rates(declared, planted, m: int) -> tuple[float, float]:
    """``(tpr, fpr)`` of declared outliers against the planted ones.

    With nothing planted, ``tpr`` is 1; with everything planted, ``fpr`` is 0.
    """
    declared = set(declared)
    planted = set(planted)
    tpr = len(declared & planted) / len(planted) if planted else 1.0
    n_inliers = m - len(planted)
    fpr = len(declared - planted) / n_inliers if n_inliers else 0.0
    return tpr, fpr
