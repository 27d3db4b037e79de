"""Concrete problems with exact global solvers.

``LinearProblem`` is ordinary least squares on ``y_i = a_i^T x + d_i``;
``RegistrationProblem`` is point-to-point rigid alignment solved in closed
form by the SVD variant of Horn's method.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import MtsProblem
from .exceptions import DegenerateConfiguration, RankDeficient, TooFewInliers

__all__ = [
    "LinearProblem",
    "RegistrationProblem",
    "RigidTransform",
    "linear_fit",
    "horn_fit",
    "registration_residual",
]

_DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def is_valid(self, tol: float = 1e-9) -> bool:
        R = self.rotation
        return (
            np.linalg.norm(R.T @ R - np.eye(3)) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol
        )

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T


class LinearProblem(MtsProblem):
    """Rows ``(a_i, y_i)``; the global solver is least squares, ``v = n``."""

    def __init__(self, A, y):
        super().__init__()
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        y = np.asarray(y, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != y.shape[0]:
            raise ValueError(f"design matrix {A.shape} does not match {y.shape[0]} targets")
        if A.shape[0] == 0 or A.shape[1] == 0:
            raise ValueError("empty problem")
        self.A = A
        self.y = y
        self.A.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def measurement_count(self) -> int:
        return self.A.shape[0]

    @property
    def min_measurements(self) -> int:
        return self.dim

    def fit(self, inliers):
        return linear_fit(self, inliers)

    def residuals(self, estimate) -> np.ndarray:
        return (self.y - self.A @ np.asarray(estimate, dtype=float)) ** 2


def linear_fit(problem: LinearProblem, inliers) -> np.ndarray:
    """Least-squares ``x`` over the selected rows, via a pivoted QR factorization."""
    idx = np.asarray(sorted(inliers), dtype=int)
    n = problem.dim
    if idx.size < n:
        raise TooFewInliers(f"{idx.size} rows cannot determine {n} unknowns")
    A = problem.A[idx]
    y = problem.y[idx]
    Q, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or diag[-1] <= diag[0] * max(A.shape) * np.finfo(float).eps:
        raise RankDeficient("inlier design matrix is rank deficient")
    z = linalg.solve_triangular(R, Q.T @ y)
    x = np.empty(n)
    x[piv] = z
    return x


class RegistrationProblem(MtsProblem):
    """Putative correspondences ``(p_i, p'_j)``; ``v = 3``.

    ``pairs`` defaults to index-aligned correspondences ``(k, k)``.
    """

    def __init__(self, source, target, pairs=None):
        super().__init__()
        source = np.asarray(source, dtype=float)
        target = np.asarray(target, dtype=float)
        if source.ndim != 2 or source.shape[1] != 3 or target.ndim != 2 or target.shape[1] != 3:
            raise ValueError("point clouds must be (n, 3) arrays")
        if pairs is None:
            if source.shape[0] != target.shape[0]:
                raise ValueError("index-aligned correspondences need equal cloud sizes")
            pairs = np.column_stack([np.arange(source.shape[0])] * 2)
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        if pairs.shape[0] == 0:
            raise ValueError("no correspondences")
        if pairs[:, 0].max() >= len(source) or pairs[:, 1].max() >= len(target) or pairs.min() < 0:
            raise ValueError("correspondence index out of range")
        self.source = source
        self.target = target
        self.pairs = pairs
        self._p = source[pairs[:, 0]]
        self._q = target[pairs[:, 1]]

    @property
    def measurement_count(self) -> int:
        return self.pairs.shape[0]

    @property
    def min_measurements(self) -> int:
        return 3

    @property
    def matched_source(self) -> np.ndarray:
        return self._p

    @property
    def matched_target(self) -> np.ndarray:
        return self._q

    def fit(self, inliers):
        return horn_fit(self, inliers)

    def residuals(self, estimate: RigidTransform) -> np.ndarray:
        d = estimate.apply(self._p) - self._q
        return np.einsum("ij,ij->i", d, d)

    def residual(self, i, estimate) -> float:
        return registration_residual(self, i, estimate)


def _horn(p: np.ndarray, q: np.ndarray) -> RigidTransform:
    p_bar = p.mean(axis=0)
    q_bar = q.mean(axis=0)
    H = (p - p_bar).T @ (q - q_bar)
    U, s, Vt = np.linalg.svd(H)
    # rotation is unidentifiable when the two smaller singular values both vanish
    if s[0] == 0.0 or s[1] <= _DEGENERACY_RTOL * s[0]:
        raise DegenerateConfiguration("selected points are collinear or coincident")
    V = Vt.T
    d = 1.0 if np.linalg.det(V @ U.T) > 0 else -1.0
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    t = q_bar - R @ p_bar
    return RigidTransform(R, t)


def horn_fit(problem: RegistrationProblem, inliers) -> RigidTransform:
    """Closed-form least-squares rigid transform over the selected correspondences."""
    idx = np.asarray(sorted(inliers), dtype=int)
    if idx.size < 3:
        raise TooFewInliers(f"{idx.size} correspondences cannot determine a rigid transform")
    return _horn(problem.matched_source[idx], problem.matched_target[idx])


def registration_residual(problem: RegistrationProblem, i: int, x: RigidTransform) -> float:
    d = x.rotation @ problem.matched_source[i] + x.translation - problem.matched_target[i]
    return float(d @ d)
