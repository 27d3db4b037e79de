"""Comparison algorithms: minimal-sample RANSAC, greedy trimming and exhaustive MTS."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import MtsProblem, OutlierFreeBound, OutlierSet, total_residual
from .exceptions import (
    Infeasible,
    InstanceTooLarge,
    NoValidSample,
    SolverDegenerate,
    TooFewInliers,
)

__all__ = [
    "RansacConfig",
    "OracleConfig",
    "ransac_run",
    "greedy_trim",
    "greedy_trim_auto",
    "brute_force_mts",
    "brute_force_rstar_k",
    "HARD_ORACLE_CAP",
]

HARD_ORACLE_CAP = 25


@dataclass(frozen=True)
class RansacConfig:
    """``inlier_threshold`` is a squared-residual cutoff; ``sample_size=None`` uses the problem's ``v``.

    With ``refit=False`` the estimate is the best sample's own model rather
    than a least-squares fit over its consensus set.
    """

    inlier_threshold: float
    max_iterations: int = 1000
    sample_size: int | None = None
    seed: int = 0
    refit: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.inlier_threshold >= 0:
            raise ValueError("inlier_threshold must be non-negative")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")

    @classmethod
    def from_bound(cls, bound: OutlierFreeBound, **kwargs) -> "RansacConfig":
        return cls(inlier_threshold=bound.per_measurement_eps, **kwargs)


@dataclass(frozen=True)
class OracleConfig:
    bound: OutlierFreeBound
    max_measurements: int = 20

    def __post_init__(self):
        if self.max_measurements > HARD_ORACLE_CAP:
            raise ValueError(f"oracle cap cannot exceed {HARD_ORACLE_CAP}")


def ransac_run(problem: MtsProblem, config: RansacConfig) -> tuple[OutlierSet, Any]:
    """Keep the largest consensus set over random minimal samples, then refit on it.

    Declared outliers are the complement of that consensus set.

    Ties in consensus size go to the sample with the lower inlier residual
    sum, then to the earlier iteration.
    """
    m = problem.measurement_count
    v = problem.min_measurements
    k = config.sample_size if config.sample_size is not None else v
    if k < v:
        raise ValueError(f"sample_size {k} is below the solver minimum {v}")
    if m < k:
        raise TooFewInliers(f"{m} measurements, sample size {k}")
    rng = np.random.default_rng(config.seed)
    best_mask = best_estimate = None
    best_key = None
    for _ in range(config.max_iterations):
        sample = tuple(sorted(rng.choice(m, size=k, replace=False).tolist()))
        try:
            estimate = problem.fit(sample)
        except SolverDegenerate:
            continue
        res = problem.residuals(estimate)
        mask = res <= config.inlier_threshold
        key = (int(mask.sum()), -float(res[mask].sum()))
        if best_key is None or key > best_key:
            best_key, best_mask, best_estimate = key, mask, estimate
    if best_mask is None:
        raise NoValidSample(f"all {config.max_iterations} samples were degenerate")

    outliers = OutlierSet(np.flatnonzero(~best_mask).tolist())
    if config.refit and m - len(outliers) >= v:
        try:
            return outliers, problem.solve(outliers)[0]
        except SolverDegenerate:
            pass
    # consensus too small or degenerate to refit: keep the sample's own model
    return outliers, best_estimate


def greedy_trim(problem: MtsProblem, k: int) -> OutlierSet:
    """Reject ``k`` measurements one at a time, each time the one whose removal
    lowers the residual most. Ties go to the lowest index."""
    m = problem.measurement_count
    if k < 0:
        raise ValueError("k must be non-negative")
    if m - k < problem.min_measurements:
        raise TooFewInliers(f"cannot reject {k} of {m} with v={problem.min_measurements}")
    outliers = OutlierSet()
    for _ in range(k):
        outliers = _greedy_step(problem, outliers)
    return outliers


def _greedy_step(problem, outliers):
    best, best_r = None, np.inf
    for i in range(problem.measurement_count):
        if i in outliers:
            continue
        cand = outliers | {i}
        try:
            r = total_residual(problem, cand)
        except SolverDegenerate:
            continue
        if r < best_r:
            best, best_r = cand, r
    if best is None:
        raise SolverDegenerate("every greedy candidate was degenerate")
    return best


def greedy_trim_auto(problem: MtsProblem, bound: OutlierFreeBound) -> OutlierSet:
    """Greedy rejection until the retained residual fits the outlier-free budget."""
    m = problem.measurement_count
    outliers = OutlierSet()
    while total_residual(problem, outliers) > bound.budget(m - len(outliers)):
        if m - len(outliers) - 1 < problem.min_measurements:
            raise Infeasible("greedy trimming exhausted the measurements")
        outliers = _greedy_step(problem, outliers)
    return outliers


def _check_cap(m, cap):
    if cap > HARD_ORACLE_CAP:
        raise ValueError(f"oracle cap cannot exceed {HARD_ORACLE_CAP}")
    if m > cap:
        raise InstanceTooLarge(f"{m} measurements exceed the exhaustive cap {cap}")


def _residual_or_inf(problem, outliers):
    try:
        return total_residual(problem, outliers)
    except SolverDegenerate:
        return np.inf


def brute_force_mts(problem: MtsProblem, config: OracleConfig) -> tuple[OutlierSet, Any]:
    """Exact MTS optimum: the first rejection, by cardinality then lexicographic
    order, whose retained residual fits the budget."""
    m = problem.measurement_count
    _check_cap(m, config.max_measurements)
    for size in range(m - problem.min_measurements + 1):
        for combo in itertools.combinations(range(m), size):
            outliers = OutlierSet(combo)
            if _residual_or_inf(problem, outliers) <= config.bound.budget(m - size):
                return outliers, problem.solve(outliers)[0]
    raise Infeasible("no admissible rejection satisfies the outlier-free budget")


def brute_force_rstar_k(problem: MtsProblem, k: int, max_measurements: int = 20) -> float:
    """Best residual over all rejections of at most ``k`` measurements."""
    m = problem.measurement_count
    _check_cap(m, max_measurements)
    if m - k < problem.min_measurements:
        raise TooFewInliers(f"cannot reject {k} of {m} with v={problem.min_measurements}")
    return min(
        _residual_or_inf(problem, combo)
        for size in range(k + 1)
        for combo in itertools.combinations(range(m), size)
    )
