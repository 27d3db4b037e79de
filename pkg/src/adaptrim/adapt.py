"""Adaptive trimming (ADAPT).

Each outer iteration re-ranks every measurement by its residual under the
current rejection, rejects the ``g`` largest that clear a self-discounting
threshold ``tau``, and grows ``g`` by a fixed step. The run stops when only
``v`` measurements remain or when the total residual changes by at most
``delta`` for ``T`` consecutive iterations.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import MtsProblem, OutlierSet
from .exceptions import ProblemTooSmall

__all__ = [
    "AdaptConfig",
    "AdaptResult",
    "IterationRecord",
    "Termination",
    "adapt_run",
    "tie_break_largest_g",
]

log = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    MIN_MEASUREMENTS = "MinMeasurements"
    CONVERGED = "Converged"
    CALL_CAP_REACHED = "CallCapReached"


@dataclass(frozen=True)
class AdaptConfig:
    """Tuning parameters.

    ``delta`` is in squared-residual units. ``v=None`` takes the problem's
    ``min_measurements``; ``max_solver_calls=None`` means ``4 * |M|``.
    """

    delta: float
    g_step: int
    gamma: float = 0.99
    t_conv: int = 2
    v: int | None = None
    max_solver_calls: int | None = None

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.t_conv < 1:
            raise ValueError(f"t_conv must be >= 1, got {self.t_conv}")
        if self.g_step < 1:
            raise ValueError(f"g_step must be >= 1, got {self.g_step}")
        if self.v is not None and self.v < 1:
            raise ValueError(f"v must be >= 1, got {self.v}")
        if self.max_solver_calls is not None and self.max_solver_calls < 1:
            raise ValueError("max_solver_calls must be >= 1")

    @classmethod
    def bunny(cls, **overrides) -> "AdaptConfig":
        """Registration parameters used for the Bunny experiment."""
        params = dict(t_conv=2, delta=1e-4, g_step=10, gamma=0.99)
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True)
class IterationRecord:
    t: int
    outliers: OutlierSet
    total_residual: float
    tau: float
    g: int
    discount: bool = False


@dataclass
class AdaptResult:
    outliers: OutlierSet
    estimate: Any
    trace: list[IterationRecord] = field(default_factory=list)
    solver_calls: int = 0
    termination_reason: Termination = Termination.CONVERGED
    iterations: int = 0


def tie_break_largest_g(residuals, g: int) -> OutlierSet:
    """Indices of the ``g`` largest residuals; equal values favor lower indices."""
    if g < 1:
        raise ValueError("g must be >= 1")
    r = np.asarray(residuals, dtype=float)
    # stable sort on the negated values keeps ascending index order among ties
    order = np.argsort(-r, kind="stable")
    return OutlierSet(order[: min(g, r.size)].tolist())


class _Evaluator:
    """Counts distinct rejections evaluated during one run."""

    def __init__(self, problem: MtsProblem, cap: int):
        self.problem = problem
        self.cap = cap
        self.seen: dict[OutlierSet, tuple[Any, np.ndarray, float]] = {}

    def __call__(self, outliers: OutlierSet):
        hit = self.seen.get(outliers)
        if hit is None:
            estimate, res = self.problem.solve(outliers)
            mask = np.ones(res.size, dtype=bool)
            mask[list(outliers)] = False
            hit = (estimate, res, float(res[mask].sum()))
            self.seen[outliers] = hit
        return hit

    @property
    def calls(self) -> int:
        return len(self.seen)

    def exhausted(self) -> bool:
        return self.calls >= self.cap


def adapt_run(problem: MtsProblem, config: AdaptConfig) -> AdaptResult:
    """Reject outliers from ``problem`` by adaptive trimming.

    The returned rejection always leaves at least ``v`` measurements.
    Hitting ``max_solver_calls`` ends the run early and is reported through
    ``termination_reason`` rather than raised.
    """
    m = problem.measurement_count
    v = config.v if config.v is not None else problem.min_measurements
    if m < v:
        raise ProblemTooSmall(f"{m} measurements, solver needs {v}")
    cap = config.max_solver_calls if config.max_solver_calls is not None else 4 * m
    max_reject = m - v
    evaluate = _Evaluator(problem, cap)

    empty = OutlierSet()
    estimate, res, r_prev = evaluate(empty)
    tau = float(res.max())
    g = config.g_step
    c = 0
    t = 0
    prev = empty
    trace = [IterationRecord(0, empty, r_prev, tau, g)]

    def finish(outliers, reason):
        est = evaluate(outliers)[0]
        return AdaptResult(outliers, est, trace, evaluate.calls, reason, t)

    if r_prev <= config.delta:
        # every rejection would change r by at most r(empty) <= delta, so the
        # convergence test could not tell it from noise; this also covers
        # tau = 0, which no discount can move
        return finish(empty, Termination.CONVERGED)
    if max_reject == 0:
        return finish(empty, Termination.MIN_MEASUREMENTS)

    while True:
        t += 1
        _, res_prev, _ = evaluate(prev)
        # never select more than |M| - v, else the next fit is underdetermined
        top = tie_break_largest_g(res_prev, min(g, max_reject))
        while True:
            current = OutlierSet(i for i in top if res_prev[i] >= tau)
            if current != prev and current:
                break
            # residuals w.r.t. the current candidate; for the empty set that is r(empty)
            _, res_cur, _ = evaluate(current)
            keep = np.ones(m, dtype=bool)
            keep[list(current)] = False
            tau = config.gamma * min(tau, float(res_cur[keep].max()))
            trace.append(IterationRecord(t, current, float("nan"), tau, g, discount=True))
            if evaluate.exhausted():
                log.warning("solver call cap %d reached during discount", cap)
                return finish(prev, Termination.CALL_CAP_REACHED)

        if evaluate.calls >= cap and current not in evaluate.seen:
            log.warning("solver call cap %d reached", cap)
            return finish(prev, Termination.CALL_CAP_REACHED)
        _, _, r_cur = evaluate(current)
        g += config.g_step
        trace.append(IterationRecord(t, current, r_cur, tau, g))

        if len(current) == max_reject:
            return finish(current, Termination.MIN_MEASUREMENTS)
        if abs(r_cur - r_prev) <= config.delta:
            c += 1
            if c == config.t_conv:
                return finish(current, Termination.CONVERGED)
        else:
            c = 0
        prev, r_prev = current, r_cur
