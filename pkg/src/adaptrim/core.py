"""Problem abstraction shared by every trimming algorithm.

A problem is a finite measurement set ``M = {0, ..., m-1}`` plus a global
solver that fits any subset of ``M`` exactly. All residuals are squared
norms, so thresholds live in squared units too.
"""
from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

import numpy as np

from .exceptions import TooFewInliers

__all__ = [
    "OutlierSet",
    "OutlierFreeBound",
    "MtsProblem",
    "total_residual",
    "residual_vector",
]


class OutlierSet:
    """Immutable set of rejected measurement indices.

    Iteration is in ascending index order; equality and hashing ignore
    construction order, and compare equal to plain ``set``/``frozenset``.
    """

    __slots__ = ("_items", "_frozen")

    def __init__(self, indices: Iterable[int] = ()):
        items = []
        for i in indices:
            if isinstance(i, (bool, np.bool_)) or int(i) != i:
                raise TypeError(f"measurement index must be an integer, got {i!r}")
            i = int(i)
            if i < 0:
                raise ValueError(f"measurement index must be non-negative, got {i}")
            items.append(i)
        frozen = frozenset(items)
        if len(frozen) != len(items):
            raise ValueError("duplicate measurement index in outlier set")
        self._frozen = frozen
        self._items = tuple(sorted(frozen))

    @classmethod
    def coerce(cls, indices, m: int | None = None) -> "OutlierSet":
        out = indices if isinstance(indices, cls) else cls(indices)
        if m is not None and out._items and out._items[-1] >= m:
            raise ValueError(f"index {out._items[-1]} out of range for {m} measurements")
        return out

    def __contains__(self, i) -> bool:
        return i in self._frozen

    def __iter__(self) -> Iterator[int]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __bool__(self) -> bool:
        return bool(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, OutlierSet):
            return self._frozen == other._frozen
        if isinstance(other, (set, frozenset)):
            return self._frozen == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._frozen)

    def __repr__(self) -> str:
        return f"OutlierSet({list(self._items)})"

    def __or__(self, other) -> "OutlierSet":
        return OutlierSet(self._frozen | frozenset(other))

    def __and__(self, other) -> "OutlierSet":
        return OutlierSet(self._frozen & frozenset(other))

    def __sub__(self, other) -> "OutlierSet":
        return OutlierSet(self._frozen - frozenset(other))

    def issubset(self, other) -> bool:
        return self._frozen <= frozenset(other)

    def as_tuple(self) -> tuple[int, ...]:
        return self._items

    def complement(self, m: int) -> tuple[int, ...]:
        """Sorted indices of ``M \\ O`` for a problem with ``m`` measurements."""
        return tuple(i for i in range(m) if i not in self._frozen)


@dataclass(frozen=True)
class OutlierFreeBound:
    """Per-measurement residual budget; the inlier set total is linear in its size."""

    per_measurement_eps: float

    def __post_init__(self):
        if not self.per_measurement_eps >= 0:
            raise ValueError("per_measurement_eps must be non-negative")

    def budget(self, n_inliers: int) -> float:
        return n_inliers * self.per_measurement_eps


class MtsProblem(ABC):
    """Estimation problem with an exact global solver over measurement subsets.

    Subclasses implement :meth:`fit` and :meth:`residuals`. Callers should go
    through :meth:`solve`, which memoizes fits by the canonical inlier set.
    The cache is guarded by a lock, so a problem may be shared across threads.
    """

    cache_size = 4096

    def __init__(self):
        self._cache: OrderedDict[tuple[int, ...], tuple[Any, np.ndarray]] = OrderedDict()
        self._lock = threading.Lock()
        self.fit_calls = 0

    @property
    @abstractmethod
    def measurement_count(self) -> int: ...

    @property
    @abstractmethod
    def min_measurements(self) -> int: ...

    @abstractmethod
    def fit(self, inliers: tuple[int, ...]) -> Any:
        """Globally optimal estimate from the measurements in ``inliers``."""

    @abstractmethod
    def residuals(self, estimate) -> np.ndarray:
        """Squared residual of every measurement in ``M`` at ``estimate``."""

    def residual(self, i: int, estimate) -> float:
        return float(self.residuals(estimate)[i])

    def solve(self, outliers) -> tuple[Any, np.ndarray]:
        """Return ``(x*(O), r(O) per measurement)`` for the rejection ``O``.

        The residual vector covers all of ``M``, rejected measurements
        included. Raises :class:`TooFewInliers` if fewer than
        ``min_measurements`` remain.
        """
        m = self.measurement_count
        outliers = OutlierSet.coerce(outliers, m)
        inliers = outliers.complement(m)
        if len(inliers) < self.min_measurements:
            raise TooFewInliers(
                f"{len(inliers)} inliers left, solver needs {self.min_measurements}"
            )
        with self._lock:
            hit = self._cache.get(inliers)
            if hit is not None:
                self._cache.move_to_end(inliers)
                return hit
        estimate = self.fit(inliers)
        res = np.asarray(self.residuals(estimate), dtype=float)
        res.setflags(write=False)
        with self._lock:
            self.fit_calls += 1
            self._cache[inliers] = (estimate, res)
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return estimate, res

    def clear_cache(self) -> None:
        with self._lock:
            self._cache.clear()


def residual_vector(problem: MtsProblem, outliers=()) -> np.ndarray:
    """Per-measurement squared residuals ``r_i(O)`` for every ``i`` in ``M``."""
    return problem.solve(outliers)[1]


def total_residual(problem: MtsProblem, outliers=()) -> float:
    """``r(O)``: the minimum residual over the measurements left after rejecting ``O``."""
    outliers = OutlierSet.coerce(outliers, problem.measurement_count)
    res = residual_vector(problem, outliers)
    keep = np.ones(problem.measurement_count, dtype=bool)
    keep[list(outliers)] = False
    return float(res[keep].sum())
