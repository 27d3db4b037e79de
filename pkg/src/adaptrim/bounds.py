"""A-posteriori sub-optimality certificate for a candidate rejection.

For any rejection ``O``::

    (r(O) - r*_|O|) / (r(empty) - r*_|O|)  <=  chi_O  =  r(O) / (r(empty) - r(O))

where ``r*_k`` is the best residual over rejections of at most ``k``
measurements. ``chi_O`` needs only two solver calls; the left-hand side
needs exhaustive search and is reported only for small instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real

from .core import MtsProblem, OutlierFreeBound, OutlierSet, total_residual
from .exceptions import InstanceTooLarge, InvalidResiduals

__all__ = ["UNBOUNDED", "BoundReport", "chi_bound", "bound_report", "format_chi"]

# tolerate round-off when a rejection buys (numerically) nothing
_REL_TOL = 1e-12


class _Unbounded:
    """The certificate when rejecting bought no residual reduction.

    Compares greater than every real number; ``float()`` gives ``inf`` and
    ``str()`` gives ``"inf"``.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __str__(self):
        return "inf"

    def __float__(self):
        return math.inf

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("adaptrim.UNBOUNDED")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()


def format_chi(chi) -> str:
    if chi is UNBOUNDED:
        return "inf"
    return repr(float(chi))


def chi_bound(r_empty: float, r_O: float):
    """``r_O / (r_empty - r_O)``; 0 when ``r_O`` is 0, ``UNBOUNDED`` when nothing was gained."""
    if r_O < 0 or r_empty < 0:
        raise InvalidResiduals("residuals must be non-negative")
    slack = _REL_TOL * max(r_empty, 1.0)
    if r_O > r_empty + slack:
        raise InvalidResiduals(f"r(O)={r_O!r} exceeds r(empty)={r_empty!r}")
    if r_O == 0:
        return 0.0
    gain = r_empty - r_O
    if gain <= 0:
        return UNBOUNDED
    return r_O / gain


@dataclass(frozen=True)
class BoundReport:
    r_empty: float
    r_O: float
    chi: Real | _Unbounded
    cardinality: int
    r_star_k: float | None = None
    r_star: float | None = None
    true_ratio: float | None = None
    refined_ratio: float | None = None

    def holds(self) -> bool | None:
        """Whether the certified inequality holds; ``None`` without exact values."""
        if self.true_ratio is None:
            return None
        return self.true_ratio <= self.chi or math.isclose(
            self.true_ratio, float(self.chi), rel_tol=1e-9, abs_tol=1e-12
        )


def _ratio(r_O: float, r_empty: float, reference: float) -> float:
    den = r_empty - reference
    if den <= 0:
        # reference equals r(empty), so r(O) cannot beat it either
        return 0.0
    return max(r_O - reference, 0.0) / den


def bound_report(
    problem: MtsProblem,
    outliers,
    exact: bool = False,
    bound: OutlierFreeBound | None = None,
    max_measurements: int = 20,
) -> BoundReport:
    """Certificate for ``outliers``; with ``exact`` also the brute-force optima."""
    m = problem.measurement_count
    outliers = OutlierSet.coerce(outliers, m)
    if exact and m > max_measurements:
        raise InstanceTooLarge(f"{m} measurements exceed the exhaustive cap {max_measurements}")
    r_empty = total_residual(problem, ())
    r_O = total_residual(problem, outliers)
    chi = chi_bound(r_empty, r_O)
    if not exact:
        return BoundReport(r_empty, r_O, chi, len(outliers))

    from .baselines import OracleConfig, brute_force_mts, brute_force_rstar_k

    r_star_k = brute_force_rstar_k(problem, len(outliers), max_measurements=max_measurements)
    true_ratio = _ratio(r_O, r_empty, r_star_k)
    r_star = refined = None
    if bound is not None:
        o_star, _ = brute_force_mts(problem, OracleConfig(bound, max_measurements))
        r_star = total_residual(problem, o_star)
        if len(outliers) >= len(o_star):
            refined = _ratio(r_O, r_empty, r_star)
    return BoundReport(r_empty, r_O, chi, len(outliers), r_star_k, r_star, true_ratio, refined)
