"""Synthetic registration and regression instances, plus ASCII PLY ingestion.

Registration instances follow the usual point-cloud protocol: rotate and
translate a source cloud, add isotropic Gaussian noise, then replace a
fraction of the target points with uniform samples from the source's
axis-aligned bounding box.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special
from scipy.spatial.distance import pdist
from scipy.spatial.transform import Rotation

from .core import OutlierFreeBound, OutlierSet
from .exceptions import ParseError, TargetTooLarge, UnsupportedFormat
from .solvers import LinearProblem, RegistrationProblem, RigidTransform

__all__ = [
    "RegistrationScenario",
    "RegistrationTruth",
    "LinearScenario",
    "LinearTruth",
    "gen_registration",
    "gen_linear",
    "chi2_quantile",
    "chi2_bound",
    "load_ply",
    "downsample",
    "blob_cloud",
    "cloud_diameter",
    "BUNNY_EXTENTS",
]


def chi2_quantile(p: float, dof: int) -> float:
    """Inverse CDF of the chi-square distribution.

    Solves ``P(dof/2, q/2) = p`` for ``q`` with the regularized lower
    incomplete gamma function and a bracketing root finder.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if dof < 1 or int(dof) != dof:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    a = dof / 2.0

    def excess(q):
        return special.gammainc(a, q / 2.0) - p

    hi = max(1.0, float(dof))
    while excess(hi) < 0:
        hi *= 2.0
    return optimize.brentq(excess, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def chi2_bound(sigma: float, dof: int = 1, p: float = 0.99) -> OutlierFreeBound:
    """Per-measurement budget for squared residuals of ``dof``-dimensional Gaussian noise."""
    return OutlierFreeBound(chi2_quantile(p, dof) * sigma**2)


def cloud_diameter(points) -> float:
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return 0.0
    return float(pdist(points).max())


# axis extents, in metres, of the Stanford Bunny scan
BUNNY_EXTENTS = (0.1557, 0.1543, 0.1207)


def blob_cloud(n: int, rng: np.random.Generator, extents=BUNNY_EXTENTS) -> np.ndarray:
    """Surface samples of a lumpy, asymmetric object (body, head, two ears).

    Stand-in for a scanned model: the bounding box is stretched to
    ``extents`` and the cloud is centred on its centroid.
    """
    parts = [  # centre, radii, share of points
        ((0.0, 0.0, 0.0), (0.50, 0.36, 0.30), 0.55),
        ((0.42, 0.22, 0.05), (0.20, 0.18, 0.17), 0.25),
        ((0.50, 0.45, 0.10), (0.05, 0.16, 0.04), 0.10),
        ((0.40, 0.46, -0.02), (0.05, 0.15, 0.04), 0.10),
    ]
    counts = [int(round(share * n)) for *_, share in parts]
    counts[0] += n - sum(counts)
    chunks = []
    for (centre, radii, _), k in zip(parts, counts):
        u = rng.standard_normal((k, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        chunks.append(np.asarray(centre) + u * np.asarray(radii))
    pts = np.concatenate(chunks)
    pts = pts[rng.permutation(len(pts))]
    lo = pts.min(axis=0)
    pts = (pts - lo) / (pts.max(axis=0) - lo) * np.asarray(extents, dtype=float)
    return pts - pts.mean(axis=0)


@dataclass(frozen=True)
class RegistrationTruth:
    transform: RigidTransform
    outliers: OutlierSet
    diameter: float
    noise_sigma: float
    bbox: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class RegistrationScenario:
    """``noise_sigma_frac`` is a plain fraction of the cloud diameter (2.5e-4 is 0.025%).

    ``source`` optionally supplies the cloud (e.g. from :func:`load_ply`); it
    is subsampled to ``n_points`` when larger. ``translation_scale`` bounds
    each translation component, in diameters.
    """

    n_points: int = 453
    outlier_fraction: float = 0.0
    noise_sigma_frac: float = 2.5e-4
    seed: int = 0
    source: np.ndarray | None = field(default=None, repr=False, compare=False)
    translation_scale: float = 0.1

    def __post_init__(self):
        if self.n_points < 4:
            raise ValueError("registration needs at least 4 points")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1]")
        if self.noise_sigma_frac < 0:
            raise ValueError("noise_sigma_frac must be non-negative")

    @property
    def n_outliers(self) -> int:
        return int(round(self.outlier_fraction * self.n_points))


def gen_registration(scenario: RegistrationScenario):
    """Return ``(RegistrationProblem, RegistrationTruth)``; pure in the scenario."""
    rng = np.random.default_rng(scenario.seed)
    n = scenario.n_points
    if scenario.source is None:
        source = blob_cloud(n, rng)
    else:
        source = np.asarray(scenario.source, dtype=float)
        if len(source) > n:
            source = downsample(source, n, rng)
        elif len(source) < n:
            raise TargetTooLarge(f"source has {len(source)} points, scenario needs {n}")
    diameter = cloud_diameter(source)
    sigma = scenario.noise_sigma_frac * diameter

    R = Rotation.random(random_state=rng).as_matrix()
    t = rng.uniform(-1.0, 1.0, size=3) * scenario.translation_scale * diameter
    truth_tf = RigidTransform(R, t)
    target = truth_tf.apply(source) + sigma * rng.standard_normal(source.shape)

    lo, hi = source.min(axis=0), source.max(axis=0)
    planted = np.sort(rng.choice(n, size=scenario.n_outliers, replace=False))
    target[planted] = rng.uniform(lo, hi, size=(planted.size, 3))

    problem = RegistrationProblem(source, target)
    truth = RegistrationTruth(truth_tf, OutlierSet(planted.tolist()), diameter, sigma, (lo, hi))
    return problem, truth


@dataclass(frozen=True)
class LinearTruth:
    x: np.ndarray
    outliers: OutlierSet
    noise_sigma: float


@dataclass(frozen=True)
class LinearScenario:
    """``outlier_magnitude_range`` is in absolute units of ``y``.

    ``n_outliers`` overrides ``round(outlier_fraction * m)`` when given.
    """

    n: int = 1
    m: int = 12
    outlier_fraction: float = 0.0
    inlier_noise_sigma: float = 0.1
    outlier_magnitude_range: tuple[float, float] = (5.0, 10.0)
    seed: int = 0
    n_outliers: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.m < self.n:
            raise ValueError("need m >= n >= 1")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1]")
        if self.inlier_noise_sigma < 0:
            raise ValueError("inlier_noise_sigma must be non-negative")
        lo, hi = self.outlier_magnitude_range
        if not 0 <= lo <= hi:
            raise ValueError("outlier_magnitude_range must satisfy 0 <= lo <= hi")
        if self.n_outliers is not None and not 0 <= self.n_outliers <= self.m:
            raise ValueError("n_outliers must lie in [0, m]")

    @property
    def planted_count(self) -> int:
        if self.n_outliers is not None:
            return self.n_outliers
        return int(round(self.outlier_fraction * self.m))


def gen_linear(scenario: LinearScenario):
    """Return ``(LinearProblem, LinearTruth)``.

    Outlier offsets are redrawn until each clears the 0.99 chi-square
    budget, so the planted set is statistically distinguishable.
    """
    rng = np.random.default_rng(scenario.seed)
    n, m, sigma = scenario.n, scenario.m, scenario.inlier_noise_sigma
    x = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    y = A @ x + sigma * rng.standard_normal(m)
    planted = np.sort(rng.choice(m, size=scenario.planted_count, replace=False))
    lo, hi = scenario.outlier_magnitude_range
    floor = chi2_quantile(0.99, 1) * sigma**2
    for i in planted:
        for _ in range(10_000):
            offset = rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi)
            err = sigma * rng.standard_normal() + offset
            if err**2 > floor:
                break
        else:
            raise ValueError("outlier_magnitude_range cannot clear the chi-square budget")
        y[i] = A[i] @ x + err
    return LinearProblem(A, y), LinearTruth(x, OutlierSet(planted.tolist()), sigma)


def downsample(points, target: int, seed=None) -> np.ndarray:
    """Uniform random subset of ``target`` points, kept in original order."""
    points = np.asarray(points)
    if target > len(points):
        raise TargetTooLarge(f"cannot keep {target} of {len(points)} points")
    if target < 0:
        raise ValueError("target must be non-negative")
    if target == len(points):
        return points.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(points), size=target, replace=False))
    return points[keep]


_PLY_TYPES = {
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double",
    "int8", "uint8", "int16", "uint16", "int32", "uint32", "float32", "float64",
}


def load_ply(path: str | os.PathLike) -> np.ndarray:
    """Read vertex ``x, y, z`` from an ASCII PLY file as an ``(n, 3)`` array.

    Other vertex properties and other elements are skipped.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1)

    elements = []  # (name, count, [(prop name, is_list)])
    lineno = 1
    header_done = False
    while lineno < len(lines):
        tokens = lines[lineno].split()
        lineno += 1
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if len(tokens) < 2:
                raise ParseError("malformed format line", lineno)
            if tokens[1] != "ascii":
                raise UnsupportedFormat(f"only ASCII PLY is supported, got {tokens[1]}")
        elif key == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise ParseError("malformed element line", lineno)
            elements.append((tokens[1], int(tokens[2]), []))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", lineno)
            if len(tokens) >= 5 and tokens[1] == "list":
                elements[-1][2].append((tokens[4], True))
            elif len(tokens) == 3 and tokens[1] in _PLY_TYPES:
                elements[-1][2].append((tokens[2], False))
            else:
                raise ParseError("malformed property line", lineno)
        elif key == "end_header":
            header_done = True
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", lineno)
    if not header_done:
        raise ParseError("header ended without end_header", lineno)

    points = None
    for name, count, props in elements:
        if name != "vertex":
            lineno = _skip_rows(lines, lineno, count)
            continue
        names = [p for p, _ in props]
        if any(is_list for _, is_list in props):
            raise ParseError("list properties on vertices are not supported", lineno)
        try:
            cols = [names.index(axis) for axis in ("x", "y", "z")]
        except ValueError:
            raise ParseError("vertex element lacks x, y, z properties", lineno) from None
        points = np.empty((count, 3))
        for k in range(count):
            if lineno >= len(lines):
                raise ParseError(f"expected {count} vertices, file ended after {k}", lineno)
            row = lines[lineno].split()
            lineno += 1
            if len(row) < len(names):
                raise ParseError(f"vertex row has {len(row)} values, expected {len(names)}", lineno)
            try:
                points[k] = [float(row[c]) for c in cols]
            except ValueError:
                raise ParseError("non-numeric vertex coordinate", lineno) from None
    if points is None:
        raise ParseError("no vertex element", lineno)
    return points


def _skip_rows(lines, lineno, count):
    if lineno + count > len(lines):
        raise ParseError("file ended inside an element block", len(lines))
    return lineno + count
