"""Monte Carlo sweeps over outlier fractions, written as CSV.

Every trial draws one instance from ``base_seed + trial`` and hands the same
instance to each method, so methods are compared on identical data.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .adapt import AdaptConfig, Termination, adapt_run
from .baselines import (
    HARD_ORACLE_CAP,
    OracleConfig,
    RansacConfig,
    brute_force_mts,
    brute_force_rstar_k,
    greedy_trim,
    ransac_run,
)
from .bounds import chi_bound, format_chi
from .core import OutlierSet, total_residual
from .datagen import (
    LinearScenario,
    RegistrationScenario,
    chi2_bound,
    gen_linear,
    gen_registration,
)
from .exceptions import ConfigError, InstanceTooLarge
from .metrics import TrialRecord, classification_rates, rotation_error, translation_error

__all__ = [
    "CSV_HEADER",
    "BOUND_CSV_HEADER",
    "METHODS",
    "SweepSpec",
    "run_sweep",
    "sweep_records",
    "run_bound_experiment",
    "write_records",
    "summarize",
    "write_plot_script",
]

log = logging.getLogger(__name__)

CSV_HEADER = (
    "method,outlier_fraction,trial,seed,rotation_error,translation_error,"
    "tpr,fpr,chi,solver_calls,wall_time"
)
BOUND_CSV_HEADER = (
    "method,n_outliers,trial,seed,r_empty,r_O,r_star_k,r_star,true_ratio,"
    "refined_ratio,chi,wall_time"
)
METHODS = ("adapt", "ransac", "ransac-refit", "greedy", "oracle")
DEFAULT_FRACTIONS = tuple(round(0.1 * k, 1) for k in range(10))


@dataclass(frozen=True)
class SweepSpec:
    kind: str = "registration"
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    trials: int = 10
    methods: tuple[str, ...] = ("adapt", "ransac")
    adapt: AdaptConfig = field(default_factory=AdaptConfig.bunny)
    ransac_iterations: int = 1000
    registration: RegistrationScenario = field(default_factory=RegistrationScenario)
    linear: LinearScenario = field(default_factory=lambda: LinearScenario(n=1, m=12))
    base_seed: int = 0
    out: Path | None = None
    chi2_p: float = 0.99

    def __post_init__(self):
        if self.kind not in ("registration", "linear"):
            raise ConfigError("kind", f"expected registration or linear, got {self.kind!r}")
        if not self.fractions:
            raise ConfigError("outliers", "at least one outlier fraction is required")
        for f in self.fractions:
            if not 0.0 <= f < 1.0:
                raise ConfigError("outliers", f"fraction {f} outside [0, 1)")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if not self.methods:
            raise ConfigError("methods", "at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError("methods", f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if self.ransac_iterations < 1:
            raise ConfigError("ransac_iterations", "must be >= 1")
        if "oracle" in self.methods and self.measurement_count > 20:
            raise ConfigError("methods", f"oracle needs at most 20 measurements, scenario has {self.measurement_count}")

    @property
    def measurement_count(self) -> int:
        return self.registration.n_points if self.kind == "registration" else self.linear.m


def _instance(spec: SweepSpec, fraction: float, seed: int):
    if spec.kind == "registration":
        scen = replace(spec.registration, outlier_fraction=fraction, seed=seed)
        problem, truth = gen_registration(scen)
        bound = chi2_bound(truth.noise_sigma, dof=3, p=spec.chi2_p)
    else:
        scen = replace(spec.linear, outlier_fraction=fraction, seed=seed, n_outliers=None)
        problem, truth = gen_linear(scen)
        bound = chi2_bound(truth.noise_sigma, dof=1, p=spec.chi2_p)
    return problem, truth, bound


def _run_method(method, problem, truth, bound, spec, seed):
    """Return ``(outliers, estimate, solver_calls)``."""
    if method == "adapt":
        res = adapt_run(problem, spec.adapt)
        if res.termination_reason is Termination.CALL_CAP_REACHED:
            log.warning("ADAPT hit its solver call cap (seed %d)", seed)
        return res.outliers, res.estimate, res.solver_calls
    if method in ("ransac", "ransac-refit"):
        refit = method == "ransac-refit"
        cfg = RansacConfig.from_bound(bound, max_iterations=spec.ransac_iterations, seed=seed, refit=refit)
        outliers, estimate = ransac_run(problem, cfg)
        return outliers, estimate, cfg.max_iterations + int(refit)
    before = problem.fit_calls
    if method == "greedy":
        # greedy needs a rejection count; it is given the planted one
        outliers = greedy_trim(problem, len(truth.outliers))
    else:
        outliers, _ = brute_force_mts(problem, OracleConfig(bound))
    estimate = problem.solve(outliers)[0]
    return outliers, estimate, problem.fit_calls - before


def _chi_for(problem, outliers):
    if problem.measurement_count - len(outliers) < problem.min_measurements:
        return None
    return chi_bound(total_residual(problem, ()), total_residual(problem, outliers))


def sweep_records(spec: SweepSpec) -> list[TrialRecord]:
    records = []
    for fraction in spec.fractions:
        for trial in range(spec.trials):
            seed = spec.base_seed + trial
            problem, truth, bound = _instance(spec, fraction, seed)
            for method in spec.methods:
                problem.clear_cache()
                start = time.perf_counter()
                outliers, estimate, calls = _run_method(method, problem, truth, bound, spec, seed)
                wall = time.perf_counter() - start
                tpr, fpr = classification_rates(outliers, truth.outliers, problem.measurement_count)
                rot = trans = None
                if spec.kind == "registration":
                    rot = rotation_error(estimate.rotation, truth.transform.rotation)
                    trans = translation_error(estimate.translation, truth.transform.translation)
                records.append(
                    TrialRecord(method, fraction, trial, seed, rot, trans, tpr, fpr,
                                _chi_for(problem, outliers), calls, wall)
                )
    records.sort(key=lambda r: (r.method, r.outlier_fraction, r.trial))
    return records


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records: Sequence[TrialRecord], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in records:
        writer.writerow([
            r.method, _fmt(r.outlier_fraction), r.trial, r.seed,
            _fmt(r.rotation_error), _fmt(r.translation_error),
            _fmt(r.tpr), _fmt(r.fpr),
            "" if r.chi is None else format_chi(r.chi),
            _fmt(r.solver_calls), _fmt(r.wall_time),
        ])


def summarize(records: Sequence[TrialRecord]) -> str:
    """Mean and standard deviation per (method, fraction) cell, as a text table."""
    cells: dict[tuple[str, float], list[TrialRecord]] = {}
    for r in records:
        cells.setdefault((r.method, r.outlier_fraction), []).append(r)
    cols = ("rotation_error", "translation_error", "tpr", "fpr", "chi", "wall_time")
    lines = [f"{'method':<13}{'frac':>5}  " + "  ".join(f"{c:>22}" for c in cols)]
    for (method, frac), rows in sorted(cells.items()):
        parts = []
        for c in cols:
            vals = [getattr(r, c) for r in rows]
            vals = [float(v) for v in vals if v is not None]
            if not vals:
                parts.append(f"{'-':>22}")
                continue
            arr = np.asarray(vals)
            if np.isinf(arr).any():
                parts.append(f"{'inf':>22}")
            else:
                parts.append(f"{arr.mean():>10.3e} ± {arr.std():<9.2e}")
        lines.append(f"{method:<13}{frac:>5.2f}  " + "  ".join(parts))
    return "\n".join(lines)


def run_sweep(spec: SweepSpec, echo=print) -> list[TrialRecord]:
    """Run the sweep, write the CSV to ``spec.out`` (if set), print a summary."""
    records = sweep_records(spec)
    if spec.out is not None:
        path = Path(spec.out)
        with open(path, "w", newline="") as fh:
            write_records(records, fh)
    if echo is not None:
        echo(summarize(records))
    return records


def run_bound_experiment(
    spec: SweepSpec,
    outlier_counts: Sequence[int] = (1, 2, 3, 4),
    echo=print,
) -> list[dict]:
    """Greedy trimming against the exhaustive optimum on small linear instances.

    For each trial, greedy rejects exactly the planted number of
    measurements; the row records its true sub-optimality ratio next to the
    certificate and checks that the certificate holds before writing.
    """
    if spec.kind != "linear":
        raise ConfigError("kind", "the bound experiment runs on linear instances")
    m = spec.linear.m
    if m > 12:
        raise InstanceTooLarge(f"{m} measurements exceed the bound-experiment cap of 12")
    rows = []
    for k in outlier_counts:
        for trial in range(spec.trials):
            seed = spec.base_seed + trial
            problem, truth = gen_linear(replace(spec.linear, n_outliers=k, seed=seed))
            bound = chi2_bound(truth.noise_sigma, dof=1, p=spec.chi2_p)
            start = time.perf_counter()
            outliers = greedy_trim(problem, k)
            wall = time.perf_counter() - start
            row = _bound_row(problem, outliers, bound, m)
            if not _leq(row["true_ratio"], row["chi"]):
                raise AssertionError(f"certificate violated at k={k}, seed={seed}: {row}")
            row.update(method="greedy", n_outliers=k, trial=trial, seed=seed, wall_time=wall)
            rows.append(row)
    rows.sort(key=lambda r: (r["method"], r["n_outliers"], r["trial"]))
    if spec.out is not None:
        with open(spec.out, "w", newline="") as fh:
            _write_bound_rows(rows, fh)
    if echo is not None:
        for k in outlier_counts:
            sel = [r for r in rows if r["n_outliers"] == k]
            ratio = np.mean([r["true_ratio"] for r in sel])
            chis = [float(r["chi"]) for r in sel]
            echo(f"outliers={k}  mean true ratio={ratio:.3e}  mean chi={np.mean(chis):.3e}")
    return rows


def _bound_row(problem, outliers: OutlierSet, bound, cap) -> dict:
    r_empty = total_residual(problem, ())
    r_O = total_residual(problem, outliers)
    chi = chi_bound(r_empty, r_O)
    r_star_k = brute_force_rstar_k(problem, len(outliers), max_measurements=cap)
    den = r_empty - r_star_k
    true_ratio = (r_O - r_star_k) / den if den > 0 else 0.0
    o_star, _ = brute_force_mts(problem, OracleConfig(bound, min(cap, HARD_ORACLE_CAP)))
    r_star = total_residual(problem, o_star)
    refined = None
    if len(outliers) >= len(o_star):
        den = r_empty - r_star
        refined = (r_O - r_star) / den if den > 0 else 0.0
    return dict(r_empty=r_empty, r_O=r_O, r_star_k=r_star_k, r_star=r_star,
                true_ratio=max(true_ratio, 0.0), refined_ratio=refined, chi=chi)


def _leq(ratio, chi, rtol=1e-9, atol=1e-12) -> bool:
    return ratio <= chi or math.isclose(ratio, float(chi), rel_tol=rtol, abs_tol=atol)


def _write_bound_rows(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    cols = BOUND_CSV_HEADER.split(",")
    writer.writerow(cols)
    for r in rows:
        writer.writerow(
            [format_chi(r[c]) if c == "chi" else _fmt(r[c]) for c in cols]
        )


_PLOT_TEMPLATE = '''\
"""Plot per-fraction means with one-std bands from {csv_name}."""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else {csv_path!r}
cells = defaultdict(list)
with open(path) as fh:
    for row in csv.DictReader(fh):
        cells[(row["method"], float(row["outlier_fraction"]))].append(row)

panels = ["rotation_error", "translation_error", "tpr", "fpr", "chi", "wall_time"]
fig, axes = plt.subplots(2, 3, figsize=(13, 7))
for ax, col in zip(axes.flat, panels):
    for method in sorted({{m for m, _ in cells}}):
        fracs = sorted(f for m, f in cells if m == method)
        mean, std, xs = [], [], []
        for f in fracs:
            vals = [float(r[col]) for r in cells[(method, f)] if r[col] not in ("", "inf")]
            if vals:
                xs.append(100 * f)
                mean.append(np.mean(vals))
                std.append(np.std(vals))
        if not xs:
            continue
        mean, std = np.array(mean), np.array(std)
        ax.plot(xs, mean, marker="o", label=method)
        ax.fill_between(xs, np.maximum(mean - std, 1e-16), mean + std, alpha=0.2)
    ax.set_xlabel("outliers [%]")
    ax.set_title(col)
    if col in ("rotation_error", "translation_error", "chi", "wall_time"):
        ax.set_yscale("log")
axes.flat[0].legend()
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=120)
print(out)
'''


def write_plot_script(csv_path, script_path) -> Path:
    script_path = Path(script_path)
    script_path.write_text(
        _PLOT_TEMPLATE.format(csv_name=Path(csv_path).name, csv_path=str(csv_path))
    )
    return script_path


def records_to_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()
