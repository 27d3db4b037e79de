"""Command-line entry point: ``adaptrim {register,linear,bound-experiment,ply-info}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .adapt import AdaptConfig
from .datagen import LinearScenario, RegistrationScenario, cloud_diameter, load_ply
from .exceptions import AdaptrimError, ConfigError
from .harness import METHODS, SweepSpec, run_bound_experiment, run_sweep, write_plot_script

# config-file keys and how to parse them; flags with the same name win
_CONFIG_KEYS = {
    "outliers": str,
    "trials": int,
    "seed": int,
    "points": int,
    "noise-frac": float,
    "methods": str,
    "out": str,
    "ply": str,
    "gamma": float,
    "delta": float,
    "t-conv": int,
    "g-step": int,
    "ransac-iterations": int,
    "translation-scale": float,
    "m": int,
    "n": int,
    "sigma": float,
    "outlier-min": float,
    "outlier-max": float,
    "outlier-counts": str,
}


def read_config(path) -> dict:
    """Parse a ``key = value`` file; blank lines and ``#`` comments are ignored."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in _CONFIG_KEYS:
            raise ConfigError(key, f"unknown config key (line {lineno})")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r}") from None
    return values


def _floats(text, field):
    try:
        return tuple(float(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(field, f"expected numbers, got {text!r}") from None


def _ints(text, field):
    try:
        return tuple(int(x) for x in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(field, f"expected integers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override its values")
    p.add_argument("--outliers", help="outlier fractions, e.g. '0,0.1,0.5'")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="base seed; trial k uses seed + k")
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--plot-script", help="also write a matplotlib script for the CSV")
    p.add_argument("--gamma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--t-conv", type=int)
    p.add_argument("--g-step", type=int)
    p.add_argument("--ransac-iterations", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptrim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", help="3D registration sweep")
    _add_common(reg)
    reg.add_argument("--points", type=int)
    reg.add_argument("--noise-frac", type=float, help="noise sigma as a fraction of the diameter")
    reg.add_argument("--translation-scale", type=float)
    reg.add_argument("--ply", help="ASCII PLY source cloud (default: synthetic)")

    lin = sub.add_parser("linear", help="linear regression sweep")
    _add_common(lin)
    lin.add_argument("--m", type=int, help="number of measurements")
    lin.add_argument("--n", type=int, help="parameter dimension")
    lin.add_argument("--sigma", type=float, help="inlier noise standard deviation")
    lin.add_argument("--outlier-min", type=float)
    lin.add_argument("--outlier-max", type=float)

    bnd = sub.add_parser("bound-experiment", help="greedy vs exhaustive optimum on small linear instances")
    _add_common(bnd)
    bnd.add_argument("--m", type=int)
    bnd.add_argument("--n", type=int)
    bnd.add_argument("--sigma", type=float)
    bnd.add_argument("--outlier-min", type=float)
    bnd.add_argument("--outlier-max", type=float)
    bnd.add_argument("--outlier-counts", help="planted outlier counts, e.g. '1,2,3,4'")

    info = sub.add_parser("ply-info", help="summarize an ASCII PLY point cloud")
    info.add_argument("path")
    return parser


def _merged(args) -> dict:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "verbose"):
            values[key.replace("_", "-")] = value
    return values


def _spec(kind: str, v: dict) -> SweepSpec:
    adapt_kwargs = {}
    for key, field in (("gamma", "gamma"), ("delta", "delta"), ("t-conv", "t_conv"), ("g-step", "g_step")):
        if key in v:
            adapt_kwargs[field] = v[key]
    try:
        if kind == "registration":
            adapt = AdaptConfig.bunny(**adapt_kwargs)
        else:
            params = dict(delta=1e-2, g_step=1)
            params.update(adapt_kwargs)
            adapt = AdaptConfig(**params)
    except ValueError as exc:
        raise ConfigError("adapt", str(exc)) from None

    kwargs = dict(kind=kind, adapt=adapt)
    if "outliers" in v:
        kwargs["fractions"] = _floats(v["outliers"], "outliers")
    if "trials" in v:
        kwargs["trials"] = v["trials"]
    if "seed" in v:
        kwargs["base_seed"] = v["seed"]
    if "methods" in v:
        kwargs["methods"] = tuple(m.strip() for m in v["methods"].split(",") if m.strip())
    if "ransac-iterations" in v:
        kwargs["ransac_iterations"] = v["ransac-iterations"]
    if "out" in v:
        kwargs["out"] = Path(v["out"])
    try:
        if kind == "registration":
            reg = {}
            if "points" in v:
                reg["n_points"] = v["points"]
            if "noise-frac" in v:
                reg["noise_sigma_frac"] = v["noise-frac"]
            if "translation-scale" in v:
                reg["translation_scale"] = v["translation-scale"]
            if "ply" in v:
                reg["source"] = load_ply(v["ply"])
            kwargs["registration"] = RegistrationScenario(**reg)
        else:
            lin = {}
            for key, field in (("m", "m"), ("n", "n"), ("sigma", "inlier_noise_sigma")):
                if key in v:
                    lin[field] = v[key]
            if "outlier-min" in v or "outlier-max" in v:
                lo, hi = LinearScenario().outlier_magnitude_range
                lin["outlier_magnitude_range"] = (v.get("outlier-min", lo), v.get("outlier-max", hi))
            kwargs["linear"] = LinearScenario(**lin)
    except ValueError as exc:
        if isinstance(exc, AdaptrimError):
            raise
        raise ConfigError("scenario", str(exc)) from None
    return SweepSpec(**kwargs)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "ply-info":
            pts = load_ply(args.path)
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            print(f"points: {len(pts)}")
            print(f"bbox min: {np.array2string(lo, precision=6)}")
            print(f"bbox max: {np.array2string(hi, precision=6)}")
            if len(pts) <= 20000:
                print(f"diameter: {cloud_diameter(pts):.6g}")
            return 0
        values = _merged(args)
        if args.command == "bound-experiment":
            spec = _spec("linear", values)
            counts = _ints(values.get("outlier-counts", "1,2,3,4"), "outlier-counts")
            run_bound_experiment(spec, counts)
        else:
            spec = _spec("registration" if args.command == "register" else "linear", values)
            run_sweep(spec)
            if values.get("plot-script"):
                if spec.out is None:
                    raise ConfigError("plot-script", "needs --out")
                write_plot_script(spec.out, values["plot-script"])
        return 0
    except (AdaptrimError, OSError, ValueError) as exc:
        print(f"adaptrim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
