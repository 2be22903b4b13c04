"""Command line front end: predict | simulate | verify.

Reads one flat JSON config describing an experiment, evaluates the
closed-form steady-state prediction and/or runs the seeded Monte Carlo
ensemble, and writes machine-readable results plus plot-ready CSV
curves.

Exit codes: 0 pass, 1 config or flag error, 2 unstable parameters,
3 numerical breakdown during simulation, 4 verification failure.

Every numeric output is a pure function of (config file, flags); wall
clock only ever enters ``manifest.json``.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from numpy.random import SeedSequence

from . import __version__
from .filters import FilterParams, NumericalBreakdownError
from .simulate import (EnsembleStats, ExperimentConfig, SystemSpec, Tolerances,
                       compare, gen_system, run_ensemble)
from .theory import InstabilityError, SignalModel, lambda_prime, msd_total

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNSTABLE = 2
EXIT_BREAKDOWN = 3
EXIT_VERIFY = 4

# salt for the system-generation stream; per-run streams use (seed, run_index)
# with run_index < runs, far below this value
_SYSTEM_TAG = 0x73797374


class ConfigError(ValueError):
    pass


def _field(raw: dict, key: str, kind, where: str = "config"):
    if key not in raw:
        raise ConfigError(f"{where}: missing required field '{key}'")
    value = raw[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is dict and isinstance(value, dict):
        return value
    raise ConfigError(f"{where}: field '{key}' must be of type {kind.__name__}, "
                      f"got {type(value).__name__}")


def _build_system_spec(raw_system: dict) -> SystemSpec:
    if "values" in raw_system:
        values = raw_system["values"]
        if not isinstance(values, list) or not values or \
                not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise ConfigError("config: system.values must be a nonempty list of numbers")
        return SystemSpec(values=tuple(float(v) for v in values))
    kwargs = {}
    for key, attr in (("large", "n_large"), ("small", "n_small"), ("zero", "n_zero")):
        count = _field(raw_system, key, int, "config: system")
        if count < 0:
            raise ConfigError(f"config: system.{key} must be nonnegative")
        kwargs[attr] = count
    ranges = raw_system.get("ranges", {})
    if not isinstance(ranges, dict):
        raise ConfigError("config: system.ranges must be an object")
    for key, attr in (("large", "large_range"), ("small", "small_range")):
        if key in ranges:
            pair = ranges[key]
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                               for v in pair)):
                raise ConfigError(f"config: system.ranges.{key} must be [lo, hi]")
            kwargs[attr] = (float(pair[0]), float(pair[1]))
    return SystemSpec(**kwargs)


def load_config(path: str, seed_override=None):
    """Parse and validate a config file into an ExperimentConfig.

    Returns (config, echo) where the echo dict contains every effective
    setting (defaults filled in, seed override applied) and fully
    determines the run.
    """
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: JSON parse error at line {err.lineno} "
                          f"column {err.colno}: {err.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")

    n_taps = _field(raw, "n_taps", int)
    lam = _field(raw, "lambda", float)
    gamma = _field(raw, "gamma", float)
    alpha = _field(raw, "alpha", float)
    sigma_x2 = _field(raw, "sigma_x2", float)
    sigma_v2 = _field(raw, "sigma_v2", float)
    iterations = _field(raw, "iterations", int)
    runs = _field(raw, "runs", int)
    seed = _field(raw, "seed", int) if seed_override is None else int(seed_override)
    algorithm = _field(raw, "algorithm", str)
    steady_window = float(raw.get("steady_window", 0.2))
    init_scale = float(raw.get("init_scale", 100.0))
    raw_system = _field(raw, "system", dict)

    try:
        params = FilterParams(num_taps=n_taps, forgetting=lam, gamma=gamma,
                              alpha=alpha, init_scale=init_scale)
        model = SignalModel(input_variance=sigma_x2, noise_variance=sigma_v2)
        spec = _build_system_spec(raw_system)
        if spec.n_taps != n_taps:
            raise ConfigError(f"config: system describes {spec.n_taps} taps, "
                              f"n_taps says {n_taps}")
        system = gen_system(spec, alpha, SeedSequence((seed, _SYSTEM_TAG)))
        config = ExperimentConfig(params=params, model=model, system=system,
                                  iterations=iterations, runs=runs, seed=seed,
                                  algorithm=algorithm, steady_window=steady_window)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"config: {err}")

    echo = {
        "n_taps": n_taps, "lambda": lam, "gamma": gamma, "alpha": alpha,
        "sigma_x2": sigma_x2, "sigma_v2": sigma_v2, "iterations": iterations,
        "runs": runs, "seed": seed, "algorithm": algorithm,
        "steady_window": steady_window, "init_scale": init_scale,
        "system": raw_system,
    }
    return config, echo


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _partition_dict(partition):
    return {"zero": partition.zero.tolist(),
            "small": partition.small.tolist(),
            "large": partition.large.tolist()}


def _write_manifest(out: Path, command: str, args, echo: dict, outputs, passed) -> None:
    manifest = {
        "command": command,
        "config_path": str(args.config),
        "config": echo,
        "cli": {
            "out": str(out),
            "threads": args.threads,
            "seed_override": args.seed,
            "tol_msd": getattr(args, "tol_msd", None),
            "tol_mean": getattr(args, "tol_mean", None),
        },
        "seed": echo["seed"],
        "package_version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(str(p.name) for p in outputs),
        "passed": passed,
    }
    _write_json(out / "manifest.json", manifest)


def _prediction_document(config: ExperimentConfig, echo: dict):
    """TheoryPrediction as a dict, or a degenerate document if unstable."""
    try:
        pred = msd_total(config.system.w0, config.params, config.model)
    except InstabilityError as err:
        doc = {
            "stable": False,
            "instability": {"quantity": err.quantity, "value": err.value},
            "lambda_prime": lambda_prime(config.params, config.model),
            "beta_prime": None, "g_s": None, "b_omega": None, "c_omega": None,
            "omega": None, "d_large": None, "d_small": None, "d_zero": None,
            "d_total": None, "mean_dev": None, "zero_tap_mean_bound": None,
            "n_taps": config.params.num_taps,
            "partition": _partition_dict(config.system.partition),
            "w0": config.system.w0.tolist(),
            "config": echo,
        }
        return None, doc
    doc = {
        "stable": True,
        "n_taps": config.params.num_taps,
        "lambda_prime": pred.lambda_prime,
        "beta_prime": pred.beta_prime,
        "g_s": pred.g_s,
        "b_omega": pred.b_omega,
        "c_omega": pred.c_omega,
        "omega": pred.omega,
        "d_large": pred.d_large,
        "d_small": pred.d_small,
        "d_zero": pred.d_zero,
        "d_total": pred.d_total,
        "mean_dev": pred.mean_dev.tolist(),
        "zero_tap_mean_bound": pred.zero_tap_mean_bound,
        "partition": _partition_dict(pred.partition),
        "w0": config.system.w0.tolist(),
        "config": echo,
    }
    return pred, doc


def _write_simulation_files(out: Path, config: ExperimentConfig,
                            stats: EnsembleStats, echo: dict):
    curve_path = out / "learning_curve.csv"
    with curve_path.open("w", newline="") as fh:
        fh.write("iter,msd\n")
        for i, value in enumerate(stats.msd_curve):
            fh.write(f"{i},{_fmt(value)}\n")

    taps_path = out / "taps.csv"
    labels = stats.partition.labels()
    w0 = config.system.w0
    with taps_path.open("w", newline="") as fh:
        fh.write("tap,class,w0,mean_dev_emp,power_emp\n")
        for k in range(config.params.num_taps):
            fh.write(f"{k},{labels[k]},{_fmt(w0[k])},"
                     f"{_fmt(stats.steady_mean_per_tap[k])},"
                     f"{_fmt(stats.steady_power_per_tap[k])}\n")

    stats_doc = {
        "algorithm": config.algorithm,
        "n_taps": config.params.num_taps,
        "iterations": config.iterations,
        "runs": stats.n_runs,
        "seed": config.seed,
        "steady_window": config.steady_window,
        "window_start": stats.window_start,
        "steady_msd": stats.steady_msd,
        "steady_msd_by_class": {"large": stats.steady_msd_by_class.large,
                                "small": stats.steady_msd_by_class.small,
                                "zero": stats.steady_msd_by_class.zero},
        "standard_error": stats.standard_error,
        "sign_mean": stats.sign_mean.tolist(),
        "steady_mean_per_tap": stats.steady_mean_per_tap.tolist(),
        "steady_mean_se": stats.steady_mean_se.tolist(),
        "steady_power_per_tap": stats.steady_power_per_tap.tolist(),
        "partition": _partition_dict(stats.partition),
        "w0": w0.tolist(),
        "config": echo,
    }
    stats_path = out / "ensemble.json"
    _write_json(stats_path, stats_doc)
    return [curve_path, taps_path, stats_path]


def _report_table(report) -> str:
    if report.instability:
        return "prediction unstable: no comparisons performed\n"
    lines = []
    header = f"{'quantity':24s} {'theory':>24s} {'empirical':>24s} " \
             f"{'abs_err':>24s} {'rel_err':>24s} {'status':6s} rule"
    lines.append(header)
    lines.append("-" * len(header))
    for row in report.rows:
        rel = repr(row.rel_err) if math.isfinite(row.rel_err) else "-"
        lines.append(f"{row.name:24s} {row.theory!r:>24s} {row.empirical!r:>24s} "
                     f"{row.abs_err!r:>24s} {rel:>24s} "
                     f"{'PASS' if row.passed else 'FAIL':6s} {row.rule}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def _report_document(report, tolerances: Tolerances):
    return {
        "passed": report.passed,
        "instability": report.instability,
        "tolerances": {
            "d_total_rel": tolerances.d_total_rel,
            "d_large_rel": tolerances.d_large_rel,
            "d_small_rel": tolerances.d_small_rel,
            "d_zero_rel": tolerances.d_zero_rel,
            "mean_se_mult": tolerances.mean_se_mult,
            "zero_bound_slack": tolerances.zero_bound_slack,
        },
        "rows": [{
            "name": r.name, "theory": r.theory, "empirical": r.empirical,
            "abs_err": r.abs_err, "rel_err": r.rel_err, "passed": r.passed,
            "rule": r.rule,
        } for r in report.rows],
    }


def cmd_predict(args) -> int:
    config, echo = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pred, doc = _prediction_document(config, echo)
    path = out / "prediction.json"
    _write_json(path, doc)
    code = EXIT_OK if pred is not None else EXIT_UNSTABLE
    _write_manifest(out, "predict", args, echo, [path], pred is not None)
    if pred is None:
        print(f"unstable parameters: {doc['instability']['quantity']} = "
              f"{doc['instability']['value']!r} (prediction written with stable=false)",
              file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    config, echo = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        stats = run_ensemble(config, threads=args.threads)
    except NumericalBreakdownError as err:
        print(f"numerical breakdown: {err}", file=sys.stderr)
        _write_manifest(out, "simulate", args, echo, [], False)
        return EXIT_BREAKDOWN
    outputs = _write_simulation_files(out, config, stats, echo)
    _write_manifest(out, "simulate", args, echo, outputs, True)
    return EXIT_OK


def cmd_verify(args) -> int:
    config, echo = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tolerances = Tolerances(d_total_rel=args.tol_msd / 100.0,
                            zero_bound_slack=args.tol_mean / 100.0)

    pred, pred_doc = _prediction_document(config, echo)
    outputs = [out / "prediction.json"]
    _write_json(outputs[0], pred_doc)
    if pred is None:
        report_doc = {"passed": False, "instability": True, "rows": []}
        outputs.append(out / "report.json")
        _write_json(outputs[-1], report_doc)
        _write_manifest(out, "verify", args, echo, outputs, False)
        print("prediction unstable: verification skipped", file=sys.stderr)
        return EXIT_UNSTABLE

    try:
        stats = run_ensemble(config, threads=args.threads)
    except NumericalBreakdownError as err:
        print(f"numerical breakdown: {err}", file=sys.stderr)
        _write_manifest(out, "verify", args, echo, outputs, False)
        return EXIT_BREAKDOWN

    outputs += _write_simulation_files(out, config, stats, echo)
    report = compare(stats, pred, tolerances)
    outputs.append(out / "report.json")
    _write_json(outputs[-1], _report_document(report, tolerances))
    table = _report_table(report)
    outputs.append(out / "report.txt")
    outputs[-1].write_text(table)
    print(table, end="")
    _write_manifest(out, "verify", args, echo, outputs, report.passed)
    if not report.passed:
        failing = [r.name for r in report.rows if not r.passed]
        print(f"verification FAILED: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="l0rls",
        description="Zero-attracting RLS: closed-form steady-state predictions "
                    "and seeded Monte Carlo verification.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, desc in (
            ("predict", cmd_predict, "evaluate the closed-form steady-state prediction"),
            ("simulate", cmd_simulate, "run the seeded Monte Carlo ensemble"),
            ("verify", cmd_verify, "predict + simulate + compare against tolerances")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker threads for the ensemble")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if name == "verify":
            p.add_argument("--tol-msd", type=float, default=10.0,
                           help="relative tolerance on total MSD, percent")
            p.add_argument("--tol-mean", type=float, default=100.0,
                           help="zero-tap mean bound slack, percent of the bound")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage errors; 2 means instability here
        return EXIT_OK if not err.code else EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
