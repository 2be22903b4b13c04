"""Seeded Monte Carlo system identification for the zero-attracting RLS.

Generates sparse true systems and white Gaussian signal streams, runs
independent adaptations of the chosen recursion, and reduces them into
ensemble statistics directly comparable with the closed-form
predictions from :mod:`l0rls.theory`.

Reproducibility contract: every quantity is a pure function of the
experiment config.  Per-run generator streams are derived as
``SeedSequence((seed, run_index))`` and each run spawns two children
(input stream first, noise stream second), so results do not depend on
execution order or thread count.  Ensemble reductions always accumulate
in run-index order.
"""

from __future__ import annotations

import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.random import SeedSequence, default_rng

from .filters import (FilterParams, NumericalBreakdownError, init_state,
                      l0_rls_step, rls_step)
from .theory import (SignalModel, TapPartition, TheoryPrediction,
                     classify_taps)

__all__ = [
    "SystemSpec",
    "TrueSystem",
    "ExperimentConfig",
    "EnsembleStats",
    "ClassMsd",
    "Tolerances",
    "ComparisonRow",
    "ComparisonReport",
    "ALGORITHMS",
    "DEFAULT_SEED",
    "gen_system",
    "gen_signals",
    "tap_input_matrix",
    "run_single",
    "run_ensemble",
    "compare",
]

ALGORITHMS = ("rls", "l0rls")

# default seed for demos and reference experiments
DEFAULT_SEED = 20250810


@dataclass(frozen=True)
class SystemSpec:
    """Recipe for a true system: explicit taps, or class counts + ranges.

    When ``values`` is given it wins and the counts are ignored.
    Otherwise large-tap magnitudes are drawn uniformly from
    ``large_range`` (which must start at or above 1/alpha), small-tap
    magnitudes from ``small_range`` (which must sit inside (0, 1/alpha]),
    and signs are equiprobable.
    """

    n_large: int = 0
    n_small: int = 0
    n_zero: int = 0
    large_range: tuple = (0.1, 1.0)
    small_range: tuple = (0.0, 0.02)
    values: tuple = None

    @property
    def n_taps(self) -> int:
        if self.values is not None:
            return len(self.values)
        return self.n_large + self.n_small + self.n_zero


@dataclass
class TrueSystem:
    """Ground truth weights with their tap partition and provenance."""

    w0: np.ndarray
    partition: TapPartition
    provenance: str = "explicit"
    spec: SystemSpec = None

    @classmethod
    def from_weights(cls, w0, alpha: float) -> "TrueSystem":
        w0 = np.asarray(w0, dtype=float)
        return cls(w0=w0, partition=classify_taps(w0, alpha))


def gen_system(spec: SystemSpec, alpha: float, rng) -> TrueSystem:
    """Realize a :class:`SystemSpec` into concrete taps.

    ``rng`` may be a seed, a SeedSequence or a Generator.  Draw order is
    fixed: large magnitudes, small magnitudes, signs (large then small),
    then the index permutation, so a given stream always yields the same
    system.
    """
    rng = default_rng(rng)
    if spec.values is not None:
        w0 = np.asarray(spec.values, dtype=float)
        if not np.isfinite(w0).all():
            raise ValueError("explicit tap values contain non-finite entries")
        return TrueSystem(w0=w0, partition=classify_taps(w0, alpha),
                          provenance="explicit", spec=spec)

    radius = 1.0 / alpha
    lo, hi = spec.small_range
    if spec.n_small and not (0.0 <= lo < hi <= radius):
        raise ValueError(
            f"small_range {spec.small_range} must sit inside (0, 1/alpha] = (0, {radius}]")
    glo, ghi = spec.large_range
    if spec.n_large and not (radius <= glo <= ghi):
        raise ValueError(
            f"large_range {spec.large_range} must start at or above 1/alpha = {radius}")
    if min(spec.n_large, spec.n_small, spec.n_zero) < 0:
        raise ValueError("tap counts must be nonnegative")
    n = spec.n_taps
    if n < 1:
        raise ValueError("system must have at least one tap")

    mag_large = rng.uniform(glo, ghi, spec.n_large)
    mag_small = rng.uniform(lo, hi, spec.n_small)
    while np.any(mag_small == 0.0):  # open interval: resample exact zeros
        bad = mag_small == 0.0
        mag_small[bad] = rng.uniform(lo, hi, int(bad.sum()))
    signs = 2.0 * rng.integers(0, 2, spec.n_large + spec.n_small) - 1.0
    perm = rng.permutation(n)

    w0 = np.zeros(n)
    w0[perm[:spec.n_large]] = signs[:spec.n_large] * mag_large
    w0[perm[spec.n_large:spec.n_large + spec.n_small]] = \
        signs[spec.n_large:] * mag_small
    partition = classify_taps(w0, alpha)
    if (partition.large.size, partition.small.size, partition.zero.size) != \
            (spec.n_large, spec.n_small, spec.n_zero):
        raise RuntimeError("generated system does not match requested class counts")
    prov = f"generated:large={spec.n_large},small={spec.n_small},zero={spec.n_zero}"
    return TrueSystem(w0=w0, partition=partition, provenance=prov, spec=spec)


def tap_input_matrix(x, num_taps: int) -> np.ndarray:
    """Sliding regressor windows [x(n), ..., x(n-N+1)], zero-padded at the start."""
    x = np.asarray(x, dtype=float)
    padded = np.concatenate([np.zeros(num_taps - 1), x])
    win = np.lib.stride_tricks.sliding_window_view(padded, num_taps)
    return np.ascontiguousarray(win[:, ::-1])


def gen_signals(model: SignalModel, w0, num_iterations: int, seed):
    """White Gaussian input and observations d(n) = x(n)'w0 + v(n).

    The noise comes from a stream independent of the input: the seed is
    normalized to a SeedSequence and spawns (input, noise) children in
    that order.  Returns the scalar input series and the observations.
    """
    w0 = np.asarray(w0, dtype=float)
    n = w0.size
    if num_iterations < n:
        raise ValueError(f"need at least {n} iterations to fill a regressor window")
    ss = seed if isinstance(seed, SeedSequence) else SeedSequence(seed)
    ss_x, ss_v = ss.spawn(2)
    x = default_rng(ss_x).standard_normal(num_iterations) * np.sqrt(model.input_variance)
    v = default_rng(ss_v).standard_normal(num_iterations) * np.sqrt(model.noise_variance)
    d = tap_input_matrix(x, n) @ w0 + v
    return x, d


@dataclass
class ExperimentConfig:
    """Everything that determines one Monte Carlo experiment."""

    params: FilterParams
    model: SignalModel
    system: TrueSystem
    iterations: int
    runs: int
    seed: int
    algorithm: str = "l0rls"
    steady_window: float = 0.2

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not (0.0 < self.steady_window <= 1.0):
            raise ValueError("steady_window must lie in (0, 1]")
        if int(round(self.steady_window * self.iterations)) < 1:
            raise ValueError("steady window must cover at least one iteration")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.system.w0.size != self.params.num_taps:
            raise ValueError("system size does not match params.num_taps")
        if not self.system.partition.same_as(
                classify_taps(self.system.w0, self.params.alpha)):
            raise ValueError("system partition inconsistent with params.alpha")

    @property
    def window_size(self) -> int:
        return min(self.iterations,
                   max(1, int(round(self.steady_window * self.iterations))))

    @property
    def window_start(self) -> int:
        return self.iterations - self.window_size


class ClassMsd(NamedTuple):
    large: float
    small: float
    zero: float


@dataclass
class EnsembleStats:
    """Monte Carlo averages over independent runs.

    ``per_tap_mean`` and ``per_tap_power`` are N x T ensemble averages
    of the deviation and its square; ``msd_curve`` is their tap-summed
    power.  Steady quantities average the last ``window_size`` samples.
    ``sign_mean`` averages sgn(w_k(n)) over the window and all runs.
    ``standard_error`` is the run-to-run std of the per-run steady MSD
    divided by sqrt(runs) (0 for a single run); the per-tap analogue is
    ``steady_mean_se``.
    """

    msd_curve: np.ndarray
    per_tap_mean: np.ndarray
    per_tap_power: np.ndarray
    sign_mean: np.ndarray
    steady_msd: float
    steady_msd_by_class: ClassMsd
    standard_error: float
    steady_mean_per_tap: np.ndarray
    steady_mean_se: np.ndarray
    steady_power_per_tap: np.ndarray
    partition: TapPartition = field(repr=False)
    window_start: int = 0
    n_runs: int = 1


def run_single(config: ExperimentConfig, run_index: int) -> np.ndarray:
    """One seeded adaptation; returns the T x N deviation trajectory."""
    params = config.params
    w0 = config.system.w0
    x, d = gen_signals(config.model, w0, config.iterations,
                       SeedSequence((config.seed, run_index)))
    regressors = tap_input_matrix(x, params.num_taps)
    step = l0_rls_step if config.algorithm == "l0rls" else rls_step
    state = init_state(params)
    dev = np.empty((config.iterations, params.num_taps))
    try:
        for n in range(config.iterations):
            state, _ = step(state, regressors[n], d[n], params)
            dev[n] = state.w - w0
    except NumericalBreakdownError as err:
        err.run_index = run_index
        raise
    return dev


# runs are reduced in fixed chunks of this size, independent of the worker
# count, so every float accumulation has one order and results are
# byte-identical for any --threads value
_CHUNK_RUNS = 8


def _reduce_chunk(config: ExperimentConfig, bounds):
    start_run, stop_run = bounds
    t, n = config.iterations, config.params.num_taps
    w0 = config.system.w0
    ws = config.window_start
    sum_dev = np.zeros((t, n))
    sum_sq = np.zeros((t, n))
    sign_sum = np.zeros(n)
    means = np.empty((stop_run - start_run, n))
    msds = np.empty(stop_run - start_run)
    for i in range(start_run, stop_run):
        dev = run_single(config, i)
        np.add(sum_dev, dev, out=sum_dev)
        np.add(sum_sq, dev * dev, out=sum_sq)
        window = dev[ws:]
        means[i - start_run] = window.mean(axis=0)
        msds[i - start_run] = (window * window).sum(axis=1).mean()
        np.add(sign_sum, np.sign(window + w0).sum(axis=0), out=sign_sum)
    return sum_dev, sum_sq, sign_sum, means, msds


def run_ensemble(config: ExperimentConfig, threads: int = 1) -> EnsembleStats:
    """Average ``config.runs`` independent runs into ensemble statistics.

    With ``threads`` > 1 chunks of runs execute on a process pool.  The
    chunking and the reduction order are fixed, so the statistics are
    bit-identical for any worker count.
    """
    t, n, m = config.iterations, config.params.num_taps, config.runs
    start = config.window_start

    sum_dev = np.zeros((t, n))
    sum_sq = np.zeros((t, n))
    sign_sum = np.zeros(n)
    run_means = np.empty((m, n))
    run_msd = np.empty(m)

    chunks = [(s, min(s + _CHUNK_RUNS, m)) for s in range(0, m, _CHUNK_RUNS)]
    if threads and threads > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(chunks))) as pool:
            parts = list(pool.map(functools.partial(_reduce_chunk, config), chunks))
    else:
        parts = [_reduce_chunk(config, bounds) for bounds in chunks]

    for (lo, hi), (part_dev, part_sq, part_sign, means, msds) in zip(chunks, parts):
        np.add(sum_dev, part_dev, out=sum_dev)
        np.add(sum_sq, part_sq, out=sum_sq)
        np.add(sign_sum, part_sign, out=sign_sum)
        run_means[lo:hi] = means
        run_msd[lo:hi] = msds

    per_tap_mean = (sum_dev / m).T
    per_tap_power = (sum_sq / m).T
    msd_curve = per_tap_power.sum(axis=0)
    steady_msd = float(msd_curve[start:].mean())

    part = config.system.partition
    by_class = ClassMsd(*(
        float(per_tap_power[idx, start:].sum(axis=0).mean()) if idx.size else 0.0
        for idx in (part.large, part.small, part.zero)))

    if m > 1:
        se = float(run_msd.std(ddof=1) / np.sqrt(m))
        mean_se = run_means.std(axis=0, ddof=1) / np.sqrt(m)
    else:
        se = 0.0
        mean_se = np.zeros(n)

    window_len = config.window_size
    return EnsembleStats(
        msd_curve=msd_curve,
        per_tap_mean=per_tap_mean,
        per_tap_power=per_tap_power,
        sign_mean=sign_sum / (m * window_len),
        steady_msd=steady_msd,
        steady_msd_by_class=by_class,
        standard_error=se,
        steady_mean_per_tap=run_means.mean(axis=0),
        steady_mean_se=mean_se,
        steady_power_per_tap=per_tap_power[:, start:].mean(axis=1),
        partition=part,
        window_start=start,
        n_runs=m,
    )


@dataclass(frozen=True)
class Tolerances:
    """Pass/fail thresholds for theory-vs-simulation comparisons.

    Relative tolerances gate the MSD quantities.  Per-tap mean checks
    are class specific: large taps must sit within ``mean_se_mult``
    standard errors of zero, small taps must reproduce the predicted
    bias sign, and zero taps must stay within
    ``zero_bound_slack * zero_tap_mean_bound + mean_se_mult * se``.
    """

    d_total_rel: float = 0.10
    d_large_rel: float = 0.15
    d_small_rel: float = 0.25
    d_zero_rel: float = 0.25
    mean_se_mult: float = 4.0
    zero_bound_slack: float = 1.0


@dataclass
class ComparisonRow:
    name: str
    theory: float
    empirical: float
    abs_err: float
    rel_err: float  # NaN when the theory value is zero
    passed: bool
    rule: str


@dataclass
class ComparisonReport:
    rows: list
    passed: bool
    instability: bool = False


def _msd_row(name, theory, empirical, tol):
    abs_err = abs(empirical - theory)
    if theory != 0.0:
        rel = abs_err / abs(theory)
        return ComparisonRow(name, theory, empirical, abs_err, rel,
                             rel <= tol, f"rel_err <= {tol:g}")
    return ComparisonRow(name, theory, empirical, abs_err, float("nan"),
                         abs_err <= 1e-12, "abs_err <= 1e-12 (theory is 0)")


def compare(stats: EnsembleStats, prediction: TheoryPrediction,
            tolerances: Tolerances = None) -> ComparisonReport:
    """Theory vs ensemble: MSD totals, per-class MSDs, per-tap means.

    The zero-tap theoretical means are recomputed from the measured
    ``stats.sign_mean`` (the closed form leaves the limiting sign
    average unresolved).  An unstable prediction yields a report with
    the instability flag set and no comparison rows.
    """
    if not prediction.stable:
        return ComparisonReport(rows=[], passed=False, instability=True)
    tol = tolerances or Tolerances()
    if prediction.mean_dev.size != stats.steady_mean_per_tap.size:
        raise ValueError("prediction and stats disagree on the number of taps")
    if prediction.partition is not None and not stats.partition.same_as(prediction.partition):
        raise ValueError("prediction and stats use different tap partitions")

    part = stats.partition
    rows = [
        _msd_row("d_total", prediction.d_total, stats.steady_msd, tol.d_total_rel),
        _msd_row("d_large", prediction.d_large, stats.steady_msd_by_class.large,
                 tol.d_large_rel),
        _msd_row("d_small", prediction.d_small, stats.steady_msd_by_class.small,
                 tol.d_small_rel),
        _msd_row("d_zero", prediction.d_zero, stats.steady_msd_by_class.zero,
                 tol.d_zero_rel),
    ]

    theory_mean = prediction.mean_dev.copy()
    theory_mean[part.zero] = -prediction.zero_tap_mean_bound * stats.sign_mean[part.zero]
    labels = part.labels()
    m = tol.mean_se_mult
    for k in range(theory_mean.size):
        emp = float(stats.steady_mean_per_tap[k])
        th = float(theory_mean[k])
        se = float(stats.steady_mean_se[k])
        abs_err = abs(emp - th)
        rel = abs_err / abs(th) if th != 0.0 else float("nan")
        if labels[k] == "large":
            ok = abs(emp) <= m * se
            rule = f"|emp| <= {m:g}*se"
        elif labels[k] == "small":
            if th != 0.0:
                ok = np.sign(emp) == np.sign(th)
                rule = "sign(emp) == sign(theory)"
            else:
                ok = abs(emp) <= m * se
                rule = f"|emp| <= {m:g}*se (no predicted bias)"
        else:
            limit = tol.zero_bound_slack * prediction.zero_tap_mean_bound + m * se
            ok = abs(emp) <= limit
            rule = f"|emp| <= {tol.zero_bound_slack:g}*bound + {m:g}*se"
        rows.append(ComparisonRow(f"mean_tap_{k} ({labels[k]})", th, emp,
                                  abs_err, rel, bool(ok), rule))

    return ComparisonReport(rows=rows, passed=all(r.passed for r in rows))
