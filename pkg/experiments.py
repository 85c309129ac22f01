#!/usr/bin/env python3
"""
Monte Carlo harness for random automata.

Each metric turns one random automaton into one Bernoulli observation.
Trial i at state count n draws its automaton from a generator derived only
from (seed, n, i), and per-n results are plain sums, so a report depends on
the experiment settings alone and not on the number of workers or their scheduling.
"""

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, field_validator
from scipy import stats

from automaton import Dfa, Rng, is_weakly_connected, minimal_closed_components, random_dfa, single_disconnected_state
from config import Settings, get_settings, install_settings
from exceptions import ExperimentError, InvalidArgumentError, SyncLabError
from fast_decide import fast_decide
from funcgraph import analyze_letter, cycle_count, high_tree_stats, high_vertices
from sync_oracle import decide_exact, enumerate_all

logger = logging.getLogger(__name__)

DEFAULT_Z = 1.96


class Metric(str, Enum):
    SYNC_PROB = "SYNC_PROB"
    CYCLE_TAIL = "CYCLE_TAIL"
    HIGH_TREE_FAIL = "HIGH_TREE_FAIL"
    MIN_CLOSED_SMALL = "MIN_CLOSED_SMALL"
    HIGH_REACH_FAIL = "HIGH_REACH_FAIL"
    FAST_FALLBACK = "FAST_FALLBACK"
    NOT_CONNECTED = "NOT_CONNECTED"


class ExperimentSpec(BaseModel):
    """What to measure, where, and how often"""
    metric: Metric = Field(..., description="Event counted as a success")
    n_grid: List[int] = Field(..., min_length=1, description="Strictly increasing state counts")
    k: int = Field(2, ge=1, description="Alphabet size")
    samples: int = Field(1000, ge=1, description="Trials per grid point")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="64-bit master seed")
    exhaustive: bool = Field(False, description="Observe every automaton of each n instead of sampling")
    tail_factor: float = Field(5.0, gt=0, description="CYCLE_TAIL threshold is tail_factor * ln n")
    closed_q: float = Field(2.0, gt=0, description="MIN_CLOSED_SMALL threshold is n / (q e^2)")
    budget_scale: float = Field(1.0, gt=0, description="fast_decide budget multiplier")

    @field_validator("n_grid")
    @classmethod
    def check_grid(cls, grid: List[int]) -> List[int]:
        if any(n < 1 for n in grid):
            raise ValueError("state counts must be >= 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        return grid


class ReportRow(BaseModel):
    n: int
    trials: int
    successes: int
    frequency: float
    wilson_lo: float
    wilson_hi: float
    n_times_frequency: float


class SlopeFit(BaseModel):
    slope: float
    intercept: float
    stderr: float


class ExperimentReport(BaseModel):
    """Per-n Bernoulli statistics with Wilson intervals and a log-log fit"""
    metric: Metric
    k: int
    samples: int
    seed: int
    exhaustive: bool
    rows: List[ReportRow] = Field(default_factory=list)
    fit: Optional[SlopeFit] = None
    valid: bool = True
    error: Optional[str] = None
    wall_time_s: float = 0.0

    def canonical(self) -> Dict:
        """The report without timing, identical for identical specs"""
        return self.model_dump(mode="json", exclude={"wall_time_s"})


def wilson_interval(successes: int, trials: int, z: float = DEFAULT_Z) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Returns:
        (lo, hi), clipped to [0, 1]
    """
    if trials < 1 or not 0 <= successes <= trials:
        raise InvalidArgumentError(f"invalid counts: {successes} successes in {trials} trials")
    if z <= 0:
        raise InvalidArgumentError(f"z must be positive, got {z}")
    phat = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def fit_loglog(points: Sequence[Tuple[float, float]]) -> SlopeFit:
    """
    Least-squares line through (ln n, ln frequency).

    Raises:
        ExperimentError for fewer than 3 points or a zero frequency
    """
    if len(points) < 3:
        raise ExperimentError(f"a log-log fit needs at least 3 points, got {len(points)}")
    for n, freq in points:
        if freq <= 0:
            raise ExperimentError(
                f"frequency at n={n} is zero; increase samples or drop the point before fitting")
    xs = [math.log(n) for n, _ in points]
    ys = [math.log(freq) for _, freq in points]
    result = stats.linregress(xs, ys)
    return SlopeFit(slope=float(result.slope), intercept=float(result.intercept), stderr=float(result.stderr))


def observe(spec: ExperimentSpec, d: Dfa) -> bool:
    """One Bernoulli observation of spec.metric on d"""
    metric = spec.metric
    n = d.n
    if metric == Metric.SYNC_PROB:
        return not fast_decide(d, spec.budget_scale).synchronizing
    if metric == Metric.FAST_FALLBACK:
        return fast_decide(d, spec.budget_scale).fallback
    if metric == Metric.NOT_CONNECTED:
        return not is_weakly_connected(d)[0]
    if metric == Metric.MIN_CLOSED_SMALL:
        sizes = minimal_closed_components(d).sizes
        return min(sizes) < n / (spec.closed_q * math.e ** 2)
    lg = analyze_letter(d, 0)
    if metric == Metric.CYCLE_TAIL:
        return cycle_count(lg) > spec.tail_factor * math.log(n)
    if metric == Metric.HIGH_TREE_FAIL:
        st = high_tree_stats(lg)
        return not (st.unique_highest and st.margin >= 2)
    if metric == Metric.HIGH_REACH_FAIL:
        high = high_vertices(lg)
        return any(component.isdisjoint(high) for component in minimal_closed_components(d).components)
    raise ExperimentError(f"unknown metric {metric}")


def trial_dfa(seed: int, n: int, k: int, index: int) -> Dfa:
    """The automaton of trial index at state count n"""
    return random_dfa(n, k, Rng.derive(seed, n, index))


def _run_chunk(spec: ExperimentSpec, n: int, start: int, stop: int) -> int:
    return sum(observe(spec, trial_dfa(spec.seed, n, spec.k, i)) for i in range(start, stop))


def _chunks(samples: int, workers: int) -> List[Tuple[int, int]]:
    size = max(1, math.ceil(samples / (workers * 4)))
    return [(start, min(samples, start + size)) for start in range(0, samples, size)]


def _count_successes(spec: ExperimentSpec, n: int, pool: Optional[ProcessPoolExecutor], workers: int) -> Tuple[int, int]:
    if spec.exhaustive:
        summary = enumerate_all(n, spec.k, lambda d: {"hit": int(observe(spec, d))})
        return summary.counts.get("hit", 0), summary.visited
    if pool is None:
        return _run_chunk(spec, n, 0, spec.samples), spec.samples
    chunks = _chunks(spec.samples, workers)
    futures = [pool.submit(_run_chunk, spec, n, start, stop) for start, stop in chunks]
    return sum(f.result() for f in futures), spec.samples


def _worker_pool(workers: int, settings: Settings) -> ProcessPoolExecutor:
    # workers run under the parent's settings, not whatever their environment holds
    return ProcessPoolExecutor(max_workers=workers, initializer=install_settings, initargs=(settings,))


def _make_row(n: int, successes: int, trials: int, z: float) -> ReportRow:
    lo, hi = wilson_interval(successes, trials, z)
    freq = successes / trials
    return ReportRow(n=n, trials=trials, successes=successes, frequency=freq,
                     wilson_lo=lo, wilson_hi=hi, n_times_frequency=n * freq)


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> ExperimentReport:
    """
    Run the experiment over its n grid.

    Args:
        spec: Experiment definition
        workers: Worker processes (settings default when None); has no effect on the result

    Returns:
        ExperimentReport; valid=False with the rows finished so far when an
        underlying capacity guard aborted the run
    """
    settings = get_settings()
    workers = settings.workers if workers is None else workers
    if workers < 1:
        raise InvalidArgumentError(f"workers must be >= 1, got {workers}")
    report = ExperimentReport(metric=spec.metric, k=spec.k, samples=spec.samples,
                              seed=spec.seed, exhaustive=spec.exhaustive)
    started = time.perf_counter()
    pool = _worker_pool(workers, settings) if workers > 1 and not spec.exhaustive else None
    try:
        for n in spec.n_grid:
            try:
                successes, trials = _count_successes(spec, n, pool, workers)
            except SyncLabError as e:
                logger.error(f"Experiment {spec.metric.value} aborted at n={n}: {e}")
                report.valid = False
                report.error = str(e)
                break
            except BrokenProcessPool as e:
                logger.error(f"Experiment {spec.metric.value} lost its worker pool at n={n}: {e}")
                report.valid = False
                report.error = f"worker pool failed: {e}"
                break
            row = _make_row(n, successes, trials, settings.z)
            report.rows.append(row)
            logger.info(f"{spec.metric.value} n={n}: {successes}/{trials} "
                        f"(freq {row.frequency:.5f}, [{row.wilson_lo:.5f}, {row.wilson_hi:.5f}])")
    finally:
        if pool is not None:
            pool.shutdown()
    if len(report.rows) >= 3 and all(row.successes > 0 for row in report.rows):
        report.fit = fit_loglog([(row.n, row.frequency) for row in report.rows])
    report.wall_time_s = time.perf_counter() - started
    return report


class ExactTable(BaseModel):
    """Exact counts over all automata with n states and k letters; synchronizing is None when not computed"""
    n: int
    k: int
    total: int
    synchronizing: Optional[int] = None
    not_weakly_connected: int
    single_disconnected: int

    @property
    def p_sync(self) -> Optional[Fraction]:
        if self.synchronizing is None:
            return None
        return Fraction(self.synchronizing, self.total)

    @property
    def p_not_connected(self) -> Fraction:
        return Fraction(self.not_weakly_connected, self.total)

    @property
    def p_single_disconnected(self) -> Fraction:
        return Fraction(self.single_disconnected, self.total)


def _structural_visitor(d: Dfa) -> Dict[str, int]:
    return {
        "not_weakly_connected": int(not is_weakly_connected(d)[0]),
        "single_disconnected": int(single_disconnected_state(d) is not None),
    }


def _exact_visitor(d: Dfa) -> Dict[str, int]:
    counts = _structural_visitor(d)
    counts["synchronizing"] = int(decide_exact(d).synchronizing)
    return counts


def exact_small_n(n: int, k: int, decide: bool = True) -> ExactTable:
    """
    Exhaustive counts over every automaton with n states and k letters.

    Args:
        n: State count
        k: Alphabet size
        decide: Also run the exact oracle on each automaton (skipped for structural counts only)
    """
    summary = enumerate_all(n, k, _exact_visitor if decide else _structural_visitor)
    return ExactTable(
        n=n,
        k=k,
        total=summary.visited,
        synchronizing=summary.counts.get("synchronizing", 0) if decide else None,
        not_weakly_connected=summary.counts.get("not_weakly_connected", 0),
        single_disconnected=summary.counts.get("single_disconnected", 0),
    )


class ScalingRow(BaseModel):
    n: int
    samples: int
    mean_fast_steps: float
    mean_exact_steps: float
    fallbacks: int
    fallback_frequency: float
    wilson_lo: float
    wilson_hi: float


class ScalingReport(BaseModel):
    """Mean charged steps of the fast pipeline against the exact oracle"""
    k: int
    seed: int
    rows: List[ScalingRow] = Field(default_factory=list)
    fast_fit: Optional[SlopeFit] = None
    exact_fit: Optional[SlopeFit] = None
    wall_time_s: float = 0.0


def _scaling_chunk(seed: int, n: int, k: int, start: int, stop: int) -> Tuple[int, int, int]:
    fast_total = exact_total = fallbacks = 0
    for i in range(start, stop):
        d = trial_dfa(seed, n, k, i)
        fast = fast_decide(d)
        fast_total += fast.steps
        fallbacks += int(fast.fallback)
        exact_total += decide_exact(d).steps
    return fast_total, exact_total, fallbacks


def run_scaling(n_grid: Sequence[int], samples: int, seed: int, k: int = 2,
                workers: Optional[int] = None) -> ScalingReport:
    """
    Measure fast_decide and decide_exact step counts on the same automata.

    Returns:
        ScalingReport with per-n means, fallback frequency and log-log slopes
    """
    if samples < 1:
        raise InvalidArgumentError(f"samples must be >= 1, got {samples}")
    settings = get_settings()
    workers = settings.workers if workers is None else workers
    report = ScalingReport(k=k, seed=seed)
    started = time.perf_counter()
    pool = _worker_pool(workers, settings) if workers > 1 else None
    try:
        for n in n_grid:
            if pool is None:
                fast_total, exact_total, fallbacks = _scaling_chunk(seed, n, k, 0, samples)
            else:
                futures = [pool.submit(_scaling_chunk, seed, n, k, a, b) for a, b in _chunks(samples, workers)]
                parts = [f.result() for f in futures]
                fast_total, exact_total, fallbacks = (sum(col) for col in zip(*parts))
            lo, hi = wilson_interval(fallbacks, samples, settings.z)
            report.rows.append(ScalingRow(
                n=n, samples=samples,
                mean_fast_steps=fast_total / samples,
                mean_exact_steps=exact_total / samples,
                fallbacks=fallbacks,
                fallback_frequency=fallbacks / samples,
                wilson_lo=lo, wilson_hi=hi,
            ))
            logger.info(f"Scaling n={n}: fast {fast_total / samples:.1f}, exact {exact_total / samples:.1f}, "
                        f"fallback {fallbacks}/{samples}")
    finally:
        if pool is not None:
            pool.shutdown()
    if len(report.rows) >= 3:
        report.fast_fit = fit_loglog([(r.n, r.mean_fast_steps) for r in report.rows])
        report.exact_fit = fit_loglog([(r.n, r.mean_exact_steps) for r in report.rows])
    report.wall_time_s = time.perf_counter() - started
    return report


CSV_COLUMNS = ["metric", "n", "trials", "successes", "freq", "wilson_lo", "wilson_hi"]


def report_to_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([report.metric.value, row.n, row.trials, row.successes,
                         repr(row.frequency), repr(row.wilson_lo), repr(row.wilson_hi)])
    return buffer.getvalue()


def report_to_json(report: BaseModel) -> str:
    return report.model_dump_json(indent=2)
