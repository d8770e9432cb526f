"""Metrics and experiment drivers.

Covers solution quality summaries for both solver stages, the class-fairness
study (wait distributions and last-arrival frequencies split by group
composition), the QoS parameter sweep, and benchmark grids. Experiment cells
are independent, so every driver accepts a jobs count and fans out to a
process pool.
"""
from __future__ import annotations

import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from scipy import stats as _scipy_stats

from .instgen import DemandModel, gen_demands, gen_routing_instance, seed_stream, Seed
from .model import (
    Demand,
    DemandClass,
    PoolingConfig,
    PoolingSolution,
    RoutingSolution,
)
from .pooling import beam_search
from .routing import CHARGE_EPS, RoutingContext, RoutingInstance
from .vns import VnsResult, uam_vns

# 7:30-9:30 and 16:00-18:00, closed-open, attributed by arrival mean
PEAK_WINDOWS: tuple[tuple[float, float], ...] = ((450.0, 570.0), (960.0, 1080.0))

CATEGORIES = ("regular_pure", "regular_mixed", "premium_pure", "premium_mixed")


class MeanStd(tuple):
    """(mean, population std) pair; nan/nan when the sample is empty."""

    __slots__ = ()

    def __new__(cls, mean: float, std: float):
        return super().__new__(cls, (mean, std))

    @property
    def mean(self) -> float:
        return self[0]

    @property
    def std(self) -> float:
        return self[1]

    @classmethod
    def of(cls, values: Sequence[float]) -> "MeanStd":
        if not values:
            return cls(math.nan, math.nan)
        return cls(statistics.fmean(values), statistics.pstdev(values))


def in_peak(minute: float, windows: Sequence[tuple[float, float]] = PEAK_WINDOWS) -> bool:
    return any(lo <= minute < hi for lo, hi in windows)


@dataclass(frozen=True)
class PoolingMetrics:
    n_requests: int
    requests_load: float
    passengers_load: float
    wt_regular: MeanStd
    wt_premium: MeanStd
    wt_peak_regular: float
    wt_peak_premium: float
    wt_offpeak_regular: float
    wt_offpeak_premium: float


def pooling_metrics(
    solution: PoolingSolution,
    demands: Sequence[Demand],
    peak_windows: Sequence[tuple[float, float]] = PEAK_WINDOWS,
) -> PoolingMetrics:
    by_class: dict[DemandClass, list[float]] = {c: [] for c in DemandClass}
    peak: dict[DemandClass, list[float]] = {c: [] for c in DemandClass}
    offpeak: dict[DemandClass, list[float]] = {c: [] for c in DemandClass}
    passengers = 0
    for group, departure in zip(solution.groups, solution.departures):
        for i in group:
            d = demands[i]
            wait = departure - d.mean
            by_class[d.service_class].append(wait)
            bucket = peak if in_peak(d.mean, peak_windows) else offpeak
            bucket[d.service_class].append(wait)
            passengers += d.passengers
    n_groups = len(solution.groups)
    n_demands = sum(len(g) for g in solution.groups)

    def _mean(values: list[float]) -> float:
        return statistics.fmean(values) if values else math.nan

    return PoolingMetrics(
        n_requests=n_groups,
        requests_load=n_demands / n_groups,
        passengers_load=passengers / n_groups,
        wt_regular=MeanStd.of(by_class[DemandClass.REGULAR]),
        wt_premium=MeanStd.of(by_class[DemandClass.PREMIUM]),
        wt_peak_regular=_mean(peak[DemandClass.REGULAR]),
        wt_peak_premium=_mean(peak[DemandClass.PREMIUM]),
        wt_offpeak_regular=_mean(offpeak[DemandClass.REGULAR]),
        wt_offpeak_premium=_mean(offpeak[DemandClass.PREMIUM]),
    )


@dataclass(frozen=True)
class RoutingMetrics:
    pct_service: float
    n_charge: int
    pct_fast: float
    cps: Optional[float]


def routing_metrics(solution: RoutingSolution, instance: RoutingInstance) -> RoutingMetrics:
    ctx = RoutingContext(instance)
    n_charge = 0
    n_fast = 0
    cost = 0.0
    served = 0
    for v_idx, route in enumerate(solution.routes):
        metrics = ctx.route_metrics(v_idx, tuple(route), want_trace=True)
        if metrics is None:
            raise ValueError(f"route of aircraft index {v_idx} is time-infeasible")
        cost += metrics.monetary
        served += len(route)
        for (rid, plan), point in zip(route, metrics.trace):
            for bought, slow in (
                (point.bought_after, plan.slow_after),
                (point.bought_before, plan.slow_before),
            ):
                if bought > CHARGE_EPS:
                    n_charge += 1
                    if not slow:
                        n_fast += 1
    # add request values back in: this is a pure cost figure
    by_id = {r.id: r.value for r in instance.requests}
    for route in solution.routes:
        for rid, _plan in route:
            cost += by_id[rid]
    total = len(instance.requests)
    return RoutingMetrics(
        pct_service=100.0 * served / total if total else 100.0,
        n_charge=n_charge,
        pct_fast=100.0 * n_fast / n_charge if n_charge else 0.0,
        cps=cost / served if served else None,
    )


@dataclass(frozen=True)
class FairnessRecord:
    demand_id: int
    service_class: DemandClass
    mixed: bool
    group_size: int
    wait: float
    is_last_arrival: bool

    @property
    def category(self) -> str:
        side = "mixed" if self.mixed else "pure"
        return f"{self.service_class.value}_{side}"


def fairness_records(
    solution: PoolingSolution, demands: Sequence[Demand], eps: float = 1e-9
) -> list[FairnessRecord]:
    """One record per demand; group composition read from its final group."""
    records = []
    for group, departure in zip(solution.groups, solution.departures):
        classes = {demands[i].service_class for i in group}
        mixed = len(classes) > 1
        q_max = max(demands[i].quantile for i in group)
        for i in group:
            d = demands[i]
            records.append(
                FairnessRecord(
                    demand_id=i,
                    service_class=d.service_class,
                    mixed=mixed,
                    group_size=len(group),
                    wait=departure - d.mean,
                    is_last_arrival=d.quantile >= q_max - eps,
                )
            )
    records.sort(key=lambda r: r.demand_id)
    return records


def last_arrival_frequency(
    records: Iterable[FairnessRecord],
    service_class: DemandClass = DemandClass.REGULAR,
    mixed: Optional[bool] = None,
    min_group_size: int = 2,
) -> Optional[float]:
    """Share of matching demands that arrive last in their group, or None."""
    hits = total = 0
    for r in records:
        if r.service_class is not service_class or r.group_size < min_group_size:
            continue
        if mixed is not None and r.mixed is not mixed:
            continue
        total += 1
        hits += r.is_last_arrival
    return hits / total if total else None


@dataclass
class FairnessCell:
    alpha_regular: float
    premium_share: float
    # waits pooled across repetitions, only groups of at least 2 demands
    waits: dict[str, list[float]] = field(default_factory=lambda: {c: [] for c in CATEGORIES})
    # one frequency per repetition that produced such groups
    last_arrival_pure: list[float] = field(default_factory=list)
    last_arrival_mixed: list[float] = field(default_factory=list)

    def wait_mean(self, category: str) -> float:
        return MeanStd.of(self.waits[category]).mean


def _fairness_worker(args: tuple) -> tuple:
    seed, share, rep, alpha, t_regular, t_premium, alpha_premium, width, n_demands = args
    model = DemandModel(premium_prob=share)
    demands = gen_demands(n_demands, model, rng=seed_stream(seed, "fairness", str(share), str(rep)))
    config = PoolingConfig(
        t_regular=t_regular,
        t_premium=t_premium,
        alpha_regular=alpha,
        alpha_premium=alpha_premium,
        beam_width=width,
    )
    solution = beam_search(demands, config)
    records = fairness_records(solution, demands)
    waits = {c: [] for c in CATEGORIES}
    for r in records:
        if r.group_size >= 2:
            waits[r.category].append(r.wait)
    pure = last_arrival_frequency(records, mixed=False)
    mixed = last_arrival_frequency(records, mixed=True)
    return share, alpha, rep, waits, pure, mixed


def _run_tasks(worker, tasks: list[tuple], jobs: int) -> list:
    if jobs <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def fairness_experiment(
    alphas: Sequence[float] = tuple(round(0.1 * k, 1) for k in range(11)),
    shares: Sequence[float] = (0.2, 0.5, 0.8),
    n_demands: int = 100,
    repetitions: int = 20,
    seed: Seed = 0,
    *,
    t_regular: float = 25.0,
    t_premium: float = 15.0,
    alpha_premium: float = 1.0,
    beam_width: int = 1000,
    jobs: int = 1,
) -> list[FairnessCell]:
    """Wait and last-arrival distributions by class and group composition.

    Demands are regenerated per (share, repetition) and reused across the
    alpha grid, pairing the samples so trends in alpha are not drowned by
    instance noise.
    """
    tasks = [
        (seed, share, rep, alpha, t_regular, t_premium, alpha_premium, beam_width, n_demands)
        for share in shares
        for alpha in alphas
        for rep in range(repetitions)
    ]
    cells = {(share, alpha): FairnessCell(alpha, share) for share in shares for alpha in alphas}
    for share, alpha, _rep, waits, pure, mixed in _run_tasks(_fairness_worker, tasks, jobs):
        cell = cells[(share, alpha)]
        for category in CATEGORIES:
            cell.waits[category].extend(waits[category])
        if pure is not None:
            cell.last_arrival_pure.append(pure)
        if mixed is not None:
            cell.last_arrival_mixed.append(mixed)
    return [cells[(share, alpha)] for share in shares for alpha in alphas]


@dataclass(frozen=True)
class SweepResult:
    t_premium_values: tuple[float, ...]
    alpha_regular_values: tuple[float, ...]
    # matrices indexed [t_premium][alpha_regular]
    regular_mean: tuple[tuple[float, ...], ...]
    premium_mean: tuple[tuple[float, ...], ...]


def _sweep_worker(args: tuple) -> tuple:
    seed, t_premium, alpha, rep, t_regular, alpha_premium, share, width, n_demands = args
    model = DemandModel(premium_prob=share)
    demands = gen_demands(n_demands, model, rng=seed_stream(seed, "sweep", str(rep)))
    config = PoolingConfig(
        t_regular=t_regular,
        t_premium=t_premium,
        alpha_regular=alpha,
        alpha_premium=alpha_premium,
        beam_width=width,
    )
    metrics = pooling_metrics(beam_search(demands, config), demands)
    return t_premium, alpha, rep, metrics.wt_regular.mean, metrics.wt_premium.mean


def sweep_qos(
    t_premium_values: Sequence[float] = (15.0, 20.0, 25.0),
    alpha_regular_values: Sequence[float] = (0.0, 0.5, 1.0),
    n_demands: int = 100,
    repetitions: int = 20,
    seed: Seed = 0,
    *,
    t_regular: float = 25.0,
    alpha_premium: float = 1.0,
    premium_share: float = 0.5,
    beam_width: int = 1000,
    jobs: int = 1,
) -> SweepResult:
    """Grid of per-class mean waits as QoS knobs vary; demands paired across cells."""
    tasks = [
        (seed, t, a, rep, t_regular, alpha_premium, premium_share, beam_width, n_demands)
        for t in t_premium_values
        for a in alpha_regular_values
        for rep in range(repetitions)
    ]
    sums: dict[tuple[float, float], list[float]] = {
        (t, a): [0.0, 0.0, 0] for t in t_premium_values for a in alpha_regular_values
    }
    for t, a, _rep, reg_mean, prem_mean in _run_tasks(_sweep_worker, tasks, jobs):
        acc = sums[(t, a)]
        if not math.isnan(reg_mean):
            acc[0] += reg_mean
        if not math.isnan(prem_mean):
            acc[1] += prem_mean
        acc[2] += 1
    regular = tuple(
        tuple(sums[(t, a)][0] / sums[(t, a)][2] for a in alpha_regular_values)
        for t in t_premium_values
    )
    premium = tuple(
        tuple(sums[(t, a)][1] / sums[(t, a)][2] for a in alpha_regular_values)
        for t in t_premium_values
    )
    return SweepResult(
        t_premium_values=tuple(t_premium_values),
        alpha_regular_values=tuple(alpha_regular_values),
        regular_mean=regular,
        premium_mean=premium,
    )


def rank_trend(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Spearman rank correlation and its p-value."""
    result = _scipy_stats.spearmanr(xs, ys)
    return float(result.statistic), float(result.pvalue)


@dataclass(frozen=True)
class BenchPoolingRow:
    n_demands: int
    rep: int
    seconds: float
    metrics: PoolingMetrics


def _bench_pooling_worker(args: tuple) -> BenchPoolingRow:
    seed, n, rep, width = args
    demands = gen_demands(n, rng=seed_stream(seed, "bench-pooling", str(n), str(rep)))
    config = PoolingConfig(beam_width=width)
    t0 = time.perf_counter()
    solution = beam_search(demands, config)
    seconds = time.perf_counter() - t0
    return BenchPoolingRow(n, rep, seconds, pooling_metrics(solution, demands))


def bench_pooling(
    d_values: Sequence[int] = (20, 50, 100),
    repetitions: int = 20,
    seed: Seed = 0,
    *,
    beam_width: int = 1000,
    jobs: int = 1,
) -> list[BenchPoolingRow]:
    tasks = [(seed, n, rep, beam_width) for n in d_values for rep in range(repetitions)]
    return _run_tasks(_bench_pooling_worker, tasks, jobs)


@dataclass(frozen=True)
class BenchRoutingRow:
    n_aircraft: int
    n_vertiports: int
    scenario: str
    rep: int
    seconds: float
    iterations: int
    metrics: RoutingMetrics


def _bench_routing_worker(args: tuple) -> BenchRoutingRow:
    seed, n_aircraft, n_vertiports, scenario, rep, budget = args
    instance = gen_routing_instance(
        n_aircraft, n_vertiports, scenario, seed=f"{seed}:bench-routing:{rep}"
    )
    result: VnsResult = uam_vns(
        instance,
        seed=int(seed_stream(seed, "bench-routing-search", str(rep)).integers(2**32)),
        time_budget_seconds=budget,
    )
    return BenchRoutingRow(
        n_aircraft,
        n_vertiports,
        scenario,
        rep,
        result.elapsed_seconds,
        result.iterations,
        routing_metrics(result.solution, instance),
    )


def bench_routing(
    grid: Sequence[tuple[int, int, str]] = ((3, 3, "low"),),
    repetitions: int = 5,
    budget_seconds: float = 60.0,
    seed: Seed = 0,
    *,
    jobs: int = 1,
) -> list[BenchRoutingRow]:
    tasks = [
        (seed, a, v, s, rep, budget_seconds)
        for a, v, s in grid
        for rep in range(repetitions)
    ]
    return _run_tasks(_bench_routing_worker, tasks, jobs)
