"""Electric fleet routing model: connections, charging physics and evaluation.

A route is an ordered list of flight requests per aircraft. Consecutive
requests are joined by a connection that may contain a repositioning
(deadhead) leg and up to two charge segments: one right after the previous
landing, one right before the next takeoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

from .model import (
    EPS,
    Aircraft,
    BatteryParams,
    ChargePlan,
    FlightRequest,
    Network,
    RoutingConfig,
    RoutingSolution,
    SocPoint,
    StratificationError,
    StructuralError,
    Violation,
)

INF = math.inf
CHARGE_EPS = 1e-6


@dataclass(frozen=True)
class StartPoint:
    """Where a route begins: the aircraft's overnight vertiport and ready time."""

    vertiport: int
    minute: float


Anchor = Union[FlightRequest, StartPoint]


@dataclass(frozen=True)
class RoutingInstance:
    """One routing problem: network, fleet, requests, battery model, weights."""

    network: Network
    fleet: tuple[Aircraft, ...]
    requests: tuple[FlightRequest, ...]
    battery: BatteryParams
    config: RoutingConfig = field(default_factory=RoutingConfig)

    def __post_init__(self) -> None:
        if not self.fleet:
            raise StructuralError("at least one aircraft required")
        if len({a.id for a in self.fleet}) != len(self.fleet):
            raise StructuralError("duplicate aircraft ids")
        if len({r.id for r in self.requests}) != len(self.requests):
            raise StructuralError("duplicate request ids")
        ids = {v.id for v in self.network.vertiports}
        for a in self.fleet:
            if a.start_vertiport not in ids:
                raise StructuralError(f"aircraft {a.id} starts at unknown vertiport")
        for r in self.requests:
            if (r.origin, r.destination) not in self.network.legs:
                raise StructuralError(f"request {r.id} uses a leg outside the network")
            fly = self.network.fly(r.origin, r.destination)
            if abs(r.arrive_minute - (r.depart_minute + fly)) > EPS:
                raise StructuralError(f"request {r.id} arrival inconsistent with flight time")

    def request(self, rid: int) -> FlightRequest:
        for r in self.requests:
            if r.id == rid:
                return r
        raise StructuralError(f"unknown request {rid}")


class SearchObjective(NamedTuple):
    """Evaluation of a routing solution, most important terms first."""

    n_unserved: int
    n_fast: int
    monetary: float
    violation: float
    scalar: float

    def lexicographic(self) -> tuple[int, int, float]:
        return (self.n_unserved, self.n_fast, self.monetary)


def _dest(prev: Anchor) -> int:
    return prev.vertiport if isinstance(prev, StartPoint) else prev.destination


def _arrive(prev: Anchor) -> float:
    return prev.minute if isinstance(prev, StartPoint) else prev.arrive_minute


def start_point(aircraft: Aircraft) -> StartPoint:
    return StartPoint(aircraft.start_vertiport, aircraft.start_minute)


def connection_cost(
    prev: Anchor,
    nxt: FlightRequest,
    network: Network,
    eta: float,
    delta: float,
) -> float:
    """Cost of serving ``nxt`` right after ``prev``; +inf when time-infeasible.

    Same vertiport: one turnaround before takeoff. Different vertiports: a
    repositioning leg with a turnaround at each end. Costs are operating time
    priced at ``eta`` plus landing fees, minus the request's service value.
    """
    at, t_prev = _dest(prev), _arrive(prev)
    service_fly = network.fly(nxt.origin, nxt.destination)
    if at == nxt.origin:
        if t_prev + delta > nxt.depart_minute + EPS:
            return INF
        return eta * service_fly + network.vertiport(nxt.destination).landing_fee - nxt.value
    dead_fly = network.fly(at, nxt.origin)
    if dead_fly is None or t_prev + dead_fly + 2 * delta > nxt.depart_minute + EPS:
        return INF
    return (
        eta * (dead_fly + service_fly)
        + network.vertiport(at).landing_fee
        + network.vertiport(nxt.destination).landing_fee
        - nxt.value
    )


def charge_time_bounds(
    prev: Anchor,
    nxt: FlightRequest,
    network: Network,
    delta: float,
) -> tuple[float, float]:
    """(per-segment cap, joint cap) in minutes for charging on this connection."""
    at, t_prev = _dest(prev), _arrive(prev)
    window = nxt.depart_minute - t_prev
    if at == nxt.origin:
        cap = max(window, 0.0)
        return cap, cap
    dead_fly = network.fly(at, nxt.origin)
    if dead_fly is None:
        return 0.0, 0.0
    return max(window - dead_fly - delta, 0.0), max(window - dead_fly, 0.0)


class ConnInfo(NamedTuple):
    cost: float
    cap_segment: float
    cap_joint: float
    deadhead: bool
    g_dead: float


class RouteMetrics(NamedTuple):
    monetary: float
    n_fast: int
    violation: float
    within_bounds: bool
    trace: Optional[tuple[SocPoint, ...]]


class RoutingContext:
    """Memoized per-instance lookups; the hot path of all solvers."""

    __slots__ = ("instance", "network", "battery", "config", "requests", "fees", "_conn")

    def __init__(self, instance: RoutingInstance):
        self.instance = instance
        self.network = instance.network
        self.battery = instance.battery
        self.config = instance.config
        self.requests = {r.id: r for r in instance.requests}
        self.fees = {v.id: v.landing_fee for v in instance.network.vertiports}
        self._conn: dict[tuple[int, int], ConnInfo] = {}

    def anchor(self, key: int) -> Anchor:
        if key < 0:
            return start_point(self.instance.fleet[-key - 1])
        return self.requests[key]

    @staticmethod
    def key_of(v_idx: int) -> int:
        return -(v_idx + 1)

    def conn(self, prev_key: int, rid: int) -> ConnInfo:
        memo = self._conn.get((prev_key, rid))
        if memo is not None:
            return memo
        prev = self.anchor(prev_key)
        nxt = self.requests[rid]
        cost = connection_cost(prev, nxt, self.network, self.config.eta, self.config.delta)
        cap_seg, cap_joint = charge_time_bounds(prev, nxt, self.network, self.config.delta)
        at = _dest(prev)
        deadhead = at != nxt.origin
        g_dead = self.network.leg_energy(at, nxt.origin) if deadhead else 0.0
        if deadhead and g_dead is None:
            cost, g_dead = INF, 0.0
        info = ConnInfo(cost, cap_seg, cap_joint, deadhead, g_dead)
        self._conn[(prev_key, rid)] = info
        return info

    def route_metrics(self, v_idx: int, route: Sequence, want_trace: bool = False) -> Optional[RouteMetrics]:
        """Simulate one aircraft's route; None when a connection is time-infeasible."""
        bat = self.battery
        toc, smin, boc = bat.top_of_charge, bat.soc_min, bat.bottom_of_charge
        rate_s, rate_f, price = bat.rate_slow, bat.rate_fast, bat.price
        e = toc
        prev_key = self.key_of(v_idx)
        monetary = 0.0
        n_fast = 0
        violation = 0.0
        within = True
        trace = [] if want_trace else None
        for rid, plan in route:
            info = self.conn(prev_key, rid)
            if info.cost == INF:
                return None
            bought_a = plan.duration_after * (rate_s if plan.slow_after else rate_f)
            head = toc - e
            if bought_a > head:
                bought_a = head
            if bought_a < 0.0:
                bought_a = 0.0
            if info.deadhead:
                # takeoff for the repositioning leg happens after the first segment
                lack = smin - (e + bought_a)
                if lack > 0.0:
                    violation += lack
                e_mid = e + bought_a - info.g_dead
                if e_mid < boc - EPS:
                    within = False
            else:
                e_mid = e + bought_a
            bought_b = plan.duration_before * (rate_s if plan.slow_before else rate_f)
            head = toc - e_mid
            if bought_b > head:
                bought_b = head
            if bought_b < 0.0:
                bought_b = 0.0
            e_dep = e_mid + bought_b
            lack = smin - e_dep
            if lack > 0.0:
                violation += lack
            req = self.requests[rid]
            e_arr = e_dep - self.network.energy[(req.origin, req.destination)]
            if e_arr < boc - EPS:
                within = False
            if not plan.slow_after and bought_a > CHARGE_EPS:
                n_fast += 1
            if not plan.slow_before and bought_b > CHARGE_EPS:
                n_fast += 1
            monetary += info.cost + (bought_a + bought_b) * price
            if want_trace:
                trace.append(SocPoint(e_dep, e_arr, bought_a, bought_b))
            e = e_arr
            prev_key = rid
        return RouteMetrics(monetary, n_fast, violation, within, tuple(trace) if want_trace else None)


def simulate_soc(aircraft: Aircraft, route: Sequence, instance: RoutingInstance) -> tuple[SocPoint, ...]:
    """Charge trace along one route, starting full at the aircraft's base.

    Energy bought on each segment is capped by both the planned duration times
    the mode's rate and the headroom to top of charge, so the state of charge
    is conserved exactly: e_arrive = e_depart - leg energy, and the next
    departure state follows from bought amounts minus any repositioning leg.
    """
    v_idx = next(i for i, a in enumerate(instance.fleet) if a.id == aircraft.id)
    metrics = RoutingContext(instance).route_metrics(v_idx, route, want_trace=True)
    if metrics is None:
        raise StructuralError("route is not time-feasible")
    return metrics.trace


def soc_violation(
    aircraft: Aircraft,
    route: Sequence,
    trace: Sequence[SocPoint],
    instance: RoutingInstance,
) -> float:
    """Total takeoff-floor slack: service takeoffs plus repositioning takeoffs."""
    bat = instance.battery
    total = 0.0
    at = aircraft.start_vertiport
    e = bat.top_of_charge
    for (rid, _plan), point in zip(route, trace):
        req = instance.request(rid)
        if at != req.origin:
            total += max(0.0, bat.soc_min - (e + point.bought_after))
        total += max(0.0, bat.soc_min - point.e_depart)
        at = req.destination
        e = point.e_arrive
    return total


def evaluate(solution: RoutingSolution, instance: RoutingInstance, lam: float = 0.0) -> SearchObjective:
    """Score a solution: unserved and fast-charge counts, money, takeoff slack."""
    ctx = RoutingContext(instance)
    return evaluate_ctx(solution, ctx, lam)


def evaluate_ctx(solution: RoutingSolution, ctx: RoutingContext, lam: float = 0.0) -> SearchObjective:
    _check_coherent(solution, ctx)
    cfg = ctx.config
    monetary = 0.0
    n_fast = 0
    violation = 0.0
    for v_idx, route in enumerate(solution.routes):
        m = ctx.route_metrics(v_idx, route)
        if m is None:
            return SearchObjective(len(solution.unserved), 0, INF, INF, INF)
        monetary += m.monetary
        n_fast += m.n_fast
        violation += m.violation
    n_unserved = len(solution.unserved)
    scalar = cfg.alpha_unserved * n_unserved + cfg.alpha_fast * n_fast + monetary + lam * violation
    return SearchObjective(n_unserved, n_fast, monetary, violation, scalar)


def _check_coherent(solution: RoutingSolution, ctx: RoutingContext) -> None:
    if len(solution.routes) != len(ctx.instance.fleet):
        raise StructuralError("one route per aircraft required")
    seen: set[int] = set()
    for route in solution.routes:
        for rid, _plan in route:
            if rid not in ctx.requests:
                raise StructuralError(f"route references unknown request {rid}")
            if rid in seen:
                raise StructuralError(f"request {rid} served more than once")
            seen.add(rid)
    for rid in solution.unserved:
        if rid not in ctx.requests:
            raise StructuralError(f"unserved set references unknown request {rid}")
        if rid in seen:
            raise StructuralError(f"request {rid} both served and unserved")
    missing = set(ctx.requests) - seen - set(solution.unserved)
    if missing:
        raise StructuralError(f"requests neither served nor unserved: {sorted(missing)}")


def solution_trace(solution: RoutingSolution, instance: RoutingInstance) -> list[tuple[SocPoint, ...]]:
    """Charge trace per aircraft, route order preserved."""
    ctx = RoutingContext(instance)
    out = []
    for v_idx, route in enumerate(solution.routes):
        m = ctx.route_metrics(v_idx, route, want_trace=True)
        if m is None:
            raise StructuralError(f"route of aircraft index {v_idx} is not time-feasible")
        out.append(m.trace)
    return out


def validate_routing(solution: RoutingSolution, instance: RoutingInstance) -> list[Violation]:
    """Check a routing solution against every constraint; empty list means valid."""
    ctx = RoutingContext(instance)
    _check_coherent(solution, ctx)
    bat = instance.battery
    out: list[Violation] = []
    for v_idx, route in enumerate(solution.routes):
        aid = instance.fleet[v_idx].id
        prev_key = ctx.key_of(v_idx)
        e = bat.top_of_charge
        for rid, plan in route:
            info = ctx.conn(prev_key, rid)
            if info.cost == INF:
                out.append(Violation("timing", f"aircraft {aid}: connection into request {rid} infeasible"))
                break
            if (
                plan.duration_after > info.cap_segment + EPS
                or plan.duration_before > info.cap_segment + EPS
                or plan.duration_after + plan.duration_before > info.cap_joint + EPS
            ):
                out.append(Violation("charge-bound", f"aircraft {aid}: charge durations into request {rid} exceed the window"))
            if not info.deadhead and plan.slow_after != plan.slow_before:
                out.append(Violation("mode-tie", f"aircraft {aid}: same-vertiport connection into request {rid} mixes charge modes"))
            bought_a = min(max(0.0, bat.top_of_charge - e), plan.duration_after * bat.rate(plan.slow_after))
            if info.deadhead:
                if e + bought_a < bat.soc_min - EPS:
                    out.append(Violation("soc-min-deadhead", f"aircraft {aid}: repositioning takeoff before request {rid} below floor"))
                e_mid = e + bought_a - info.g_dead
                if e_mid < bat.bottom_of_charge - EPS:
                    out.append(Violation("soc-bounds", f"aircraft {aid}: battery drained below bottom before request {rid}"))
            else:
                e_mid = e + bought_a
            bought_b = min(max(0.0, bat.top_of_charge - e_mid), plan.duration_before * bat.rate(plan.slow_before))
            e_dep = e_mid + bought_b
            if e_dep < bat.soc_min - EPS:
                out.append(Violation("soc-min-service", f"aircraft {aid}: takeoff for request {rid} below floor"))
            req = ctx.requests[rid]
            e = e_dep - instance.network.energy[(req.origin, req.destination)]
            if e < bat.bottom_of_charge - EPS:
                out.append(Violation("soc-bounds", f"aircraft {aid}: battery drained below bottom after request {rid}"))
            prev_key = rid
    return out


def per_connection_bound(instance: RoutingInstance) -> float:
    """Upper bound on any single connection's monetary magnitude."""
    max_fly = max(instance.network.fly_time.values(), default=0.0)
    max_fee = max((v.landing_fee for v in instance.network.vertiports), default=0.0)
    max_value = max((r.value for r in instance.requests), default=0.0)
    charge = instance.battery.top_of_charge * instance.battery.price
    return instance.config.eta * 2 * max_fly + 2 * max_fee + max_value + charge


def assert_stratified(instance: RoutingInstance) -> None:
    """Weights must keep service count above fast-charge count above money."""
    cfg = instance.config
    bound = per_connection_bound(instance)
    n = max(len(instance.requests), 1)
    if cfg.alpha_fast <= bound:
        raise StratificationError(
            f"alpha_fast {cfg.alpha_fast} does not dominate the per-connection bound {bound:.1f}"
        )
    if cfg.alpha_unserved <= cfg.alpha_fast * 2 * n + n * bound:
        raise StratificationError(
            f"alpha_unserved {cfg.alpha_unserved} does not dominate the fast/monetary total"
        )


def stratified_config(instance: RoutingInstance) -> RoutingConfig:
    """Scale the default weights up in powers of ten until stratified."""
    cfg = instance.config
    bound = per_connection_bound(instance)
    n = max(len(instance.requests), 1)
    alpha_fast = cfg.alpha_fast
    while alpha_fast <= bound:
        alpha_fast *= 10.0
    alpha_unserved = max(cfg.alpha_unserved, alpha_fast * 10.0)
    while alpha_unserved <= alpha_fast * 2 * n + n * bound:
        alpha_unserved *= 10.0
    if alpha_fast == cfg.alpha_fast and alpha_unserved == cfg.alpha_unserved:
        return cfg
    return RoutingConfig(
        eta=cfg.eta,
        delta=cfg.delta,
        alpha_unserved=alpha_unserved,
        alpha_fast=alpha_fast,
        vns=cfg.vns,
    )
