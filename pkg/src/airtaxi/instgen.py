"""Seeded synthetic instance generators.

Demands follow a commuting pattern: passenger counts are mostly singles,
arrival means cluster around a morning and an evening peak with a uniform
background, and a fifth of demands carry a hard departure deadline. Routing
instances draw a fully connected vertiport network with uniform fees and fly
times, a fleet parked at random vertiports at opening time, and requests
spread uniformly over the service day.

All generators are pure functions of (parameters, seed). Seeds are split into
named streams so adding one consumer never shifts the draws of another.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .model import (
    Aircraft,
    ArrivalProfile,
    BatteryParams,
    Demand,
    DemandClass,
    FlightRequest,
    Network,
    RoutingConfig,
    StructuralError,
    Vertiport,
)
from .pooling import VALUE_PER_PASSENGER
from .routing import INF, RoutingContext, RoutingInstance, stratified_config

Seed = Union[int, str]

SCENARIO_RATES = {"low": 5, "intermediate": 10, "high": 15}


def seed_stream(seed: Seed, *names: str) -> np.random.Generator:
    """Independent generator for one named consumer of a master seed."""
    label = ":".join([str(seed), *names])
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "big"))


@dataclass(frozen=True)
class DemandModel:
    """Distribution parameters for one day of synthetic demands."""

    pax_values: tuple[int, ...] = (1, 2, 3, 4)
    pax_weights: tuple[float, ...] = (0.70, 0.20, 0.05, 0.05)
    peak_means: tuple[float, float] = (510.0, 1020.0)
    peak_std: float = 20.0
    mixture_weights: tuple[float, float, float] = (1 / 2, 1 / 3, 1 / 6)
    offset_values: tuple[int, ...] = (3, 5, 7)
    offset_weights: tuple[float, ...] = (0.40, 0.50, 0.10)
    deadline_prob: float = 0.20
    deadline_offsets: tuple[int, ...] = (10, 15, 20)
    premium_prob: float = 0.20
    open_minute: int = 420
    close_minute: int = 1140

    def __post_init__(self) -> None:
        for name in ("pax_weights", "mixture_weights", "offset_weights"):
            weights = getattr(self, name)
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValueError(f"{name} must sum to 1")
        if not 0.0 <= self.premium_prob <= 1.0:
            raise ValueError("premium_prob must lie in [0, 1]")
        if not 0.0 <= self.deadline_prob <= 1.0:
            raise ValueError("deadline_prob must lie in [0, 1]")


@dataclass(frozen=True)
class InfraModel:
    """Vertiport, fleet and battery parameters shared by routing scenarios."""

    landing_fee_choices: tuple[int, ...] = (30, 40, 80)
    fly_time_choices: tuple[int, ...] = (10, 15, 20)
    open_minute: int = 420
    close_minute: int = 1140
    eta: float = 34.0
    top_of_charge: float = 92.0
    bottom_of_charge: float = 0.0
    soc_min: float = 55.0
    delta: float = 10.0
    rate_slow: float = 1.0
    rate_fast: float = 2.0
    price: float = 1.0
    # energy drawn per leg, as a multiple of its fly time
    energy_per_fly_minute: float = 2.0

    def battery(self) -> BatteryParams:
        return BatteryParams(
            top_of_charge=self.top_of_charge,
            bottom_of_charge=self.bottom_of_charge,
            soc_min=self.soc_min,
            rate_slow=self.rate_slow,
            rate_fast=self.rate_fast,
            price=self.price,
        )


def _sample_mean(rng: np.random.Generator, model: DemandModel) -> int:
    lo, hi = model.open_minute, model.close_minute
    while True:
        branch = int(rng.choice(3, p=model.mixture_weights))
        if branch == 2:
            minute = rng.uniform(lo, hi)
        else:
            minute = rng.normal(model.peak_means[branch], model.peak_std)
        minute = int(round(minute))
        if lo <= minute <= hi:
            return minute


def gen_demands(
    n: int,
    model: Optional[DemandModel] = None,
    seed: Seed = 0,
    *,
    rng: Optional[np.random.Generator] = None,
) -> list[Demand]:
    """Draw n demands with ids 0..n-1, deterministically per seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    model = model or DemandModel()
    rng = rng if rng is not None else seed_stream(seed, "demands")
    return [_draw_demand(rng, model, i) for i in range(n)]


def _draw_demand(rng: np.random.Generator, model: DemandModel, did: int) -> Demand:
    pax = int(rng.choice(model.pax_values, p=model.pax_weights))
    premium = bool(rng.random() < model.premium_prob)
    mean = _sample_mean(rng, model)
    offset = int(rng.choice(model.offset_values, p=model.offset_weights))
    deadline: Optional[float] = None
    if rng.random() < model.deadline_prob:
        deadline = mean + offset + int(rng.choice(model.deadline_offsets))
    return Demand(
        id=did,
        passengers=pax,
        arrival=ArrivalProfile(mean_minute=mean, quantile_offset=offset),
        service_class=DemandClass.PREMIUM if premium else DemandClass.REGULAR,
        latest_departure=deadline,
    )


def gen_network(
    n_vertiports: int,
    model: Optional[InfraModel] = None,
    seed: Seed = 0,
    *,
    rng: Optional[np.random.Generator] = None,
) -> Network:
    """Fully connected network with uniform fees and symmetric fly times."""
    if n_vertiports < 2:
        raise ValueError("need at least 2 vertiports")
    model = model or InfraModel()
    rng = rng if rng is not None else seed_stream(seed, "network")
    vertiports = tuple(
        Vertiport(
            id=i,
            landing_fee=float(rng.choice(model.landing_fee_choices)),
            open_minute=model.open_minute,
            close_minute=model.close_minute,
        )
        for i in range(n_vertiports)
    )
    fly: dict[tuple[int, int], float] = {}
    energy: dict[tuple[int, int], float] = {}
    for i in range(n_vertiports):
        for j in range(i + 1, n_vertiports):
            minutes = float(rng.choice(model.fly_time_choices))
            fly[(i, j)] = fly[(j, i)] = minutes
            energy[(i, j)] = energy[(j, i)] = model.energy_per_fly_minute * minutes
    return Network(
        vertiports=vertiports,
        legs=frozenset(fly),
        fly_time=fly,
        energy=energy,
    )


def _step_max_charge(
    ctx: RoutingContext, e: float, prev_key: int, req: FlightRequest, rate: float
) -> Optional[float]:
    """SoC after serving ``req`` from state (e, prev) under the most generous
    charging: fill to top of charge right away, then spend what remains of
    the window at the request origin. None when a floor breaks."""
    bat = ctx.battery
    toc, smin, boc = bat.top_of_charge, bat.soc_min, bat.bottom_of_charge
    info = ctx.conn(prev_key, req.id)
    if info.cost == INF:
        return None
    fill = max(0.0, toc - e) / rate
    after = min(info.cap_segment, info.cap_joint, fill)
    before = min(info.cap_segment, max(0.0, info.cap_joint - after))
    e = min(toc, e + after * rate)
    if info.deadhead:
        if e < smin:
            return None
        e -= info.g_dead
        if e < boc:
            return None
    e = min(toc, e + before * rate)
    if e < smin:
        return None
    e -= ctx.network.energy[(req.origin, req.destination)]
    if e < boc:
        return None
    return e


def fleet_can_serve(
    requests: Sequence[FlightRequest],
    fleet: tuple[Aircraft, ...],
    network: Network,
    battery: Optional[BatteryParams] = None,
    config: Optional[RoutingConfig] = None,
    *,
    slow_only: bool = True,
    node_budget: int = 500_000,
) -> bool:
    """Whether the fleet can serve every request with zero takeoff violation.

    Charging more never lowers any later state of charge, so an aircraft can
    fly a route exactly when the most generous charging plan keeps it valid;
    that check prunes an exhaustive search over request assignments (service
    order within one aircraft is forced by departure times). Slow charging
    only by default, matching the no-fast-charge service target. The node
    budget keeps pathological inputs from hanging the caller; running out
    counts as infeasible, and the answer stays deterministic either way.
    """
    battery = battery or BatteryParams()
    config = config or RoutingConfig()
    reqs = sorted(requests, key=lambda r: (r.depart_minute, r.id))
    if not reqs:
        return True
    instance = RoutingInstance(
        network=network, fleet=fleet, requests=tuple(reqs), battery=battery, config=config
    )
    ctx = RoutingContext(instance)
    rate = battery.rate_slow if slow_only else battery.rate_fast
    n_v = len(fleet)
    # per aircraft, a stack of (soc, last request) states, one per served leg
    stacks = [[(battery.top_of_charge, RoutingContext.key_of(v))] for v in range(n_v)]
    routes: list[list[int]] = [[] for _ in range(n_v)]
    budget = node_budget

    def dfs(i: int) -> bool:
        nonlocal budget
        if i == len(reqs):
            return True
        req = reqs[i]
        seen = set()
        for v in range(n_v):
            # aircraft with the same base and same route so far are
            # interchangeable; trying one of them is enough
            key = (fleet[v].start_vertiport, tuple(routes[v]))
            if key in seen:
                continue
            seen.add(key)
            if budget <= 0:
                return False
            budget -= 1
            e_prev, prev_key = stacks[v][-1]
            e_next = _step_max_charge(ctx, e_prev, prev_key, req, rate)
            if e_next is None:
                continue
            stacks[v].append((e_next, req.id))
            routes[v].append(req.id)
            if dfs(i + 1):
                return True
            stacks[v].pop()
            routes[v].pop()
        return False

    return dfs(0)


def request_reachable(
    request: FlightRequest,
    fleet: tuple[Aircraft, ...],
    network: Network,
    battery: Optional[BatteryParams] = None,
    config: Optional[RoutingConfig] = None,
) -> bool:
    """Whether some aircraft could serve just this request from its base,
    fast charging allowed."""
    return fleet_can_serve(
        (request,), fleet, network, battery, config, slow_only=False
    )


def gen_requests(
    n: int,
    network: Network,
    model: Optional[InfraModel] = None,
    demand_model: Optional[DemandModel] = None,
    seed: Seed = 0,
    *,
    rng: Optional[np.random.Generator] = None,
    fleet: Optional[tuple[Aircraft, ...]] = None,
    battery: Optional[BatteryParams] = None,
    config: Optional[RoutingConfig] = None,
) -> tuple[FlightRequest, ...]:
    """Requests spread uniformly over the day and the legs, valued per seat.

    With a fleet given, each draw is rejected until the whole request set so
    far stays jointly servable on slow charging alone; without the screen a
    draw can demand more than the fleet can possibly fly, and full-service
    benchmarks on generated instances would be meaningless.
    """
    model = model or InfraModel()
    demand_model = demand_model or DemandModel()
    rng = rng if rng is not None else seed_stream(seed, "requests")
    pairs = sorted(network.legs)
    requests = []
    for i in range(n):
        for _attempt in range(1000):
            origin, dest = pairs[int(rng.integers(len(pairs)))]
            depart = int(rng.integers(model.open_minute, model.close_minute + 1))
            pax = int(rng.choice(demand_model.pax_values, p=demand_model.pax_weights))
            request = FlightRequest(
                id=i,
                origin=origin,
                destination=dest,
                depart_minute=depart,
                arrive_minute=depart + network.fly_time[(origin, dest)],
                value=VALUE_PER_PASSENGER * pax,
                passengers=pax,
            )
            if fleet is None or fleet_can_serve(
                (*requests, request), fleet, network, battery, config
            ):
                break
        else:
            raise StructuralError("no jointly servable request found; fleet capacity exhausted")
        requests.append(request)
    return tuple(requests)


def gen_routing_instance(
    n_aircraft: int,
    n_vertiports: int,
    scenario: str = "low",
    seed: Seed = 0,
    *,
    model: Optional[InfraModel] = None,
    demand_model: Optional[DemandModel] = None,
    n_requests: Optional[int] = None,
) -> RoutingInstance:
    """Scenario instance: requests per aircraft set by the demand rate.

    The returned instance carries auto-scaled objective weights so the
    service, fast-charge and money priorities stay strictly ordered.
    """
    if n_aircraft < 1:
        raise ValueError("need at least 1 aircraft")
    if scenario not in SCENARIO_RATES:
        raise ValueError(f"unknown scenario {scenario!r}, expected one of {sorted(SCENARIO_RATES)}")
    model = model or InfraModel()
    network = gen_network(n_vertiports, model, rng=seed_stream(seed, "network"))
    fleet_rng = seed_stream(seed, "fleet")
    fleet = tuple(
        Aircraft(
            id=v,
            start_vertiport=int(fleet_rng.integers(n_vertiports)),
            start_minute=model.open_minute,
        )
        for v in range(n_aircraft)
    )
    count = n_requests if n_requests is not None else SCENARIO_RATES[scenario] * n_aircraft
    battery = model.battery()
    config = RoutingConfig(eta=model.eta, delta=model.delta)
    requests = gen_requests(
        count,
        network,
        model,
        demand_model,
        rng=seed_stream(seed, "requests"),
        fleet=fleet,
        battery=battery,
        config=config,
    )
    instance = RoutingInstance(
        network=network,
        fleet=fleet,
        requests=requests,
        battery=battery,
        config=config,
    )
    cfg = stratified_config(instance)
    if cfg is not instance.config:
        instance = replace(instance, config=cfg)
    return instance
