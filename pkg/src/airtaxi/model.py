"""Core domain types, configuration objects and solution validators."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

EPS = 1e-9


class StructuralError(ValueError):
    """Malformed input: unknown ids, incoherent references, empty groups."""


class UnservableDemandError(ValueError):
    """Demand whose constraints can never be satisfied by any grouping."""


class StratificationError(ValueError):
    """Objective weights too small to keep the priority tiers separated."""


class DemandClass(Enum):
    REGULAR = "regular"
    PREMIUM = "premium"


@dataclass(frozen=True)
class ArrivalProfile:
    """Passenger arrival at the origin vertiport: mean and confidence quantile."""

    mean_minute: float
    quantile_offset: float

    def __post_init__(self) -> None:
        if self.quantile_offset < 0:
            raise ValueError("quantile_offset must be >= 0")

    @property
    def quantile(self) -> float:
        return self.mean_minute + self.quantile_offset


@dataclass(frozen=True)
class Demand:
    """One booking: a party travelling together on a fixed origin-destination pair."""

    id: int
    passengers: int
    arrival: ArrivalProfile
    service_class: DemandClass = DemandClass.REGULAR
    latest_departure: Optional[float] = None

    def __post_init__(self) -> None:
        if self.id < 0:
            raise StructuralError("demand id must be >= 0")
        if self.passengers < 1:
            raise ValueError("a demand carries at least one passenger")
        # a departure deadline earlier than the arrival quantile can never be met
        if self.latest_departure is not None and self.latest_departure < self.arrival.quantile - EPS:
            raise UnservableDemandError(
                f"demand {self.id}: latest departure {self.latest_departure} "
                f"precedes arrival quantile {self.arrival.quantile}"
            )

    @property
    def mean(self) -> float:
        return self.arrival.mean_minute

    @property
    def quantile(self) -> float:
        return self.arrival.quantile


@dataclass(frozen=True)
class PoolingConfig:
    """Grouping parameters: cabin capacity, waiting caps and objective weights."""

    capacity: int = 4
    t_regular: float = 25.0
    t_premium: float = 15.0
    alpha_regular: float = 1.0
    alpha_premium: float = 2.0
    lambda_group: Optional[float] = None
    beam_width: int = 1000

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.t_premium > self.t_regular:
            raise ValueError("premium waiting cap must not exceed the regular one")
        if min(self.t_premium, self.t_regular) < 0:
            raise ValueError("waiting caps must be >= 0")
        if min(self.alpha_regular, self.alpha_premium) < 0:
            raise ValueError("waiting weights must be >= 0")
        if self.lambda_group is not None and self.lambda_group <= 0:
            raise ValueError("group-opening weight must be > 0")
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")

    def max_wait(self, service_class: DemandClass) -> float:
        return self.t_premium if service_class is DemandClass.PREMIUM else self.t_regular

    def alpha(self, service_class: DemandClass) -> float:
        return self.alpha_premium if service_class is DemandClass.PREMIUM else self.alpha_regular

    def lambda_for(self, n_demands: int) -> float:
        """Group-opening weight; defaults high enough to dominate any waiting total."""
        if self.lambda_group is not None:
            return self.lambda_group
        alpha_max = max(self.alpha_regular, self.alpha_premium, 1e-12)
        return 10.0 * max(n_demands, 1) * self.t_regular * alpha_max


@dataclass(frozen=True)
class PoolingSolution:
    """Partition of demands into flight groups plus one departure time per group."""

    groups: tuple[tuple[int, ...], ...]
    departures: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.groups) != len(self.departures):
            raise StructuralError("one departure per group required")


@dataclass(frozen=True)
class Vertiport:
    id: int
    landing_fee: float
    open_minute: float = 420.0
    close_minute: float = 1140.0

    def __post_init__(self) -> None:
        if self.landing_fee < 0:
            raise ValueError("landing fee must be >= 0")
        if self.open_minute >= self.close_minute:
            raise ValueError("operating window must be non-empty")


@dataclass(frozen=True)
class Network:
    """Vertiports, bookable legs and the flight-time/energy matrices.

    The matrices may cover pairs outside the bookable leg set; such pairs are
    usable for repositioning flights only.
    """

    vertiports: tuple[Vertiport, ...]
    legs: frozenset[tuple[int, int]]
    fly_time: Mapping[tuple[int, int], float]
    energy: Mapping[tuple[int, int], float]

    def __post_init__(self) -> None:
        ids = {v.id for v in self.vertiports}
        if len(ids) != len(self.vertiports):
            raise StructuralError("duplicate vertiport ids")
        for i, j in self.legs:
            if i == j or i not in ids or j not in ids:
                raise StructuralError(f"leg ({i}, {j}) is not a pair of distinct vertiports")
            if self.fly_time.get((i, j), 0) <= 0 or self.energy.get((i, j), 0) <= 0:
                raise StructuralError(f"leg ({i}, {j}) lacks a positive flight time or energy")

    def vertiport(self, vid: int) -> Vertiport:
        for v in self.vertiports:
            if v.id == vid:
                return v
        raise StructuralError(f"unknown vertiport {vid}")

    def fly(self, i: int, j: int) -> Optional[float]:
        return self.fly_time.get((i, j))

    def leg_energy(self, i: int, j: int) -> Optional[float]:
        return self.energy.get((i, j))


@dataclass(frozen=True)
class BatteryParams:
    """State-of-charge model: bounds, takeoff floor, charging rates and price."""

    top_of_charge: float = 92.0
    bottom_of_charge: float = 0.0
    soc_min: float = 55.0
    rate_slow: float = 1.0
    rate_fast: float = 2.0
    price: float = 1.0

    def __post_init__(self) -> None:
        if not (self.bottom_of_charge <= self.soc_min <= self.top_of_charge):
            raise ValueError("need bottom_of_charge <= soc_min <= top_of_charge")
        if not (0 < self.rate_slow < self.rate_fast):
            raise ValueError("need 0 < rate_slow < rate_fast")
        if self.price < 0:
            raise ValueError("energy price must be >= 0")

    def rate(self, slow: bool) -> float:
        return self.rate_slow if slow else self.rate_fast


@dataclass(frozen=True)
class Aircraft:
    id: int
    start_vertiport: int
    start_minute: float


@dataclass(frozen=True)
class FlightRequest:
    """A grouped flight to operate: leg, departure, arrival and service value."""

    id: int
    origin: int
    destination: int
    depart_minute: float
    arrive_minute: float
    value: float
    passengers: int

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise StructuralError("a request needs two distinct vertiports")
        if self.arrive_minute <= self.depart_minute:
            raise ValueError("arrival must follow departure")
        if self.passengers < 1:
            raise ValueError("a request carries at least one passenger")


@dataclass(frozen=True)
class ChargePlan:
    """Charging on one connection: a segment after landing, one before takeoff."""

    duration_after: float = 0.0
    duration_before: float = 0.0
    slow_after: bool = True
    slow_before: bool = True

    def __post_init__(self) -> None:
        if self.duration_after < 0 or self.duration_before < 0:
            raise ValueError("charge durations must be >= 0")
        # plans end up inside route-tuple cache keys, hashed millions of times
        object.__setattr__(self, "_hash", hash(
            (self.duration_after, self.duration_before, self.slow_after, self.slow_before)
        ))

    def __hash__(self) -> int:
        return self._hash


ZERO_CHARGE = ChargePlan()

RouteStop = tuple[int, ChargePlan]


@dataclass
class RoutingSolution:
    """Per-aircraft ordered request routes (with entering charge plans) + unserved set."""

    routes: list[list[RouteStop]]
    unserved: set[int]

    def clone(self) -> "RoutingSolution":
        return RoutingSolution([list(r) for r in self.routes], set(self.unserved))

    def served_ids(self) -> list[int]:
        return [rid for route in self.routes for rid, _ in route]


@dataclass(frozen=True)
class SocPoint:
    """Charge trace entry for one served request.

    ``bought_after``/``bought_before`` belong to the connection entering the
    request: energy bought right after the previous landing and right before
    this takeoff.
    """

    e_depart: float
    e_arrive: float
    bought_after: float
    bought_before: float


@dataclass(frozen=True)
class VnsConfig:
    """Search schedule: stagnation, penalty updates and wall-clock budget."""

    stagnation_limit: int = 50
    beta_incr: float = 100.0
    beta_decr: float = 4.0
    update_period: int = 20
    validity_streak: int = 5
    time_budget_seconds: float = 1800.0

    def __post_init__(self) -> None:
        if self.stagnation_limit < 1 or self.update_period < 1 or self.validity_streak < 1:
            raise ValueError("schedule counters must be >= 1")
        if self.beta_incr <= 0 or self.beta_decr <= 1:
            raise ValueError("need beta_incr > 0 and beta_decr > 1")
        if self.time_budget_seconds <= 0:
            raise ValueError("time budget must be > 0")


@dataclass(frozen=True)
class RoutingConfig:
    """Routing objective weights and operational constants."""

    eta: float = 34.0
    delta: float = 10.0
    alpha_unserved: float = 1e7
    alpha_fast: float = 1e3
    vns: VnsConfig = field(default_factory=VnsConfig)

    def __post_init__(self) -> None:
        if self.eta < 0 or self.delta < 0:
            raise ValueError("eta and delta must be >= 0")
        if not self.alpha_unserved > self.alpha_fast > 0:
            raise ValueError("need alpha_unserved > alpha_fast > 0")


@dataclass(frozen=True)
class Violation:
    """One broken constraint found by a validator."""

    tag: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.tag}] {self.detail}"


def validate_pooling(
    solution: PoolingSolution,
    demands: Sequence[Demand],
    config: PoolingConfig,
) -> list[Violation]:
    """Check a grouping against every pooling constraint; empty list means valid."""
    by_id = {d.id: d for d in demands}
    if len(by_id) != len(demands):
        raise StructuralError("duplicate demand ids")

    out: list[Violation] = []
    seen: dict[int, int] = {}
    for k, (group, f) in enumerate(zip(solution.groups, solution.departures)):
        if not group:
            raise StructuralError(f"group {k} is empty")
        members = []
        for i in group:
            if i not in by_id:
                raise StructuralError(f"group {k} references unknown demand {i}")
            seen[i] = seen.get(i, 0) + 1
            members.append(by_id[i])

        if sum(d.passengers for d in members) > config.capacity:
            out.append(Violation("capacity", f"group {k} exceeds capacity {config.capacity}"))
        max_q = max(d.quantile for d in members)
        if f < max_q - EPS:
            out.append(Violation("quantile", f"group {k} departs at {f} before quantile {max_q}"))
        elif f > max_q + EPS:
            out.append(Violation("departure-not-max", f"group {k} departs at {f}, not at {max_q}"))
        for d in members:
            if d.latest_departure is not None and f > d.latest_departure + EPS:
                out.append(Violation("deadline", f"demand {d.id} departs past its deadline"))
            if f - d.mean > config.max_wait(d.service_class) + EPS:
                out.append(Violation("max-wait", f"demand {d.id} waits beyond its class cap"))

    for d in demands:
        n = seen.get(d.id, 0)
        if n != 1:
            out.append(Violation("assignment", f"demand {d.id} appears {n} times"))
    return out


def demand_wait_cap(demand: Demand, config: PoolingConfig) -> float:
    """Largest departure time this demand tolerates (deadline and waiting cap)."""
    cap = demand.mean + config.max_wait(demand.service_class)
    if demand.latest_departure is not None:
        cap = min(cap, demand.latest_departure)
    return cap


def demand_servable(demand: Demand, config: PoolingConfig) -> bool:
    """A demand is servable iff its own singleton group satisfies every constraint."""
    return (
        demand.passengers <= config.capacity
        and demand.quantile <= demand_wait_cap(demand, config) + EPS
    )


__all__ = [
    "EPS",
    "StructuralError",
    "UnservableDemandError",
    "StratificationError",
    "DemandClass",
    "ArrivalProfile",
    "Demand",
    "PoolingConfig",
    "PoolingSolution",
    "Vertiport",
    "Network",
    "BatteryParams",
    "Aircraft",
    "FlightRequest",
    "ChargePlan",
    "ZERO_CHARGE",
    "RouteStop",
    "RoutingSolution",
    "SocPoint",
    "VnsConfig",
    "RoutingConfig",
    "Violation",
    "validate_pooling",
    "demand_wait_cap",
    "demand_servable",
]
