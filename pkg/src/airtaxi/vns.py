"""Variable neighborhood search over fleet routings.

Four neighborhoods: shift one request, swap two requests across aircraft,
re-optimize one charge slot, rotate whole routes between aircraft. Descent is
best-improvement over all four; diversification shakes with a uniform random
shift or swap. Takeoff-floor violations enter the objective through an
adaptive penalty weight so the search can cross infeasible regions.
"""
from __future__ import annotations

import math
import random
import time
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Optional, Sequence

from .model import (
    ChargePlan,
    RoutingSolution,
    RouteStop,
    StructuralError,
    VnsConfig,
    ZERO_CHARGE,
)
from .routing import (
    INF,
    CHARGE_EPS,
    RouteMetrics,
    RoutingContext,
    RoutingInstance,
    SearchObjective,
    assert_stratified,
)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
IMPROVE_EPS = 1e-9


def golden_section(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 0.25,
) -> tuple[float, float]:
    """Minimize a unimodal function on [lo, hi]; returns the best probed point."""
    best_x, best_f = lo, f(lo)
    fh = f(hi)
    if fh < best_f:
        best_x, best_f = hi, fh
    a, b = lo, hi
    c = b - (b - a) * INV_PHI
    d = a + (b - a) * INV_PHI
    fc, fd = f(c), f(d)
    if fc < best_f:
        best_x, best_f = c, fc
    if fd < best_f:
        best_x, best_f = d, fd
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * INV_PHI
            fc = f(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * INV_PHI
            fd = f(d)
            if fd < best_f:
                best_x, best_f = d, fd
    return best_x, best_f


class Move(NamedTuple):
    """Replacement routes for a few aircraft plus unserved-set adjustments."""

    replaced: tuple[tuple[int, tuple[RouteStop, ...]], ...]
    to_unserved: tuple[int, ...] = ()
    from_unserved: tuple[int, ...] = ()


class _Work:
    """Search state: solution plus per-route metrics kept in sync."""

    __slots__ = ("ctx", "routes", "unserved", "metrics")

    def __init__(self, ctx: RoutingContext, routes, unserved, metrics):
        self.ctx = ctx
        self.routes = routes
        self.unserved = unserved
        self.metrics = metrics

    @classmethod
    def from_solution(cls, solution: RoutingSolution, ctx: RoutingContext) -> "_Work":
        metrics = []
        for v_idx, route in enumerate(solution.routes):
            m = ctx.route_metrics(v_idx, route)
            if m is None:
                raise StructuralError(f"route of aircraft index {v_idx} is not time-feasible")
            metrics.append(m)
        return cls(ctx, [list(r) for r in solution.routes], set(solution.unserved), metrics)

    def clone(self) -> "_Work":
        return _Work(self.ctx, [list(r) for r in self.routes], set(self.unserved), list(self.metrics))

    def to_solution(self) -> RoutingSolution:
        return RoutingSolution([list(r) for r in self.routes], set(self.unserved))

    def totals(self) -> tuple[int, int, float, float, bool]:
        n_fast = sum(m.n_fast for m in self.metrics)
        monetary = sum(m.monetary for m in self.metrics)
        violation = sum(m.violation for m in self.metrics)
        within = all(m.within_bounds for m in self.metrics)
        return len(self.unserved), n_fast, monetary, violation, within

    def scalar(self, lam: float) -> float:
        cfg = self.ctx.config
        n_u, n_fast, monetary, violation, _ = self.totals()
        return cfg.alpha_unserved * n_u + cfg.alpha_fast * n_fast + monetary + lam * violation

    def objective(self, lam: float = 0.0) -> SearchObjective:
        cfg = self.ctx.config
        n_u, n_fast, monetary, violation, _ = self.totals()
        scalar = cfg.alpha_unserved * n_u + cfg.alpha_fast * n_fast + monetary + lam * violation
        return SearchObjective(n_u, n_fast, monetary, violation, scalar)


def _route_contrib(m: RouteMetrics, alpha_fast: float, lam: float) -> float:
    return m.monetary + alpha_fast * m.n_fast + lam * m.violation


_MISSING = object()


def _move_metrics(work: _Work, move: Move, cache: Optional[dict] = None) -> Optional[list[RouteMetrics]]:
    out = []
    for v_idx, route in move.replaced:
        if cache is None:
            m = work.ctx.route_metrics(v_idx, route)
        else:
            m = cache.get((v_idx, route), _MISSING)
            if m is _MISSING:
                m = work.ctx.route_metrics(v_idx, route)
                cache[(v_idx, route)] = m
        if m is None:
            return None
        out.append(m)
    return out


def _move_delta(work: _Work, move: Move, mets: Sequence[RouteMetrics], lam: float) -> float:
    cfg = work.ctx.config
    delta = cfg.alpha_unserved * (len(move.to_unserved) - len(move.from_unserved))
    for (v_idx, _route), m in zip(move.replaced, mets):
        delta += _route_contrib(m, cfg.alpha_fast, lam) - _route_contrib(work.metrics[v_idx], cfg.alpha_fast, lam)
    return delta


def _apply(work: _Work, move: Move, mets: Sequence[RouteMetrics]) -> None:
    for (v_idx, route), m in zip(move.replaced, mets):
        work.routes[v_idx] = list(route)
        work.metrics[v_idx] = m
    work.unserved.update(move.to_unserved)
    work.unserved.difference_update(move.from_unserved)


def _applied_copy(work: _Work, move: Move, mets: Sequence[RouteMetrics]) -> _Work:
    out = work.clone()
    _apply(out, move, mets)
    return out


def _remove_at(route: Sequence[RouteStop], p: int) -> tuple[RouteStop, ...]:
    out = list(route[:p]) + list(route[p + 1 :])
    if p < len(out):
        # the follower's entering connection changed; its old charge plan is void
        out[p] = (out[p][0], ZERO_CHARGE)
    return tuple(out)


def _insert_stop(route: Sequence[RouteStop], rid: int, ctx: RoutingContext) -> tuple[RouteStop, ...]:
    departs = [ctx.requests[r].depart_minute for r, _ in route]
    pos = bisect_left(departs, ctx.requests[rid].depart_minute)
    out = list(route[:pos]) + [(rid, ZERO_CHARGE)] + list(route[pos:])
    if pos + 1 < len(out):
        out[pos + 1] = (out[pos + 1][0], ZERO_CHARGE)
    return tuple(out)


def _shift_moves(work: _Work) -> Iterator[Move]:
    """Move one request to another aircraft or to/from the unserved set."""
    n_aircraft = len(work.routes)
    for v, route in enumerate(work.routes):
        for p in range(len(route)):
            rid = route[p][0]
            shrunk = _remove_at(route, p)
            yield Move(((v, shrunk),), to_unserved=(rid,))
            for v2 in range(n_aircraft):
                if v2 == v:
                    continue
                grown = _insert_stop(work.routes[v2], rid, work.ctx)
                yield Move(((v, shrunk), (v2, grown)))
    for rid in sorted(work.unserved):
        for v in range(n_aircraft):
            grown = _insert_stop(work.routes[v], rid, work.ctx)
            yield Move(((v, grown),), from_unserved=(rid,))


def _swap_moves(work: _Work) -> Iterator[Move]:
    """Exchange two requests served by different aircraft."""
    for v1 in range(len(work.routes)):
        for v2 in range(v1 + 1, len(work.routes)):
            r1, r2 = work.routes[v1], work.routes[v2]
            for p1 in range(len(r1)):
                for p2 in range(len(r2)):
                    a, b = r1[p1][0], r2[p2][0]
                    new1 = _insert_stop(_remove_at(r1, p1), b, work.ctx)
                    new2 = _insert_stop(_remove_at(r2, p2), a, work.ctx)
                    yield Move(((v1, new1), (v2, new2)))


def _plan_with(plan: ChargePlan, side: int, duration: float, slow: bool, deadhead: bool) -> ChargePlan:
    if deadhead:
        if side == 0:
            return ChargePlan(duration, plan.duration_before, slow, plan.slow_before)
        return ChargePlan(plan.duration_after, duration, plan.slow_after, slow)
    # same-vertiport connection: one charging site, modes are tied
    if side == 0:
        return ChargePlan(duration, plan.duration_before, slow, slow)
    return ChargePlan(plan.duration_after, duration, slow, slow)


_T_BUMP = 2.0**-30


def _recharge_moves(work: _Work, lam: float) -> Iterator[Move]:
    """Per charge slot, the best (mode, duration) for the rest of the route.

    One traced simulation per route locates the takeoff deficits and the fast
    purchases downstream of every slot, and slots that cannot influence either
    are skipped outright. For a probed slot the scalar objective is piecewise
    linear in the energy bought there: the extra charge carries downstream
    until a full battery absorbs it, so every kink is a downstream takeoff
    deficit, an absorption onset, the slot's own headroom, or the amount that
    squeezes a later fast purchase down to nothing. The kinks are read off one
    zero-bought trace per mode and probed exactly, which both beats and
    outruns a blind line search over the duration.
    """
    ctx = work.ctx
    alpha_fast = ctx.config.alpha_fast
    bat = ctx.battery
    toc, smin = bat.top_of_charge, bat.soc_min
    for v, route in enumerate(work.routes):
        if not route:
            continue
        traced = ctx.route_metrics(v, route, want_trace=True)
        if traced is None:
            continue
        n = len(route)
        # slot order follows the simulation: 2p is the purchase at the
        # previous vertiport, 2p+1 the one at the request origin
        n2 = 2 * n
        takeoff_soc = [math.inf] * n2
        fast_here = [False] * n2
        infos = []
        prev_key = ctx.key_of(v)
        for p, (rid, plan) in enumerate(route):
            info = ctx.conn(prev_key, rid)
            infos.append(info)
            pt = traced.trace[p]
            if info.deadhead:
                takeoff_soc[2 * p] = pt.e_depart - pt.bought_before + info.g_dead
            takeoff_soc[2 * p + 1] = pt.e_depart
            fast_here[2 * p] = not plan.slow_after and pt.bought_after > CHARGE_EPS
            fast_here[2 * p + 1] = not plan.slow_before and pt.bought_before > CHARGE_EPS
            prev_key = rid
        deficit_from = [False] * (n2 + 1)
        fast_after = [False] * (n2 + 1)
        for s in range(n2 - 1, -1, -1):
            deficit_from[s] = takeoff_soc[s] < smin or deficit_from[s + 1]
            if s + 1 < n2:
                fast_after[s] = fast_here[s + 1] or fast_after[s + 1]
        for p, (rid, plan) in enumerate(route):
            info = infos[p]
            for side in (0, 1):
                slot = 2 * p + side
                current = plan.duration_after if side == 0 else plan.duration_before
                if current <= 0.0 and not deficit_from[slot] and not fast_after[slot]:
                    continue
                other = plan.duration_before if side == 0 else plan.duration_after
                other_slow = plan.slow_before if side == 0 else plan.slow_after
                hi = min(info.cap_segment, info.cap_joint - other)
                if hi <= 0.0:
                    continue
                best = None
                for slow in (True, False):
                    cache: dict[float, tuple[float, float]] = {}

                    def probe(t: float, _slow: bool = slow) -> tuple[float, float]:
                        got = cache.get(t)
                        if got is None:
                            trial = list(route)
                            trial[p] = (rid, _plan_with(plan, side, t, _slow, info.deadhead))
                            m = ctx.route_metrics(v, trial)
                            got = (
                                (INF, INF)
                                if m is None
                                else (_route_contrib(m, alpha_fast, lam), m.violation)
                            )
                            cache[t] = got
                        return got

                    # baseline: this slot buys nothing, mode flags as probed
                    # (ties on a same-vertiport connection flip the sibling
                    # segment's rate, so the baseline is mode-specific)
                    if current <= 0.0 and (info.deadhead or other <= 0.0 or other_slow == slow):
                        z = traced
                    else:
                        trial0 = list(route)
                        trial0[p] = (rid, _plan_with(plan, side, 0.0, slow, info.deadhead))
                        z = ctx.route_metrics(v, trial0, want_trace=True)
                    if z is None:
                        continue
                    cache[0.0] = (_route_contrib(z, alpha_fast, lam), z.violation)
                    rate = bat.rate_slow if slow else bat.rate_fast
                    # walk the zero-bought trace from this slot on, collecting
                    # the energies where the objective kinks; m_cap is how
                    # much extra charge still reaches the walk's position
                    # before some full battery soaks it up
                    cands: set[float] = set()
                    m_cap = math.inf
                    b_max = 0.0
                    e_entry = toc if p == 0 else z.trace[p - 1].e_arrive
                    for p2 in range(p, n):
                        rid2, plan2 = route[p2]
                        info2 = infos[p2]
                        pt2 = z.trace[p2]
                        e_mid = pt2.e_depart - pt2.bought_before
                        s_a = 2 * p2
                        if s_a == slot:
                            b_max = min(hi * rate, toc - e_entry)
                        elif s_a > slot:
                            m_cap = _absorb(
                                cands, m_cap, b_max, toc, e_entry,
                                pt2.bought_after, plan2.slow_after,
                            )
                        if info2.deadhead and s_a >= slot:
                            d = smin - (e_entry + pt2.bought_after)
                            if 0.0 < d <= min(m_cap, b_max):
                                cands.add(d)
                        s_b = s_a + 1
                        if s_b == slot:
                            b_max = min(hi * rate, toc - e_mid)
                        elif s_b > slot:
                            flag = plan2.slow_before
                            if p2 == p and not info.deadhead:
                                flag = slow
                            m_cap = _absorb(
                                cands, m_cap, b_max, toc, e_mid,
                                pt2.bought_before, flag,
                            )
                        d = smin - pt2.e_depart
                        if 0.0 < d <= min(m_cap, b_max):
                            cands.add(d)
                        if m_cap <= 0.0:
                            break
                        e_entry = pt2.e_arrive
                    if b_max > 0.0:
                        cands.add(b_max)
                    x, fx = 0.0, probe(0.0)[0]
                    for b in cands:
                        if not 0.0 < b <= b_max:
                            continue
                        t = b / rate
                        ft, viol = probe(t)
                        if 0.0 < viol <= 1e-9:
                            # float dust from re-simulating; nudge across
                            t2 = t + _T_BUMP
                            if t2 <= hi:
                                ft2, _ = probe(t2)
                                if ft2 < ft:
                                    t, ft = t2, ft2
                        if ft < fx:
                            x, fx = t, ft
                    if best is None or fx < best[0]:
                        best = (fx, x, slow)
                if best is None:
                    continue
                _fx, duration, slow = best
                new_plan = _plan_with(plan, side, duration, slow, info.deadhead)
                if duration > 0.0:
                    trial = list(route)
                    trial[p] = (rid, new_plan)
                    m = ctx.route_metrics(v, trial, want_trace=True)
                    bought = m.trace[p].bought_after if side == 0 else m.trace[p].bought_before
                    if bought < CHARGE_EPS:
                        new_plan = _plan_with(plan, side, 0.0, slow, info.deadhead)
                trial = list(route)
                trial[p] = (rid, new_plan)
                yield Move(((v, tuple(trial)),))


def _absorb(
    cands: set[float],
    m_cap: float,
    b_max: float,
    toc: float,
    e_before: float,
    bought: float,
    slow: bool,
) -> float:
    """Fold one downstream purchase into the kink walk; returns the new cap.

    Carried charge raises the state the purchase starts from, so past an
    onset the purchase shrinks one-for-one (flat money) and at `free` it is
    gone entirely, which for a fast purchase also drops the fast-charge count.
    """
    free = toc - e_before
    reach = min(m_cap, b_max)
    if not slow and bought > CHARGE_EPS:
        for b_shed in (free - 0.5 * CHARGE_EPS, free):
            if 0.0 < b_shed <= reach:
                cands.add(b_shed)
    onset = free - bought
    if 0.0 < onset <= reach:
        cands.add(onset)
    return min(m_cap, max(onset, 0.0))


def _rotate_moves(work: _Work) -> Iterator[Move]:
    """Exchange the complete routes of two aircraft, shedding unreachable heads."""
    ctx = work.ctx
    for v1 in range(len(work.routes)):
        for v2 in range(v1 + 1, len(work.routes)):
            if not work.routes[v1] and not work.routes[v2]:
                continue
            new1, drop1 = _adapt_head(work.routes[v2], v1, ctx)
            new2, drop2 = _adapt_head(work.routes[v1], v2, ctx)
            yield Move(((v1, new1), (v2, new2)), to_unserved=tuple(drop1 + drop2))


def _adapt_head(route: Sequence[RouteStop], v_idx: int, ctx: RoutingContext) -> tuple[tuple[RouteStop, ...], list[int]]:
    out = list(route)
    dropped: list[int] = []
    while out:
        rid = out[0][0]
        out[0] = (rid, ZERO_CHARGE)
        if ctx.conn(ctx.key_of(v_idx), rid).cost < INF:
            break
        dropped.append(rid)
        out.pop(0)
    return tuple(out), dropped


_NEIGHBORHOODS = (_shift_moves, _swap_moves, _recharge_moves, _rotate_moves)


def _moves_for(work: _Work, index: int, lam: float) -> Iterator[Move]:
    if index == 2:
        return _recharge_moves(work, lam)
    return _NEIGHBORHOODS[index](work)


def _solutions(work: _Work, moves: Iterator[Move]) -> Iterator[RoutingSolution]:
    for move in moves:
        mets = _move_metrics(work, move)
        if mets is None:
            continue
        yield _applied_copy(work, move, mets).to_solution()


def neighborhood_shift(solution: RoutingSolution, instance: RoutingInstance) -> Iterator[RoutingSolution]:
    work = _Work.from_solution(solution, RoutingContext(instance))
    return _solutions(work, _shift_moves(work))


def neighborhood_swap(solution: RoutingSolution, instance: RoutingInstance) -> Iterator[RoutingSolution]:
    work = _Work.from_solution(solution, RoutingContext(instance))
    return _solutions(work, _swap_moves(work))


def neighborhood_recharge(solution: RoutingSolution, instance: RoutingInstance, lam: float = 0.0) -> Iterator[RoutingSolution]:
    work = _Work.from_solution(solution, RoutingContext(instance))
    return _solutions(work, _recharge_moves(work, lam))


def neighborhood_rotate(solution: RoutingSolution, instance: RoutingInstance) -> Iterator[RoutingSolution]:
    work = _Work.from_solution(solution, RoutingContext(instance))
    return _solutions(work, _rotate_moves(work))


def _descend(work: _Work, lam: float, observer: Optional[Callable[[_Work], None]] = None) -> _Work:
    k = 0
    while k < len(_NEIGHBORHOODS):
        best_delta = -IMPROVE_EPS
        best_pair = None
        cache: dict = {}
        for move in _moves_for(work, k, lam):
            mets = _move_metrics(work, move, cache)
            if mets is None:
                continue
            delta = _move_delta(work, move, mets, lam)
            if delta < best_delta:
                best_delta = delta
                best_pair = (move, mets)
        if best_pair is None:
            k += 1
            continue
        _apply(work, *best_pair)
        if observer is not None:
            observer(work)
        k = 0
    return work


def vnd(start: RoutingSolution, instance: RoutingInstance, lam: float = 0.0) -> RoutingSolution:
    """Best-improvement descent over shift, swap, recharge and rotate moves.

    Restarts at the first neighborhood after every improving move; returns a
    solution none of the four neighborhoods can improve under penalty ``lam``.
    """
    work = _Work.from_solution(start, RoutingContext(instance))
    return _descend(work, lam).to_solution()


def _shaken(work: _Work, index: int, rng: random.Random) -> _Work:
    moves = list(_shift_moves(work) if index == 0 else _swap_moves(work))
    while moves:
        move = moves.pop(rng.randrange(len(moves)))
        mets = _move_metrics(work, move)
        if mets is not None:
            return _applied_copy(work, move, mets)
    return work.clone()


def shake(solution: RoutingSolution, index: int, instance: RoutingInstance, rng: random.Random) -> RoutingSolution:
    """Jump to a uniformly random feasible neighbor (index 1: shift, 2: swap)."""
    if index not in (1, 2):
        raise ValueError("shake index must be 1 or 2")
    work = _Work.from_solution(solution, RoutingContext(instance))
    return _shaken(work, index - 1, rng).to_solution()


def _eject_near(work: _Work, rid: int, count: int, rng: random.Random) -> _Work:
    """Eject up to ``count`` served stops departing near request ``rid``.

    A request that no single move can place needs room made for it first;
    ejections are always structurally sound, and the following descent gets
    to rebuild with the freed slots. Falls back to uniform ejections when
    nothing overlaps the target's window.
    """
    target = work.ctx.requests[rid].depart_minute
    spots = [(v, p) for v, route in enumerate(work.routes) for p in range(len(route))]
    near = [
        (v, p) for v, p in spots
        if abs(work.ctx.requests[work.routes[v][p][0]].depart_minute - target) <= 60.0
    ]
    pool = near if near else spots
    picked = pool if len(pool) <= count else rng.sample(pool, count)
    out = work.clone()
    for v, stop_id in [(v, work.routes[v][p][0]) for v, p in picked]:
        p = next((i for i, (r, _) in enumerate(out.routes[v]) if r == stop_id), None)
        if p is None:
            continue
        trial = _remove_at(out.routes[v], p)
        m = out.ctx.route_metrics(v, trial)
        if m is None:
            # removal bridged two stops the aircraft cannot connect directly
            continue
        out.routes[v] = list(trial)
        out.metrics[v] = m
        out.unserved.add(stop_id)
    return out


class PenaltyState(NamedTuple):
    """Adaptive weight on takeoff-floor slack plus its bookkeeping."""

    lam: float = 0.0
    iteration: int = 0
    recent: tuple[bool, ...] = ()


def update_penalty(state: PenaltyState, valid: bool, config: VnsConfig) -> PenaltyState:
    """Record one visited solution; every update period, adjust the weight.

    A full streak of valid visits divides the weight, anything else adds to it.
    """
    recent = (state.recent + (valid,))[-config.validity_streak :]
    iteration = state.iteration + 1
    lam = state.lam
    if iteration % config.update_period == 0:
        if len(recent) == config.validity_streak and all(recent):
            lam /= config.beta_decr
        else:
            lam += config.beta_incr
    return PenaltyState(lam, iteration, recent)


def initial_solution(instance: RoutingInstance, rng: random.Random) -> RoutingSolution:
    """Randomized greedy start.

    Requests are inserted in random order, each into an aircraft drawn
    uniformly from the near-cheapest feasible hosts. The spread keeps
    restarts from rebuilding the same structure every time.
    """
    ctx = RoutingContext(instance)
    order = list(instance.requests)
    rng.shuffle(order)
    routes: list[tuple[RouteStop, ...]] = [() for _ in instance.fleet]
    monetary = [0.0 for _ in instance.fleet]
    unserved: set[int] = set()
    for req in order:
        cands: list[tuple[float, int, tuple[RouteStop, ...]]] = []
        for v in range(len(instance.fleet)):
            grown = _insert_stop(routes[v], req.id, ctx)
            mets = ctx.route_metrics(v, grown)
            if mets is not None:
                cands.append((mets.monetary - monetary[v], v, grown))
        if not cands:
            unserved.add(req.id)
            continue
        costs = [c for c, _, _ in cands]
        limit = min(costs) + 0.3 * (max(costs) - min(costs))
        delta, v, grown = rng.choice([c for c in cands if c[0] <= limit])
        routes[v] = grown
        monetary[v] += delta
    return RoutingSolution([list(r) for r in routes], unserved)


@dataclass
class VnsResult:
    """Outcome of one search run: best valid solution found plus run statistics."""

    solution: RoutingSolution
    objective: SearchObjective
    iterations: int
    elapsed_seconds: float
    full_service_seconds: Optional[float]


class _BestTracker:
    def __init__(self, ctx: RoutingContext, t0: float):
        self.ctx = ctx
        self.t0 = t0
        self.best_key: Optional[tuple[int, int, float]] = None
        self.best: Optional[RoutingSolution] = None
        self.full_service_at: Optional[float] = None

    def note(self, work: _Work) -> None:
        n_u, n_fast, monetary, violation, within = work.totals()
        if violation > 0.0 or not within:
            return
        if n_u == 0 and self.full_service_at is None:
            self.full_service_at = time.perf_counter() - self.t0
        key = (n_u, n_fast, monetary)
        if self.best_key is None or key < self.best_key:
            self.best_key = key
            self.best = work.to_solution()


def uam_vns(
    instance: RoutingInstance,
    start: Optional[RoutingSolution] = None,
    *,
    seed: Optional[int] = None,
    rng: Optional[random.Random] = None,
    time_budget_seconds: Optional[float] = None,
    max_iterations: Optional[int] = None,
    stop_at_full_service: bool = False,
) -> VnsResult:
    """Search for the best routing: full service first, then few fast charges.

    Alternates random shift/swap shakes with best-improvement descent. The
    takeoff-floor penalty starts at zero and adapts to how often visited
    solutions are valid. Prolonged stagnation restarts the walk from a fresh
    random solution while keeping the incumbent. Stops on the wall-clock
    budget, on the iteration cap, or, when requested, as soon as everything
    is served violation-free. Returns the best zero-violation solution seen;
    with none, everything is unserved.
    """
    assert_stratified(instance)
    ctx = RoutingContext(instance)
    cfg = instance.config.vns
    budget = cfg.time_budget_seconds if time_budget_seconds is None else time_budget_seconds
    if rng is None:
        rng = random.Random(seed)

    t0 = time.perf_counter()
    tracker = _BestTracker(ctx, t0)
    warm = start is not None
    if start is None:
        start = initial_solution(instance, rng)
    work = _Work.from_solution(start, ctx)
    tracker.note(work)

    penalty = PenaltyState()
    shake_index = 0
    stagnation = 0
    iterations = 0
    restarts = 0
    while True:
        if time.perf_counter() - t0 >= budget:
            break
        if stagnation >= cfg.stagnation_limit:
            # multistart; the penalty weight carries over, it tracks the
            # instance, not the walk
            restarts += 1
            if warm and tracker.best is not None and restarts % 2 == 1:
                # a handed-in start means the incumbent is worth staying near;
                # clear room around whatever it could not place instead of
                # rebuilding from scratch
                work = _Work.from_solution(tracker.best, ctx)
                if work.unserved:
                    rid = rng.choice(sorted(work.unserved))
                    work = _eject_near(work, rid, 3, rng)
                else:
                    work = _shaken(work, 0, rng)
                    work = _shaken(work, 1, rng)
            else:
                work = _Work.from_solution(initial_solution(instance, rng), ctx)
            tracker.note(work)
            shake_index = 0
            stagnation = 0
        if max_iterations is not None and iterations >= max_iterations:
            break
        if stop_at_full_service and tracker.full_service_at is not None:
            break
        lam = penalty.lam
        if work.unserved and stagnation > 0 and stagnation % 10 == 0:
            # single moves stopped helping; make room near a stuck request
            rid = rng.choice(sorted(work.unserved))
            shaken = _eject_near(work, rid, 2 + stagnation // 20, rng)
        else:
            shaken = _shaken(work, shake_index, rng)
        tracker.note(shaken)
        descended = _descend(shaken, lam, tracker.note)
        if descended.scalar(lam) < work.scalar(lam) - IMPROVE_EPS:
            work = descended
            shake_index = 0
            stagnation = 0
        else:
            shake_index = (shake_index + 1) % 2
            stagnation += 1
        penalty = update_penalty(penalty, descended.totals()[3] == 0.0, cfg)
        iterations += 1

    if tracker.best is None:
        fallback = RoutingSolution([[] for _ in instance.fleet], {r.id for r in instance.requests})
        best_work = _Work.from_solution(fallback, ctx)
    else:
        best_work = _Work.from_solution(tracker.best, ctx)
    return VnsResult(
        solution=best_work.to_solution(),
        objective=best_work.objective(),
        iterations=iterations,
        elapsed_seconds=time.perf_counter() - t0,
        full_service_seconds=tracker.full_service_at,
    )
