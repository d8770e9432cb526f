"""Exact reference solvers for small instances.

Brute force with sound pruning only: these exist to certify the heuristics on
tiny inputs and refuse anything larger. The pooling oracle enumerates set
partitions depth-first (restricted-growth order); the routing oracle
enumerates request-to-aircraft assignments and optimizes charging per route
with a dynamic program over integer states of charge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

from .model import (
    ChargePlan,
    Demand,
    PoolingConfig,
    PoolingSolution,
    RoutingSolution,
    StructuralError,
    demand_servable,
    demand_wait_cap,
)
from .routing import (
    INF,
    ConnInfo,
    RoutingContext,
    RoutingInstance,
    SearchObjective,
    evaluate,
)


class OracleRefusal(Exception):
    """Instance outside the size or data limits the oracle can certify."""


@dataclass(frozen=True)
class OracleLimits:
    max_demands: int = 12
    max_requests: int = 6
    max_aircraft: int = 2
    require_integer_data: bool = True


def exact_pooling(
    demands: Sequence[Demand],
    config: PoolingConfig,
    limits: Optional[OracleLimits] = None,
) -> tuple[PoolingSolution, float]:
    """Globally optimal pooling by exhausting feasible set partitions.

    Partitions are generated in restricted-growth order. A branch is cut when
    a group can no longer accept members (infeasibility never heals) or when
    its running objective already matches the incumbent (the objective only
    grows along a branch). Returns the best partition and its objective.
    """
    limits = limits or OracleLimits()
    if len(demands) > limits.max_demands:
        raise OracleRefusal(f"{len(demands)} demands exceed the cap {limits.max_demands}")
    if not demands:
        raise StructuralError("at least one demand required")
    for pos, d in enumerate(demands):
        if d.id != pos:
            raise StructuralError("demand ids must equal their positions, starting at 0")
        if not demand_servable(d, config):
            raise StructuralError(f"demand {d.id} cannot be served even alone")

    lam = config.lambda_for(len(demands))
    n = len(demands)
    quantiles = [d.quantile for d in demands]
    means = [d.mean for d in demands]
    weights = [d.passengers for d in demands]
    caps = [demand_wait_cap(d, config) for d in demands]
    alphas = [config.alpha(d.service_class) for d in demands]

    best_score = INF
    best_groups: Optional[tuple[tuple[int, ...], ...]] = None

    groups: list[list[int]] = []
    # per open group: departure, wait cap, seat load, weight sum
    g_dep: list[float] = []
    g_cap: list[float] = []
    g_load: list[int] = []
    g_alpha: list[float] = []

    def dfs(i: int, score: float) -> None:
        nonlocal best_score, best_groups
        if score >= best_score:
            return
        if i == n:
            best_score = score
            best_groups = tuple(tuple(g) for g in groups)
            return
        q, mean, w, cap, alpha = quantiles[i], means[i], weights[i], caps[i], alphas[i]
        for g in range(len(groups)):
            if g_load[g] + w > config.capacity:
                continue
            dep = g_dep[g] if g_dep[g] >= q else q
            new_cap = g_cap[g] if g_cap[g] <= cap else cap
            if dep > new_cap:
                continue
            delta = alpha * (dep - mean) + g_alpha[g] * (dep - g_dep[g])
            old = (g_dep[g], g_cap[g], g_load[g], g_alpha[g])
            groups[g].append(i)
            g_dep[g], g_cap[g], g_load[g], g_alpha[g] = dep, new_cap, old[2] + w, old[3] + alpha
            dfs(i + 1, score + delta)
            groups[g].pop()
            g_dep[g], g_cap[g], g_load[g], g_alpha[g] = old
        groups.append([i])
        g_dep.append(q)
        g_cap.append(cap)
        g_load.append(w)
        g_alpha.append(alpha)
        dfs(i + 1, score + lam + alpha * (q - mean))
        groups.pop()
        g_dep.pop()
        g_cap.pop()
        g_load.pop()
        g_alpha.pop()

    dfs(0, 0.0)
    solution = PoolingSolution(
        groups=best_groups,
        departures=tuple(max(quantiles[i] for i in g) for g in best_groups),
    )
    return solution, best_score


def _all_integers(instance: RoutingInstance) -> bool:
    values = list(instance.network.fly_time.values()) + list(instance.network.energy.values())
    values += [instance.config.delta]
    bat = instance.battery
    values += [bat.top_of_charge, bat.bottom_of_charge, bat.soc_min, bat.rate_slow, bat.rate_fast]
    values += [a.start_minute for a in instance.fleet]
    for r in instance.requests:
        values += [r.depart_minute, r.arrive_minute]
    return all(float(v).is_integer() for v in values)


def _value_mask(rate: int, headroom: int, t_lim: int, memo: dict) -> int:
    """Bitmask of positive bought amounts attainable within the time limit."""
    if headroom <= 0 or t_lim <= 0:
        return 0
    t_eff = min(t_lim, -(-headroom // rate))
    key = (rate, headroom, t_eff)
    mask = memo.get(key)
    if mask is None:
        mask = 0
        k_full = min(t_eff, headroom // rate)
        for k in range(1, k_full + 1):
            mask |= 1 << (rate * k)
        if headroom % rate and -(-headroom // rate) <= t_eff:
            mask |= 1 << headroom
        memo[key] = mask
    return mask


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class _ChargeDp:
    """Optimal charging along one fixed route, over integer states of charge."""

    def __init__(self, ctx: RoutingContext):
        self.ctx = ctx
        bat = ctx.battery
        self.toc = int(bat.top_of_charge)
        self.boc = int(bat.bottom_of_charge)
        self.smin = int(bat.soc_min)
        self.rate_slow = int(bat.rate_slow)
        self.rate_fast = int(bat.rate_fast)
        self.price = bat.price
        self.mask_memo: dict = {}
        self.route_memo: dict = {}

    def _mode_cases(self, deadhead: bool) -> list[tuple[bool, bool]]:
        if deadhead:
            return [(True, True), (True, False), (False, True), (False, False)]
        return [(True, True), (False, False)]

    def _transition(self, states: dict, info: ConnInfo, g_serv: int, cost: float) -> dict:
        toc, boc, smin = self.toc, self.boc, self.smin
        g_dead = int(info.g_dead)
        t_seg = int(info.cap_segment + 1e-9)
        t_joint = int(info.cap_joint + 1e-9)
        floor_dep = max(smin, boc + g_serv)
        if floor_dep > toc:
            return {}
        dep_range = ((1 << (toc - floor_dep + 1)) - 1) << floor_dep
        new_states: dict = {}
        for e in sorted(states):
            nf0, money0, _ = states[e]
            masks = [0, 0, 0]
            for slow_a, slow_b in self._mode_cases(info.deadhead):
                rate_a = self.rate_slow if slow_a else self.rate_fast
                rate_b = self.rate_slow if slow_b else self.rate_fast
                for use_a in (0, 1):
                    if info.deadhead and use_a == 0 and e < smin:
                        continue
                    a_values = [0]
                    if use_a:
                        lo_a = max(1, smin - e if info.deadhead else 1, boc + g_dead - e)
                        a_mask = _value_mask(rate_a, toc - e, min(t_seg, t_joint), self.mask_memo)
                        a_values = [b for b in _bits(a_mask) if b >= lo_a]
                    elif info.deadhead and e - g_dead < boc:
                        continue
                    for b_a in a_values:
                        base = e + b_a - g_dead
                        if base < boc:
                            continue
                        t_a = -(-b_a // rate_a) if b_a else 0
                        for use_b in (0, 1):
                            nf_inc = (use_a and not slow_a) + (use_b and not slow_b)
                            if use_b:
                                b_mask = _value_mask(
                                    rate_b, toc - base, min(t_seg, t_joint - t_a), self.mask_memo
                                )
                                masks[nf_inc] |= (b_mask << base) & dep_range
                            elif base >= floor_dep:
                                masks[nf_inc] |= 1 << base
            for nf_inc in (0, 1, 2):
                for e_dep in _bits(masks[nf_inc]):
                    cand_nf = nf0 + nf_inc
                    cand_money = money0 + cost + (e_dep - e + g_dead) * self.price
                    e_arr = e_dep - g_serv
                    cur = new_states.get(e_arr)
                    if cur is None or (cand_nf, cand_money) < (cur[0], cur[1]):
                        new_states[e_arr] = (cand_nf, cand_money, (e, nf_inc))
        return _pareto(new_states)

    def _witness(self, e_prev: int, e_dep: int, nf_inc: int, info: ConnInfo) -> ChargePlan:
        toc, boc, smin = self.toc, self.boc, self.smin
        g_dead = int(info.g_dead)
        t_seg = int(info.cap_segment + 1e-9)
        t_joint = int(info.cap_joint + 1e-9)
        need = e_dep - (e_prev - g_dead)
        for slow_a, slow_b in self._mode_cases(info.deadhead):
            rate_a = self.rate_slow if slow_a else self.rate_fast
            rate_b = self.rate_slow if slow_b else self.rate_fast
            a_mask = _value_mask(rate_a, toc - e_prev, min(t_seg, t_joint), self.mask_memo)
            for b_a in [0] + list(_bits(a_mask)):
                b_b = need - b_a
                if b_b < 0:
                    continue
                if info.deadhead and e_prev + b_a < smin:
                    continue
                base = e_prev + b_a - g_dead
                if base < boc:
                    continue
                t_a = -(-b_a // rate_a) if b_a else 0
                if b_b:
                    b_mask = _value_mask(rate_b, toc - base, min(t_seg, t_joint - t_a), self.mask_memo)
                    if not (b_mask >> b_b) & 1:
                        continue
                use_a, use_b = b_a > 0, b_b > 0
                if nf_inc != (use_a and not slow_a) + (use_b and not slow_b):
                    continue
                t_b = -(-b_b // rate_b) if b_b else 0
                return ChargePlan(float(t_a), float(t_b), slow_a, slow_b)
        raise AssertionError("no charging witness for an optimal transition")

    def solve(self, v_idx: int, rids: tuple[int, ...]) -> Optional[tuple[int, float, list[ChargePlan]]]:
        """(fast count, money, plans) for serving exactly these requests, or None."""
        memo_key = (v_idx, rids)
        if memo_key in self.route_memo:
            return self.route_memo[memo_key]
        ctx = self.ctx
        stages = []
        states = {self.toc: (0, 0.0, None)}
        prev_key = ctx.key_of(v_idx)
        result = None
        for rid in rids:
            info = ctx.conn(prev_key, rid)
            if info.cost == INF:
                states = {}
                break
            req = ctx.requests[rid]
            g_serv = int(ctx.network.energy[(req.origin, req.destination)])
            stages.append((prev_key, rid, info, g_serv, states))
            states = self._transition(states, info, g_serv, info.cost)
            prev_key = rid
        if states:
            e_best = min(states, key=lambda e: (states[e][0], states[e][1], -e))
            nf, money, _ = states[e_best]
            plans: list[ChargePlan] = []
            e_arr = e_best
            after = states
            for _pk, _rid, info, g_serv, before in reversed(stages):
                _nf, _money, back = after[e_arr]
                e_prev, nf_inc = back
                plans.append(self._witness(e_prev, e_arr + g_serv, nf_inc, info))
                e_arr = e_prev
                after = before
            plans.reverse()
            result = (nf, money, plans)
        self.route_memo[memo_key] = result
        return result


def _pareto(states: dict) -> dict:
    """Drop states dominated by a higher charge with no worse cost pair."""
    front: list[tuple[int, float]] = []
    keep = {}
    for e in sorted(states, reverse=True):
        nf, money, back = states[e]
        if any(f_nf <= nf and f_money <= money for f_nf, f_money in front):
            continue
        front.append((nf, money))
        keep[e] = states[e]
    return keep


def exact_routing(
    instance: RoutingInstance,
    limits: Optional[OracleLimits] = None,
) -> tuple[RoutingSolution, SearchObjective]:
    """Globally optimal routing in priority order: served, then slow-only, then cost.

    Every request-to-aircraft assignment is enumerated; within one aircraft the
    only feasible service order is ascending departure, and charging is
    optimized exactly by the integer-state dynamic program.
    """
    limits = limits or OracleLimits()
    if len(instance.requests) > limits.max_requests:
        raise OracleRefusal(f"{len(instance.requests)} requests exceed the cap {limits.max_requests}")
    if len(instance.fleet) > limits.max_aircraft:
        raise OracleRefusal(f"{len(instance.fleet)} aircraft exceed the cap {limits.max_aircraft}")
    if limits.require_integer_data and not _all_integers(instance):
        raise OracleRefusal("timing, energy and battery data must be integral")

    ctx = RoutingContext(instance)
    dp = _ChargeDp(ctx)
    requests = sorted(instance.requests, key=lambda r: (r.depart_minute, r.id))
    n_aircraft = len(instance.fleet)
    best_key = (math.inf, math.inf, math.inf)
    best: Optional[tuple[tuple[tuple[int, ...], ...], list[list[ChargePlan]]]] = None

    for assignment in product(range(n_aircraft + 1), repeat=len(requests)):
        n_unserved = sum(1 for a in assignment if a == n_aircraft)
        if n_unserved > best_key[0]:
            continue
        routes = tuple(
            tuple(r.id for r, a in zip(requests, assignment) if a == v)
            for v in range(n_aircraft)
        )
        n_fast, money = 0, 0.0
        plans: list[list[ChargePlan]] = []
        feasible = True
        for v, rids in enumerate(routes):
            solved = dp.solve(v, rids)
            if solved is None:
                feasible = False
                break
            n_fast += solved[0]
            money += solved[1]
            plans.append(solved[2])
        if not feasible:
            continue
        key = (n_unserved, n_fast, money)
        if key < best_key:
            best_key = key
            best = (routes, plans)

    if best is None:
        raise StructuralError("no feasible assignment found, not even all-unserved")
    routes, plans = best
    served = {rid for rids in routes for rid in rids}
    solution = RoutingSolution(
        routes=[list(zip(rids, route_plans)) for rids, route_plans in zip(routes, plans)],
        unserved={r.id for r in instance.requests} - served,
    )
    return solution, evaluate(solution, instance)
