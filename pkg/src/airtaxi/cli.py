"""Command-line entry point.

Wires the generators, both solver stages, the exact reference solvers, the
online session, and the experiment drivers to JSON/CSV files. Every
invocation takes one --seed and splits it into named streams, and every
output is accompanied by a run manifest recording the parameters that
produced it.

Exit codes: 0 success, 1 infeasible or rejected outcome, 2 usage or schema
errors (including oracle refusals).
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, schemas
from .analytics import (
    CATEGORIES,
    MeanStd,
    bench_pooling,
    bench_routing,
    fairness_experiment,
    pooling_metrics,
    routing_metrics,
    sweep_qos,
)
from .instgen import (
    DemandModel,
    InfraModel,
    SCENARIO_RATES,
    gen_demands,
    gen_network,
    gen_routing_instance,
    seed_stream,
)
from .model import (
    Aircraft,
    PoolingConfig,
    StratificationError,
    StructuralError,
    UnservableDemandError,
    validate_pooling,
)
from .online import (
    PlacedDemand,
    SessionError,
    build_session,
    checkpoint_report,
    propose,
    session_from_payload,
    session_to_payload,
)
from .oracles import OracleLimits, OracleRefusal, exact_pooling, exact_routing
from .pooling import beam_search, to_requests
from .routing import RoutingConfig, RoutingInstance, stratified_config
from .vns import uam_vns


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _cell(text: str) -> tuple[int, int, str]:
    """Parse one bench-routing cell like '3x3:low'."""
    try:
        size, scenario = text.split(":")
        aircraft, vertiports = size.lower().split("x")
        if scenario not in SCENARIO_RATES:
            raise ValueError(scenario)
        return int(aircraft), int(vertiports), scenario
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected AxV:scenario with scenario in {sorted(SCENARIO_RATES)}, got {text!r}"
        ) from None


def _vns_seed(seed, *names: str) -> int:
    return int(seed_stream(seed, *names).integers(2**32))


def _print_json(obj: dict) -> None:
    sys.stdout.write(schemas.canonical_dumps(obj))


def _write_manifest(
    args: argparse.Namespace,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    elapsed: float,
    path: Optional[Path] = None,
) -> Path:
    parameters = {}
    for key, value in vars(args).items():
        if key == "func" or callable(value):
            continue
        if isinstance(value, Path):
            value = str(value)
        if isinstance(value, (list, tuple)):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        parameters[key] = value
    payload = {
        "schema_version": schemas.SCHEMA_VERSION,
        "kind": "run_manifest",
        "subcommand": args.command,
        "parameters": parameters,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "elapsed_seconds": round(elapsed, 3),
    }
    if path is None:
        path = Path(str(outputs[0]) + ".manifest.json")
    schemas.write_document(path, payload)
    return path


def _ensure_parent(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _demand_model(args) -> DemandModel:
    window = _ints(args.window)
    if len(window) != 2:
        raise argparse.ArgumentTypeError("--window needs two integers, open and close")
    return DemandModel(
        pax_values=tuple(_ints(args.pax_values)),
        pax_weights=tuple(_floats(args.pax_weights)),
        peak_means=tuple(_floats(args.peak_means)),
        peak_std=args.peak_std,
        mixture_weights=tuple(_floats(args.mixture_weights)),
        offset_values=tuple(_ints(args.offset_values)),
        offset_weights=tuple(_floats(args.offset_weights)),
        deadline_prob=args.deadline_prob,
        deadline_offsets=tuple(_ints(args.deadline_offsets)),
        premium_prob=args.premium_prob,
        open_minute=window[0],
        close_minute=window[1],
    )


def _infra_model(args) -> InfraModel:
    window = _ints(args.window)
    if len(window) != 2:
        raise argparse.ArgumentTypeError("--window needs two integers, open and close")
    return InfraModel(
        landing_fee_choices=tuple(_ints(args.fees)),
        fly_time_choices=tuple(_ints(args.fly_times)),
        open_minute=window[0],
        close_minute=window[1],
        eta=args.eta,
        top_of_charge=args.toc,
        bottom_of_charge=args.boc,
        soc_min=args.soc_min,
        delta=args.delta,
        rate_slow=args.rate_slow,
        rate_fast=args.rate_fast,
        price=args.price,
        energy_per_fly_minute=args.energy_factor,
    )


def _pool_config(args) -> PoolingConfig:
    return PoolingConfig(
        capacity=args.capacity,
        t_regular=args.t_regular,
        t_premium=args.t_premium,
        alpha_regular=args.alpha_regular,
        alpha_premium=args.alpha_premium,
        lambda_group=args.lambda_group,
        beam_width=args.beam_width,
    )


def _add_demand_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("demand model")
    group.add_argument("--pax-values", default="1,2,3,4")
    group.add_argument("--pax-weights", default="0.70,0.20,0.05,0.05")
    group.add_argument("--peak-means", default="510,1020")
    group.add_argument("--peak-std", type=float, default=20.0)
    group.add_argument("--mixture-weights", default=f"{1/2},{1/3},{1/6}")
    group.add_argument("--offset-values", default="3,5,7")
    group.add_argument("--offset-weights", default="0.40,0.50,0.10")
    group.add_argument("--deadline-prob", type=float, default=0.20)
    group.add_argument("--deadline-offsets", default="10,15,20")
    group.add_argument("--premium-prob", type=float, default=0.20)
    group.add_argument("--window", default="420,1140", help="open,close minutes")


def _add_infra_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("infrastructure model")
    group.add_argument("--fees", default="30,40,80")
    group.add_argument("--fly-times", default="10,15,20")
    group.add_argument("--eta", type=float, default=34.0, help="operating cost per fly minute")
    group.add_argument("--toc", type=float, default=92.0)
    group.add_argument("--boc", type=float, default=0.0)
    group.add_argument("--soc-min", type=float, default=55.0)
    group.add_argument("--delta", type=float, default=10.0, help="takeoff/landing slot minutes")
    group.add_argument("--rate-slow", type=float, default=1.0)
    group.add_argument("--rate-fast", type=float, default=2.0)
    group.add_argument("--price", type=float, default=1.0, help="electricity price per SoC unit")
    group.add_argument("--energy-factor", type=float, default=2.0,
                       help="SoC drawn per fly minute")
    if not any(a.dest == "window" for a in parser._actions):
        group.add_argument("--window", default="420,1140", help="open,close minutes")


def _add_pool_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pooling")
    group.add_argument("--capacity", type=int, default=4)
    group.add_argument("--t-regular", type=float, default=25.0)
    group.add_argument("--t-premium", type=float, default=15.0)
    group.add_argument("--alpha-regular", type=float, default=1.0)
    group.add_argument("--alpha-premium", type=float, default=2.0)
    group.add_argument("--lambda-group", type=float, default=None)
    group.add_argument("--beam-width", type=int, default=1000)


def _add_jobs_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


# subcommand implementations


def _cmd_gen_demands(args) -> int:
    t0 = time.perf_counter()
    demands = gen_demands(args.count, _demand_model(args), seed=args.seed)
    out = _ensure_parent(args.out)
    schemas.write_document(out, schemas.dump_demands(demands))
    _write_manifest(args, [], [out], time.perf_counter() - t0)
    _print_json({"demands": len(demands), "out": str(out)})
    return 0


def _cmd_gen_infra(args) -> int:
    t0 = time.perf_counter()
    network = gen_network(args.vertiports, _infra_model(args), seed=args.seed)
    out = _ensure_parent(args.out)
    schemas.write_document(out, schemas.dump_network(network))
    _write_manifest(args, [], [out], time.perf_counter() - t0)
    _print_json({"vertiports": args.vertiports, "legs": len(network.legs), "out": str(out)})
    return 0


def _cmd_pool(args) -> int:
    t0 = time.perf_counter()
    demands = schemas.parse_demands(schemas.read_document(args.demands))
    config = _pool_config(args)
    solution = beam_search(demands, config)
    violations = validate_pooling(solution, demands, config)
    if violations:
        raise StructuralError("; ".join(map(str, violations)))
    out = _ensure_parent(args.out)
    schemas.write_document(out, schemas.dump_pooling_solution(solution))
    _write_manifest(args, [Path(args.demands)], [out], time.perf_counter() - t0)
    metrics = pooling_metrics(solution, demands)
    _print_json({"out": str(out), "metrics": asdict(metrics)})
    return 0


def _cmd_exact_pool(args) -> int:
    t0 = time.perf_counter()
    demands = schemas.parse_demands(schemas.read_document(args.demands))
    limits = OracleLimits(max_demands=args.max_demands)
    solution, objective = exact_pooling(demands, _pool_config(args), limits)
    out = _ensure_parent(args.out)
    schemas.write_document(out, schemas.dump_pooling_solution(solution))
    _write_manifest(args, [Path(args.demands)], [out], time.perf_counter() - t0)
    _print_json({"out": str(out), "objective": objective, "groups": len(solution.groups)})
    return 0


def _cmd_route(args) -> int:
    t0 = time.perf_counter()
    instance = schemas.parse_routing_instance(schemas.read_document(args.instance))
    start = None
    if args.start:
        start = schemas.parse_routing_solution(schemas.read_document(args.start))
    result = uam_vns(
        instance,
        start=start,
        seed=_vns_seed(args.seed, "route"),
        time_budget_seconds=args.budget,
        max_iterations=args.max_iterations,
    )
    out = _ensure_parent(args.out)
    schemas.write_document(out, schemas.dump_routing_solution(result.solution))
    inputs = [Path(args.instance)] + ([Path(args.start)] if args.start else [])
    _write_manifest(args, inputs, [out], time.perf_counter() - t0)
    metrics = routing_metrics(result.solution, instance)
    _print_json(
        {
            "out": str(out),
            "iterations": result.iterations,
            "elapsed_seconds": round(result.elapsed_seconds, 3),
            "objective": {
                "n_unserved": result.objective.n_unserved,
                "n_fast": result.objective.n_fast,
                "monetary": result.objective.monetary,
            },
            "metrics": asdict(metrics),
        }
    )
    return 0


def _cmd_exact_route(args) -> int:
    t0 = time.perf_counter()
    instance = schemas.parse_routing_instance(schemas.read_document(args.instance))
    limits = OracleLimits(max_requests=args.max_requests, max_aircraft=args.max_aircraft)
    solution, objective = exact_routing(instance, limits)
    out = _ensure_parent(args.out)
    schemas.write_document(out, schemas.dump_routing_solution(solution))
    _write_manifest(args, [Path(args.instance)], [out], time.perf_counter() - t0)
    _print_json(
        {
            "out": str(out),
            "objective": {
                "n_unserved": objective.n_unserved,
                "n_fast": objective.n_fast,
                "monetary": objective.monetary,
            },
        }
    )
    return 0


def _cmd_pipeline(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    demand_model = _demand_model(args)
    infra_model = _infra_model(args)
    demands = gen_demands(args.count, demand_model, seed=args.seed)
    network = gen_network(args.vertiports, infra_model, seed=args.seed)
    outputs = []

    demands_path = out / "demands.json"
    schemas.write_document(demands_path, schemas.dump_demands(demands))
    network_path = out / "network.json"
    schemas.write_document(network_path, schemas.dump_network(network))
    outputs += [demands_path, network_path]

    # place each demand on a uniform leg, then pool leg by leg
    legs = sorted(network.legs)
    placement_rng = seed_stream(args.seed, "placement")
    placements = [legs[int(placement_rng.integers(len(legs)))] for _ in demands]
    config = _pool_config(args)
    if config.lambda_group is None:
        config = replace(config, lambda_group=config.lambda_for(len(demands)))
    by_pair: dict[tuple[int, int], list[int]] = {}
    for i, leg in enumerate(placements):
        by_pair.setdefault(leg, []).append(i)
    requests = []
    for origin, destination in sorted(by_pair):
        members = by_pair[(origin, destination)]
        local = [replace(demands[g], id=k) for k, g in enumerate(members)]
        solution = beam_search(local, config)
        # report groups in global demand ids
        global_solution = replace(
            solution,
            groups=tuple(tuple(members[l] for l in group) for group in solution.groups),
        )
        pair_path = out / f"pooling_{origin}_{destination}.json"
        schemas.write_document(pair_path, schemas.dump_pooling_solution(global_solution))
        outputs.append(pair_path)
        requests.extend(
            to_requests(solution, local, origin, destination, network, id_start=len(requests))
        )

    fleet_rng = seed_stream(args.seed, "fleet")
    fleet = tuple(
        Aircraft(
            id=v,
            start_vertiport=int(fleet_rng.integers(args.vertiports)),
            start_minute=infra_model.open_minute,
        )
        for v in range(args.aircraft)
    )
    instance = RoutingInstance(
        network=network,
        fleet=fleet,
        requests=tuple(requests),
        battery=infra_model.battery(),
        config=RoutingConfig(eta=infra_model.eta, delta=infra_model.delta),
    )
    cfg = stratified_config(instance)
    if cfg is not instance.config:
        instance = replace(instance, config=cfg)
    instance_path = out / "instance.json"
    schemas.write_document(instance_path, schemas.dump_routing_instance(instance))
    outputs.append(instance_path)

    result = uam_vns(
        instance, seed=_vns_seed(args.seed, "pipeline-route"), time_budget_seconds=args.budget
    )
    solution_path = out / "routing_solution.json"
    schemas.write_document(solution_path, schemas.dump_routing_solution(result.solution))
    outputs.append(solution_path)

    metrics = routing_metrics(result.solution, instance)
    _write_manifest(args, [], outputs, time.perf_counter() - t0, path=out / "manifest.json")
    _print_json(
        {
            "outdir": str(out),
            "demands": len(demands),
            "requests": len(requests),
            "metrics": asdict(metrics),
        }
    )
    return 0


def _read_placed_demand(path) -> tuple:
    obj = schemas.read_document(path)
    obj = {k: v for k, v in obj.items() if k not in ("schema_version", "kind")}
    obj.setdefault("id", 0)
    try:
        origin = obj.pop("origin")
        destination = obj.pop("destination")
    except KeyError as exc:
        raise schemas.SchemaError(f"demand file: missing field {exc}") from None
    return schemas.demand_from_dict(obj), origin, destination


def _cmd_online(args) -> int:
    if args.action == "init":
        return _online_init(args)
    if args.action == "propose":
        return _online_propose(args)
    return _online_report(args)


def _online_init(args) -> int:
    t0 = time.perf_counter()
    demand_model = _demand_model(args)
    infra_model = _infra_model(args)
    network = gen_network(args.vertiports, infra_model, seed=args.seed)
    demands = gen_demands(args.count, demand_model, seed=args.seed) if args.count else []
    legs = sorted(network.legs)
    placement_rng = seed_stream(args.seed, "placement")
    placed = [
        PlacedDemand(d, *legs[int(placement_rng.integers(len(legs)))]) for d in demands
    ]
    fleet_rng = seed_stream(args.seed, "fleet")
    fleet = tuple(
        Aircraft(
            id=v,
            start_vertiport=int(fleet_rng.integers(args.vertiports)),
            start_minute=infra_model.open_minute,
        )
        for v in range(args.aircraft)
    )
    session = build_session(
        placed,
        network,
        fleet,
        infra_model.battery(),
        pooling_config=_pool_config(args),
        checkpoints=tuple(_floats(args.checkpoints)),
        build_budget_seconds=args.build_budget,
        seed=_vns_seed(args.seed, "online-build"),
    )
    out = _ensure_parent(args.session)
    schemas.write_document(out, session_to_payload(session))
    _write_manifest(args, [], [out], time.perf_counter() - t0)
    _print_json(
        {
            "session": str(out),
            "demands": len(session.demands),
            "requests": len(session.requests),
        }
    )
    return 0


def _online_propose(args) -> int:
    t0 = time.perf_counter()
    session = session_from_payload(schemas.read_document(args.session))
    demand, origin, destination = _read_placed_demand(args.demand)
    result = propose(
        session,
        demand,
        origin,
        destination,
        args.budget,
        seed=_vns_seed(args.seed, "online-propose"),
    )
    outputs = []
    if result.accepted and not args.dry_run:
        schemas.write_document(args.session, session_to_payload(result.session))
        outputs.append(Path(args.session))
    _write_manifest(
        args,
        [Path(args.session), Path(args.demand)],
        outputs or [Path(args.session)],
        time.perf_counter() - t0,
        path=Path(str(args.session) + ".manifest.json"),
    )
    _print_json(
        {
            "accepted": result.accepted,
            "reason": result.reason,
            "elapsed_seconds": round(result.elapsed_seconds, 3),
            "first_success_seconds": result.first_success_seconds,
            "replaced_requests": list(result.replaced_requests),
        }
    )
    return 0 if result.accepted else 1


def _online_report(args) -> int:
    t0 = time.perf_counter()
    session = session_from_payload(schemas.read_document(args.session))
    demand, origin, destination = _read_placed_demand(args.demand)
    marks = tuple(_floats(args.checkpoints)) if args.checkpoints else None
    report = checkpoint_report(
        session, demand, origin, destination, marks, seed=_vns_seed(args.seed, "online-report")
    )
    out = _outdir(args)
    csv_path = out / "online_report.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["checkpoint_seconds", "status"])
        for mark, status in report.statuses:
            writer.writerow([mark, status])
        writer.writerow(["final", report.final_status])
    _write_manifest(
        args,
        [Path(args.session), Path(args.demand)],
        [csv_path],
        time.perf_counter() - t0,
        path=out / "manifest.json",
    )
    _print_json(
        {
            "statuses": [[m, s] for m, s in report.statuses],
            "final_status": report.final_status,
            "first_success_seconds": report.first_success_seconds,
            "csv": str(csv_path),
        }
    )
    return 0 if report.final_status == "accept" else 1


def _cmd_bench_pooling(args) -> int:
    t0 = time.perf_counter()
    rows = bench_pooling(
        tuple(_ints(args.d_values)),
        repetitions=args.reps,
        seed=args.seed,
        beam_width=args.beam_width,
        jobs=args.jobs,
    )
    out = _outdir(args)
    csv_path = out / "bench_pooling.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "n_demands", "rep", "seconds", "n_requests", "requests_load",
                "passengers_load", "wt_regular_mean", "wt_regular_std",
                "wt_premium_mean", "wt_premium_std", "wt_peak_regular",
                "wt_peak_premium", "wt_offpeak_regular", "wt_offpeak_premium",
            ]
        )
        for r in rows:
            m = r.metrics
            writer.writerow(
                [
                    r.n_demands, r.rep, f"{r.seconds:.6f}", m.n_requests,
                    f"{m.requests_load:.6f}", f"{m.passengers_load:.6f}",
                    m.wt_regular.mean, m.wt_regular.std,
                    m.wt_premium.mean, m.wt_premium.std,
                    m.wt_peak_regular, m.wt_peak_premium,
                    m.wt_offpeak_regular, m.wt_offpeak_premium,
                ]
            )
    outputs = [csv_path]
    if not args.no_plots:
        from .plots import plot_bench_pooling

        outputs.append(plot_bench_pooling(rows, out / "bench_pooling.png"))
    _write_manifest(args, [], outputs, time.perf_counter() - t0, path=out / "manifest.json")
    _print_json({"rows": len(rows), "outdir": str(out)})
    return 0


def _cmd_bench_routing(args) -> int:
    t0 = time.perf_counter()
    rows = bench_routing(
        tuple(args.cells),
        repetitions=args.reps,
        budget_seconds=args.budget,
        seed=args.seed,
        jobs=args.jobs,
    )
    out = _outdir(args)
    csv_path = out / "bench_routing.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "n_aircraft", "n_vertiports", "scenario", "rep", "seconds",
                "iterations", "pct_service", "n_charge", "pct_fast", "cps",
            ]
        )
        for r in rows:
            m = r.metrics
            writer.writerow(
                [
                    r.n_aircraft, r.n_vertiports, r.scenario, r.rep,
                    f"{r.seconds:.3f}", r.iterations, f"{m.pct_service:.3f}",
                    m.n_charge, f"{m.pct_fast:.3f}",
                    "" if m.cps is None else f"{m.cps:.3f}",
                ]
            )
    outputs = [csv_path]
    if not args.no_plots:
        from .plots import plot_bench_routing

        outputs.append(plot_bench_routing(rows, out / "bench_routing.png"))
    _write_manifest(args, [], outputs, time.perf_counter() - t0, path=out / "manifest.json")
    _print_json({"rows": len(rows), "outdir": str(out)})
    return 0


def _cmd_fairness(args) -> int:
    t0 = time.perf_counter()
    cells = fairness_experiment(
        alphas=tuple(_floats(args.alphas)),
        shares=tuple(_floats(args.shares)),
        n_demands=args.count,
        repetitions=args.reps,
        seed=args.seed,
        beam_width=args.beam_width,
        jobs=args.jobs,
    )
    out = _outdir(args)
    waits_path = out / "fairness_waits.csv"
    with open(waits_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["premium_share", "alpha_regular", "category", "n", "wait_mean", "wait_std"])
        for cell in cells:
            for category in CATEGORIES:
                stats = MeanStd.of(cell.waits[category])
                writer.writerow(
                    [
                        cell.premium_share, cell.alpha_regular, category,
                        len(cell.waits[category]), stats.mean, stats.std,
                    ]
                )
    last_path = out / "fairness_last_arrival.csv"
    with open(last_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["premium_share", "alpha_regular", "group_kind", "n_reps", "freq_mean", "freq_std"])
        for cell in cells:
            for kind, values in (
                ("pure", cell.last_arrival_pure),
                ("mixed", cell.last_arrival_mixed),
            ):
                stats = MeanStd.of(values)
                writer.writerow(
                    [cell.premium_share, cell.alpha_regular, kind, len(values), stats.mean, stats.std]
                )
    outputs = [waits_path, last_path]
    if not args.no_plots:
        from .plots import plot_fairness

        outputs.append(plot_fairness(cells, out / "fairness.png"))
    _write_manifest(args, [], outputs, time.perf_counter() - t0, path=out / "manifest.json")
    _print_json({"cells": len(cells), "outdir": str(out)})
    return 0


def _cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    result = sweep_qos(
        t_premium_values=tuple(_floats(args.t_values)),
        alpha_regular_values=tuple(_floats(args.alpha_values)),
        n_demands=args.count,
        repetitions=args.reps,
        seed=args.seed,
        premium_share=args.share,
        beam_width=args.beam_width,
        jobs=args.jobs,
    )
    out = _outdir(args)
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t_premium", "alpha_regular", "regular_mean_wait", "premium_mean_wait"])
        for i, t in enumerate(result.t_premium_values):
            for j, a in enumerate(result.alpha_regular_values):
                writer.writerow([t, a, result.regular_mean[i][j], result.premium_mean[i][j]])
    outputs = [csv_path]
    if not args.no_plots:
        from .plots import plot_sweep

        outputs.append(plot_sweep(result, out / "sweep.png"))
    _write_manifest(args, [], outputs, time.perf_counter() - t0, path=out / "manifest.json")
    _print_json({"outdir": str(out)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airtaxi",
        description="Demand pooling and electric fleet routing toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demands", help="draw a day of synthetic demands")
    p.add_argument("-n", "--count", type=int, required=True)
    p.add_argument("--seed", default=0)
    p.add_argument("--out", required=True)
    _add_demand_model_flags(p)
    p.set_defaults(func=_cmd_gen_demands)

    p = sub.add_parser("gen-infra", help="draw a fully connected vertiport network")
    p.add_argument("--vertiports", type=int, required=True)
    p.add_argument("--seed", default=0)
    p.add_argument("--out", required=True)
    _add_infra_flags(p)
    p.set_defaults(func=_cmd_gen_infra)

    p = sub.add_parser("pool", help="pool demands into flight groups")
    p.add_argument("--demands", required=True)
    p.add_argument("--out", required=True)
    _add_pool_flags(p)
    p.set_defaults(func=_cmd_pool)

    p = sub.add_parser("exact-pool", help="certified optimal pooling (small inputs only)")
    p.add_argument("--demands", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-demands", type=int, default=OracleLimits.max_demands)
    _add_pool_flags(p)
    p.set_defaults(func=_cmd_exact_pool)

    p = sub.add_parser("route", help="route and recharge a fleet over flight requests")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=float, default=1800.0, help="search seconds")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--start", default=None, help="warm-start solution file")
    p.add_argument("--seed", default=0)
    p.set_defaults(func=_cmd_route)

    p = sub.add_parser("exact-route", help="certified optimal routing (tiny inputs only)")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-requests", type=int, default=OracleLimits.max_requests)
    p.add_argument("--max-aircraft", type=int, default=OracleLimits.max_aircraft)
    p.set_defaults(func=_cmd_exact_route)

    p = sub.add_parser("pipeline", help="generate, pool, consolidate and route end to end")
    p.add_argument("-n", "--count", type=int, default=30, help="demands")
    p.add_argument("--vertiports", type=int, default=3)
    p.add_argument("--aircraft", type=int, default=3)
    p.add_argument("--budget", type=float, default=60.0)
    p.add_argument("--seed", default=0)
    p.add_argument("--outdir", required=True)
    _add_demand_model_flags(p)
    _add_infra_flags(p)
    _add_pool_flags(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("online", help="accept-or-reject booking sessions")
    p.add_argument("action", choices=["init", "propose", "report"])
    p.add_argument("--session", required=True, help="session snapshot path")
    p.add_argument("--seed", default=0)
    p.add_argument("--demand", help="demand file for propose/report")
    p.add_argument("--budget", type=float, default=30.0, help="propose budget seconds")
    p.add_argument("--checkpoints", default="5,10,20,30")
    p.add_argument("--count", type=int, default=0, help="init: initial demands")
    p.add_argument("--vertiports", type=int, default=3, help="init only")
    p.add_argument("--aircraft", type=int, default=12, help="init only")
    p.add_argument("--build-budget", type=float, default=300.0, help="init only")
    p.add_argument("--outdir", default="online_report", help="report only")
    p.add_argument("--dry-run", action="store_true", help="propose: never write the session")
    _add_demand_model_flags(p)
    _add_infra_flags(p)
    _add_pool_flags(p)
    p.set_defaults(func=_cmd_online)

    p = sub.add_parser("bench-pooling", help="pooling benchmark grid")
    p.add_argument("--d-values", default="20,50,100")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", default=0)
    p.add_argument("--beam-width", type=int, default=1000)
    p.add_argument("--outdir", required=True)
    p.add_argument("--no-plots", action="store_true")
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_bench_pooling)

    p = sub.add_parser("bench-routing", help="routing benchmark grid")
    p.add_argument("--cells", type=_cell, nargs="+", default=[(3, 3, "low")],
                   help="cells like 3x3:low")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--budget", type=float, default=60.0)
    p.add_argument("--seed", default=0)
    p.add_argument("--outdir", required=True)
    p.add_argument("--no-plots", action="store_true")
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_bench_routing)

    p = sub.add_parser("fairness", help="wait and last-arrival fairness study")
    p.add_argument("--alphas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--shares", default="0.2,0.5,0.8")
    p.add_argument("-n", "--count", type=int, default=100)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", default=0)
    p.add_argument("--beam-width", type=int, default=1000)
    p.add_argument("--outdir", required=True)
    p.add_argument("--no-plots", action="store_true")
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_fairness)

    p = sub.add_parser("sweep", help="QoS sweep over wait caps and class weights")
    p.add_argument("--t-values", default="15,20,25")
    p.add_argument("--alpha-values", default="0,0.5,1.0")
    p.add_argument("-n", "--count", type=int, default=100)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--share", type=float, default=0.5)
    p.add_argument("--seed", default=0)
    p.add_argument("--beam-width", type=int, default=1000)
    p.add_argument("--outdir", required=True)
    p.add_argument("--no-plots", action="store_true")
    _add_jobs_flag(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "online":
        if args.action in ("propose", "report") and not args.demand:
            parser.error("online propose/report needs --demand")
        if args.action == "init" and args.count < 0:
            parser.error("--count must be non-negative")
    try:
        return args.func(args)
    except OracleRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except schemas.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except UnservableDemandError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except SessionError as exc:
        print(f"session error: {exc}", file=sys.stderr)
        return 1
    except (StructuralError, StratificationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
