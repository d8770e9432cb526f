"""Booking sessions: build, propose, rollback and snapshot round-trips."""
import pytest

from airtaxi.model import Aircraft
from airtaxi.online import (
    PlacedDemand,
    SessionError,
    build_session,
    checkpoint_report,
    propose,
    session_digest,
    session_from_payload,
    session_to_payload,
)
from airtaxi.routing import validate_routing

from helpers import demand, two_port_network

NET = two_port_network()
FLEET = (Aircraft(0, 0, 420.0), Aircraft(1, 1, 420.0))
BATTERY = None  # helpers default


def _battery():
    from airtaxi.model import BatteryParams

    return BatteryParams()


def _placed_book():
    # two tight clusters per direction, trivially servable by two aircraft
    return [
        PlacedDemand(demand(0, 500.0), 0, 1),
        PlacedDemand(demand(0, 502.0), 0, 1),
        PlacedDemand(demand(0, 700.0), 0, 1),
        PlacedDemand(demand(0, 520.0), 1, 0),
        PlacedDemand(demand(0, 523.0, premium=True), 1, 0),
    ]


def _session(**kwargs):
    return build_session(
        _placed_book(), NET, FLEET, _battery(), build_budget_seconds=30.0, seed=0, **kwargs
    )


def test_build_session_pools_and_serves_everything():
    s = _session()
    assert [p.demand.id for p in s.demands] == list(range(5))
    # clusters merge: fewer flights than demands
    assert len(s.requests) < len(s.demands)
    assert s.solution.unserved == set()
    assert validate_routing(s.solution, s.instance()) == []
    # pair states are sorted by leg and partition the book
    assert [(p.origin, p.destination) for p in s.pairs] == [(0, 1), (1, 0)]
    covered = sorted(i for p in s.pairs for i in p.members)
    assert covered == list(range(5))
    members = sorted(i for key in s.request_members.values() for i in key)
    assert members == list(range(5))
    # the group-opening weight is pinned at build time
    assert s.pooling_config.lambda_group is not None


def test_build_session_rejects_structural_problems():
    with pytest.raises(SessionError):
        build_session(
            [PlacedDemand(demand(0, 500.0, pax=5), 0, 1)], NET, FLEET, _battery()
        )
    with pytest.raises(Exception):
        build_session([PlacedDemand(demand(0, 500.0), 0, 0)], NET, FLEET, _battery())


def test_propose_accepts_a_fitting_demand():
    s = _session()
    before = session_digest(s)
    result = propose(s, demand(0, 503.0), 0, 1, 10.0, seed=1)
    assert result.accepted
    assert result.reason == "accepted"
    assert result.first_success_seconds is not None
    out = result.session
    assert len(out.demands) == 6
    assert out.demands[-1].demand.id == 5
    assert out.solution.unserved == set()
    assert validate_routing(out.solution, out.instance()) == []
    assert session_digest(out) != before
    # every replaced request id is gone from the new request set
    live = {r.id for r in out.requests}
    assert not (set(result.replaced_requests) & live)
    # the original session object is untouched
    assert session_digest(s) == before


def test_propose_structural_reject_costs_no_budget():
    s = _session()
    result = propose(s, demand(0, 500.0, pax=5), 0, 1, 10.0, seed=1)
    assert not result.accepted
    assert result.reason.startswith("structural:")
    assert result.elapsed_seconds == 0.0
    assert result.session is s

    bad_leg = propose(s, demand(0, 500.0), 0, 0, 10.0, seed=1)
    assert not bad_leg.accepted
    assert bad_leg.reason.startswith("structural:")


def test_propose_rejects_infeasible_extension_and_rolls_back():
    # one aircraft, both legs wanted at the same minute: only one can fly
    fleet = (Aircraft(0, 0, 420.0),)
    book = [PlacedDemand(demand(0, 500.0), 0, 1)]
    s = build_session(book, NET, fleet, _battery(), build_budget_seconds=30.0, seed=0)
    before = session_digest(s)
    result = propose(s, demand(0, 503.0, offset=2.0), 1, 0, 3.0, seed=2)
    assert not result.accepted
    assert result.reason == "no-full-service"
    assert result.session is s
    assert session_digest(s) == before


def test_propose_opens_a_new_pair_when_needed():
    fleet = (Aircraft(0, 0, 420.0), Aircraft(1, 1, 420.0))
    book = [PlacedDemand(demand(0, 500.0), 0, 1)]
    s = build_session(book, NET, fleet, _battery(), build_budget_seconds=30.0, seed=0)
    result = propose(s, demand(0, 800.0), 1, 0, 10.0, seed=3)
    assert result.accepted
    assert [(p.origin, p.destination) for p in result.session.pairs] == [(0, 1), (1, 0)]


def test_session_snapshot_round_trip():
    s = _session()
    payload = session_to_payload(s)
    back = session_from_payload(payload)
    assert session_digest(back) == session_digest(s)
    assert back.requests == s.requests
    assert back.demands == s.demands
    assert back.request_members == s.request_members
    assert back.solution.routes == s.solution.routes
    # a restored session keeps working
    result = propose(back, demand(0, 505.0), 0, 1, 10.0, seed=4)
    assert result.accepted


def test_checkpoint_report_statuses():
    s = _session()
    report = checkpoint_report(s, demand(0, 504.0), 0, 1, checkpoints=(0.001, 5.0), seed=5)
    assert report.final_status in ("accept", "reject")
    marks = [m for m, _ in report.statuses]
    assert marks == sorted(marks)
    if report.final_status == "accept":
        t = report.first_success_seconds
        for mark, status in report.statuses:
            assert status == ("accept" if t <= mark else "reject")
    with pytest.raises(ValueError):
        checkpoint_report(s, demand(0, 504.0), 0, 1, checkpoints=())
