import math

import pytest

from robotids.geometry import EMPTY, area, difference, region_equal, region_from_disc, region_from_rect, union
from robotids.monitor import (OccupancyEstimate, OccupancyHypothesis, Verdict, all_modes, classify, completions,
                              config_distance, consistent_with, estimate_equal, event_estimate, hidden_presence,
                              inflate, new_monitor, nondet_automaton_step, occupancy_estimate, predict,
                              reduce_hypotheses, restricted_encoder, subsumed, topology_check, update,
                              NormWeights)
from robotids.protocol import AgentConfig, ProtocolDefinitionError
from robotids.scenarios import WarehouseParams, build_warehouse, warehouse_flow, warehouse_topology

P = WarehouseParams()
WH = build_warehouse(P)


def box(x0, x1, y0, y1):
    return region_from_rect(x0, x1, y0, y1)


def test_config_distance_wraps_heading():
    a = AgentConfig(0, 0, math.pi - 0.01, 1.0)
    b = AgentConfig(0, 0, -math.pi + 0.01, 1.0)
    assert config_distance(a, b) == pytest.approx(0.02)
    assert config_distance(a, b, NormWeights(theta=0.0)) == 0.0


def test_new_monitor_checks_tolerance():
    with pytest.raises(ValueError):
        new_monitor(1, epsilon=0.01, noise_bound=0.01)
    with pytest.raises(ValueError):
        new_monitor(1, epsilon=0.1, epsilon_min=0.2)
    assert new_monitor(1, 0.02, noise_bound=0.01).epsilon == 0.02


def test_topology_check_and_restricted_encoder():
    q = AgentConfig(0, 0, 0, 1.0)
    near = region_from_disc((0, 0), P.R, 32)
    far = region_from_disc((20, 0), P.R, 32)
    assert topology_check(WH, q, near) == (1,)
    assert topology_check(WH, q, far) == (0,)
    assert restricted_encoder(WH, q, [AgentConfig(1.5, -0.2, 0, 0)]) == (1,)
    assert restricted_encoder(WH, q, []) == (0,)


def test_event_estimate_warehouse():
    q = AgentConfig(0, 0, 0, 1.0)
    assert event_estimate(WH, (0,), (1,), q) == {"e1"}
    assert event_estimate(WH, (1,), (1,), q) == {"e2"}
    assert event_estimate(WH, (0,), (0,), q) == {"e1", "e2"}
    with pytest.raises(ValueError):
        event_estimate(WH, (0, 0), (1,), q)


def test_nondet_step():
    assert nondet_automaton_step(WH, {"ACC", "DEC"}, {"e1"}) == {"ACC"}
    assert nondet_automaton_step(WH, {"ACC"}, {"e1", "e2"}) == {"ACC", "DEC"}
    with pytest.raises(ProtocolDefinitionError):
        nondet_automaton_step(WH, {"ACC"}, set())
    with pytest.raises(ValueError):
        nondet_automaton_step(WH, set(), {"e1"})


def test_hidden_presence_rejects_empty_posterior():
    with pytest.raises(ValueError):
        hidden_presence(0, set())
    with pytest.raises(ValueError):
        hidden_presence(2, {1})


def test_completions_only_flip_hidden_bits():
    assert set(completions((0, 1, 0), (1, 0, 0))) == {(0, 1, 0), (0, 1, 1)}
    assert set(completions((0,), (1,))) == {(0,)}


def test_subsumption_and_reduction():
    big = OccupancyHypothesis((box(0, 4, 0, 4),), (False,))
    small = OccupancyHypothesis((box(1, 2, 1, 2),), (False,))
    flagged = OccupancyHypothesis((box(1, 2, 1, 2),), (True,))
    assert subsumed(small, big) and not subsumed(big, small)
    assert subsumed(flagged, big) and not subsumed(big, flagged)
    assert reduce_hypotheses([small, big, flagged]) == (big,)
    contradictory = OccupancyHypothesis((EMPTY,), (True,))
    assert contradictory.contradictory
    assert reduce_hypotheses([contradictory]) == ()


def test_classify():
    free = OccupancyHypothesis((box(0, 1, 0, 1),), (False,))
    needed = OccupancyHypothesis((box(0, 1, 0, 1),), (True,))
    assert classify(OccupancyEstimate((free,))) is Verdict.COOPERATIVE
    assert classify(OccupancyEstimate((needed,))) is Verdict.UNCERTAIN
    assert classify(OccupancyEstimate()) is Verdict.UNCOOPERATIVE
    assert classify(OccupancyEstimate((free,)), detected=True) is Verdict.UNCOOPERATIVE


def test_occupancy_estimate_cases():
    q = AgentConfig(0, 0, 0, 1.0)
    eta = warehouse_topology(q, P)
    v_h = region_from_disc((-7.0, 0.0), P.R, P.arc_segments)
    hidden = difference(eta, v_h)
    assert area(hidden) > 0
    est = occupancy_estimate(WH, q, EMPTY, v_h, [{1}])
    (h,) = est.hypotheses
    assert h.required == (True,)
    assert region_equal(h.regions[0], hidden)
    # nobody may hide: the region is only what is seen, here nothing
    est0 = occupancy_estimate(WH, q, EMPTY, v_h, [{0}])
    (h0,) = est0.hypotheses
    assert h0.required == (False,) and area(h0.regions[0]) == 0
    # unknown: "nobody hidden" is not covered by "someone hidden", both stay
    both = occupancy_estimate(WH, q, EMPTY, v_h, [{0, 1}])
    assert sorted(h.required for h in both.hypotheses) == [(False,), (True,)]
    with pytest.raises(ValueError):
        occupancy_estimate(WH, q, EMPTY, v_h, [set()])


def test_visible_occupant_lifts_presence_flag():
    q = AgentConfig(0, 0, 0, 1.0)
    v_h = region_from_disc((-7.0, 0.0), P.R, P.arc_segments)
    other = AgentConfig(1.0, -0.3, 0, 0)
    est = occupancy_estimate(WH, q, inflate([other], 0.05), v_h, [{0, 1}], s_tilde=(1,))
    assert all(not h.needs_hidden for h in est.hypotheses)


def test_consistent_with():
    q = AgentConfig(0, 0, 0, 1.0)
    topos = WH.topologies(q)
    inside = AgentConfig(1.0, -0.3, 0, 0)
    h_free = OccupancyHypothesis((EMPTY,), (False,))
    h_any = OccupancyHypothesis((topos[0],), (True,))
    assert consistent_with(h_free, topos, [])
    assert not consistent_with(h_free, topos, [inside])
    assert consistent_with(h_any, topos, [inside])
    assert not consistent_with(h_any, topos, [])


def _observe(ms, q_t, q_m, visible=()):
    v_h = region_from_disc((q_m.x, q_m.y), P.R, P.arc_segments)
    return predict(WH, ms, q_t, [q_m, *visible], v_h, P.T)


def test_predict_update_nominal_cycle():
    q_t = AgentConfig(0, 0, 0, 1.0)
    q_m = AgentConfig(-2.0, 0, 0, 0)
    ms = new_monitor(1, 0.01)
    ms = _observe(ms, q_t, q_m)
    assert ms.modes == all_modes(WH, q_t)
    assert ms.sigma_hat == {"ACC"}
    nxt, res = update(WH, ms, warehouse_flow(q_t, "ACC", P.T, P))
    assert not res.detected
    assert res.sigma_hat == {"ACC"} and res.s_star == {(0,)} and res.p_hat == (frozenset({0}),)
    assert res.verdict is Verdict.COOPERATIVE
    assert nxt.modes == {("ACC", None)} and nxt.ledger == ()


def test_update_detects_unexplained_motion():
    q_t = AgentConfig(0, 0, 0, 1.0)
    ms = _observe(new_monitor(1, 0.01), q_t, AgentConfig(-2.0, 0, 0, 0))
    jumped = AgentConfig(3.0, 0, 0, 1.0)
    nxt, res = update(WH, ms, jumped)
    assert res.detected and res.verdict is Verdict.UNCOOPERATIVE
    assert res.sigma_hat == frozenset() and res.estimate.empty
    assert nxt.modes is None


def test_update_requires_predict():
    with pytest.raises(ValueError):
        update(WH, new_monitor(1, 0.01), AgentConfig(0, 0, 0, 0))


def test_estimate_equal_is_set_equality():
    a = OccupancyHypothesis((box(0, 1, 0, 1),), (False,))
    b = OccupancyHypothesis((union(box(0, 0.5, 0, 1), box(0.5, 1, 0, 1)),), (False,))
    c = OccupancyHypothesis((box(5, 6, 5, 6),), (True,))
    assert estimate_equal(OccupancyEstimate((a, c)), OccupancyEstimate((c, b)))
    assert not estimate_equal(OccupancyEstimate((a,)), OccupancyEstimate((c,)))
