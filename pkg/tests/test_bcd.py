import numpy as np
import pytest

from conftest import make_huav, make_luav
from uavedge import bcd, radio
from uavedge.scenario import TaskRequest, VehicleState


def _instance(params, n_vehicles=6, seed=23):
    rng = np.random.default_rng(seed)
    vehicles = [
        VehicleState(i, *rng.uniform(100, 900, 2), 10.0, 0.0, params.p_v_w)
        for i in range(n_vehicles)
    ]
    tasks = [
        TaskRequest(i, rng.uniform(1e6, 6e6), rng.uniform(10, 60),
                    rng.uniform(0.1, 0.2))
        for i in range(n_vehicles)
    ]
    luavs = [make_luav(0, 250.0, 250.0), make_luav(1, 750.0, 750.0)]
    huav = make_huav()
    return vehicles, tasks, luavs, huav


def test_zero_vehicles_hover_all(params):
    luavs = [make_luav(0, 250.0, 250.0), make_luav(1, 750.0, 750.0)]
    huav = make_huav()
    decision = bcd.optimize_slot(luavs, huav, [], [], params, params.control_k,
                                 np.zeros(2))
    assert decision.converged
    assert decision.assignment == {}
    assert np.allclose(decision.luav_positions, [[250.0, 250.0], [750.0, 750.0]])
    assert np.allclose(decision.huav_position, [500.0, 500.0])
    assert decision.objective_trace == [0.0]


def test_objective_trace_is_monotone(params):
    vehicles, tasks, luavs, huav = _instance(params)
    decision = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                                 params.control_k, np.array([1.0, 3.0]))
    assert len(decision.objective_trace) >= 1
    for a, b in zip(decision.objective_trace, decision.objective_trace[1:]):
        assert b <= a + 1e-9 * max(1.0, abs(a))


def test_small_instance_converges_quickly(params):
    vehicles, tasks, luavs, huav = _instance(params, n_vehicles=1)
    decision = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                                 params.control_k, np.zeros(2))
    assert decision.converged
    assert decision.bcd_iterations <= 3


def test_extra_iteration_changes_little(params):
    vehicles, tasks, luavs, huav = _instance(params, seed=29)
    d1 = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                           params.control_k, np.array([0.5, 2.0]), j_max=10)
    extra = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                              params.control_k, np.array([0.5, 2.0]),
                              j_max=d1.bcd_iterations + 1)
    o1 = bcd.evaluate_objective(d1, vehicles, tasks, luavs, huav, params,
                                params.control_k, np.array([0.5, 2.0]))
    o2 = bcd.evaluate_objective(extra, vehicles, tasks, luavs, huav, params,
                                params.control_k, np.array([0.5, 2.0]))
    assert abs(o2 - o1) <= 1e-4 * max(abs(o1), 1e-12) + 1e-12


def test_huge_k_matches_delay_only_argmin(params):
    # with zero queues the objective is K*T for any K: decisions must agree
    vehicles, tasks, luavs, huav = _instance(params, seed=31)
    zeros = np.zeros(2)
    d_k1 = bcd.optimize_slot(luavs, huav, vehicles, tasks, params, params.control_k, zeros)
    d_k6 = bcd.optimize_slot(luavs, huav, vehicles, tasks, params, 1e6, zeros)
    t1 = sum(d.total for d in radio.evaluate_slot(
        vehicles, tasks, d_k1, luavs, huav, params)[0])
    t6 = sum(d.total for d in radio.evaluate_slot(
        vehicles, tasks, d_k6, luavs, huav, params)[0])
    assert t6 == pytest.approx(t1, rel=1e-6)


def test_decision_respects_hard_constraints(params):
    rng = np.random.default_rng(37)
    for seed in range(5):
        vehicles, tasks, luavs, huav = _instance(params, n_vehicles=10, seed=seed)
        queues = rng.uniform(0, 10, 2)
        decision = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                                     params.control_k, queues)
        # speed limits, exactly
        for u, luav in enumerate(luavs):
            dist = np.linalg.norm(decision.luav_positions[u] - [luav.x, luav.y])
            assert dist <= luav.max_speed_mps * params.slot_s * (1 + 1e-9)
        assert np.linalg.norm(decision.huav_position - [huav.x, huav.y]) \
            <= huav.max_speed_mps * params.slot_s * (1 + 1e-9)
        # pairwise safety, true distance
        gap = np.linalg.norm(decision.luav_positions[0] - decision.luav_positions[1])
        assert gap >= params.d_safe_m * (1 - 1e-9)
        # capacity budgets
        for u in range(2):
            mask = np.array([decision.assignment[t.vehicle_id] == u for t in tasks])
            assert decision.f_lu[mask].sum() <= luavs[u].cpu_hz * (1 + 1e-9)
        assert decision.f_h.sum() <= huav.cpu_hz * (1 + 1e-9)
        assert np.all(decision.alpha >= 0.0) and np.all(decision.alpha <= 1.0)
        assert np.all(decision.f_lu >= 0.0) and np.all(decision.f_h >= 0.0)
        # realized deadlines hold against the (possibly relaxed) budget
        delays, _ = radio.evaluate_slot(vehicles, tasks, decision, luavs, huav, params)
        for d, t in zip(delays, tasks):
            assert d.total <= t.deadline_s * decision.relax_factor * (1 + 1e-9)


def test_fixed_huav_position_is_respected(params):
    vehicles, tasks, luavs, huav = _instance(params, seed=41)
    target = np.array([430.0, 520.0])
    decision = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                                 params.control_k, np.zeros(2),
                                 fixed_huav_position=target)
    assert np.allclose(decision.huav_position, target)


def test_direct_reroute_only_when_it_helps(params):
    # huge queue on one UAV pushes alpha to 0; nearby vehicle can go direct
    vehicles = [VehicleState(0, 495.0, 500.0, 10.0, 0.0, params.p_v_w)]
    tasks = [TaskRequest(0, 1.5e6, 20.0, 0.2)]
    luavs = [make_luav(0, 490.0, 500.0)]
    huav = make_huav(500.0, 500.0)
    queues = np.array([50.0])
    decision = bcd.optimize_slot(luavs, huav, vehicles, tasks, params,
                                 params.control_k, queues)
    if decision.direct_flags[0]:
        delays, energies = radio.evaluate_slot(vehicles, tasks, decision, luavs,
                                               huav, params)
        assert delays[0].t_v2hu_direct > 0.0
        assert energies[0].e_relay == 0.0
        assert delays[0].total <= tasks[0].deadline_s * decision.relax_factor * (1 + 1e-9)
    else:
        assert decision.alpha[0] > 0.0 or decision.relax_factor > 1.0
