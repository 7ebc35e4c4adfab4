"""Vehicle to L-UAV matching: greedy seeding plus fixed-point improvement.

Stage 1 assigns every vehicle to its cheapest L-UAV assuming each server
would dedicate its whole clock to the task. Stage 2 re-prices servers under
an even split of their clock across current load and lets vehicles switch
to strictly cheaper servers until a full pass makes no switch. Ties always
break toward the lowest L-UAV index so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import radio
from .scenario import LUavState, SystemParams, TaskRequest, VehicleState

MAX_PASSES = 50


@dataclass
class Matching:
    """Total assignment of requesting vehicles to L-UAV indices."""

    assignment: dict[int, int]              # vehicle_id -> L-UAV index
    per_uav_load: dict[int, int]
    converged: bool = True
    passes: int = 0

    def served(self, u: int) -> list[int]:
        return [v for v, uu in self.assignment.items() if uu == u]


def offload_cost(k: float, q_u: float, t_tx: float, t_comp: float, e_comp: float) -> float:
    """Cost of serving one task on one L-UAV: K*(delays) + Q_u*compute energy."""
    return k * (t_tx + t_comp) + q_u * e_comp


def _cost_table(
    tasks: list[TaskRequest],
    rates: np.ndarray,
    f_u: np.ndarray,
    queues: np.ndarray,
    kappas: np.ndarray,
    k: float,
) -> np.ndarray:
    """Cost matrix (V, U) with per-UAV clock f_u applied to every task."""
    bits = np.array([t.data_bits for t in tasks])
    cycles = bits * np.array([t.density for t in tasks])
    t_tx = bits[:, None] / rates
    t_comp = cycles[:, None] / f_u[None, :]
    e_comp = kappas[None, :] * cycles[:, None] * f_u[None, :] ** 2
    return k * (t_tx + t_comp) + queues[None, :] * e_comp


def _loads(assign: np.ndarray, n_uavs: int) -> np.ndarray:
    return np.bincount(assign, minlength=n_uavs)


def greedy_match(
    vehicles: list[VehicleState],
    tasks: list[TaskRequest],
    luavs: list[LUavState],
    params: SystemParams,
    k: float,
    queues: np.ndarray,
) -> Matching:
    """Stage 1: argmin-cost assignment with every server at full clock.

    L-UAV positions are taken as-is from ``luavs`` (the previous slot's
    positions in the online pipeline).
    """
    if not luavs:
        raise ValueError("need at least one L-UAV")
    if not vehicles:
        return Matching({}, {u.id: 0 for u in luavs})

    veh_xy = np.array([[v.x, v.y] for v in vehicles])
    luav_xy = np.array([[u.x, u.y] for u in luavs])
    tx = np.array([v.tx_power for v in vehicles])
    rates = radio.v2lu_rates(params, veh_xy, luav_xy, tx)

    full = np.array([u.cpu_hz for u in luavs])
    kappas = np.array([u.kappa for u in luavs])
    costs = _cost_table(tasks, rates, full, np.asarray(queues, dtype=float), kappas, k)
    assign = np.argmin(costs, axis=1)

    assignment = {v.id: int(assign[i]) for i, v in enumerate(vehicles)}
    loads = _loads(assign, len(luavs))
    return Matching(assignment, {u: int(loads[u]) for u in range(len(luavs))})


def improve_match(
    matching: Matching,
    vehicles: list[VehicleState],
    tasks: list[TaskRequest],
    luavs: list[LUavState],
    params: SystemParams,
    k: float,
    queues: np.ndarray,
) -> Matching:
    """Stage 2: switch vehicles to cheaper servers under even clock splits.

    Clocks and the cost table are refreshed once per pass (idle servers are
    priced at full clock); within a pass vehicles are processed in ascending
    order against the frozen table and switch only on strictly lower cost.
    Stops at a fixed point, or after MAX_PASSES with the best-cost matching
    seen, flagged via ``converged=False``.
    """
    if not vehicles:
        return matching

    veh_xy = np.array([[v.x, v.y] for v in vehicles])
    luav_xy = np.array([[u.x, u.y] for u in luavs])
    tx = np.array([v.tx_power for v in vehicles])
    rates = radio.v2lu_rates(params, veh_xy, luav_xy, tx)

    full = np.array([u.cpu_hz for u in luavs])
    kappas = np.array([u.kappa for u in luavs])
    queues = np.asarray(queues, dtype=float)
    n_uavs = len(luavs)

    order = np.argsort([v.id for v in vehicles], kind="stable")
    assign = np.array([matching.assignment[v.id] for v in vehicles])

    def total_cost(a: np.ndarray) -> float:
        loads = _loads(a, n_uavs)
        f_u = full / np.maximum(loads, 1)
        table = _cost_table(tasks, rates, f_u, queues, kappas, k)
        return float(table[np.arange(len(a)), a].sum())

    best_assign = assign.copy()
    best_cost = total_cost(assign)
    converged = False
    passes = 0

    for _ in range(MAX_PASSES):
        passes += 1
        loads = _loads(assign, n_uavs)
        f_u = full / np.maximum(loads, 1)
        table = _cost_table(tasks, rates, f_u, queues, kappas, k)

        switched = False
        for i in order:
            u_best = int(np.argmin(table[i]))
            if table[i, u_best] < table[i, assign[i]]:
                assign[i] = u_best
                switched = True

        cost = total_cost(assign)
        if cost < best_cost:
            best_cost = cost
            best_assign = assign.copy()

        if not switched:
            converged = True
            break

    if not converged:
        assign = best_assign

    assignment = {v.id: int(assign[i]) for i, v in enumerate(vehicles)}
    loads = _loads(assign, n_uavs)
    return Matching(
        assignment,
        {u: int(loads[u]) for u in range(n_uavs)},
        converged=converged,
        passes=passes,
    )


def match_vehicles(
    vehicles: list[VehicleState],
    tasks: list[TaskRequest],
    luavs: list[LUavState],
    params: SystemParams,
    k: float,
    queues: np.ndarray,
) -> Matching:
    """Run both matching stages back to back."""
    seed = greedy_match(vehicles, tasks, luavs, params, k, queues)
    return improve_match(seed, vehicles, tasks, luavs, params, k, queues)
