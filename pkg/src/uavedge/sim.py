"""Episode driver: N slots of generation, decision, realization, accounting.

Hosts the policy zoo. The adaptive policy feeds real deviation queues into
the per-slot optimizer; the fixed-trajectory variant pins the H-UAV to a
diagonal sweep; the delay-only baseline zeroes the queue weights; the
per-slot-cap baseline enforces a hard per-slot energy budget through
multiplier search on the same machinery; the energy-centric baseline
minimizes energy subject to deadlines only. Queues always track realized
energies regardless of what the policy's decisions used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bcd, radio
from .lyapunov import (
    BoundReport, QueueState, check_drift_bound, update_queue_vec,
    worst_case_energies,
)
from .scenario import (
    HUavState, LUavState, SystemParams, TaskRequest, VehicleState,
    generate_slot, sample_harvest_vec,
)

POLICY_KINDS = ("LATUS", "FT_LATUS", "DELAY_ONLY", "PER_SLOT_CAP", "ENERGY_CENTRIC")

DEDR_GUARD_J = 1e-6
CAP_SEARCH_ITERS = 6


@dataclass
class Policy:
    """Per-slot decision policy selector plus its parameters."""

    kind: str
    cap_j: float | None = None          # PER_SLOT_CAP budget before harvest
    energy_weight: float = 1.0          # ENERGY_CENTRIC queue substitute
    waypoints: np.ndarray | None = None  # FT_LATUS H-UAV position per slot

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.cap_j is not None and self.cap_j <= 0.0:
            raise ValueError("cap_j must be > 0")


def diagonal_waypoints(params: SystemParams, huav: HUavState, n_slots: int) -> np.ndarray:
    """Back-and-forth sweep along the area diagonal at the H-UAV's top speed.

    Starts from the configured initial position (on the main diagonal in
    the default layout) so the first hop already satisfies the speed limit,
    and bounces wherever the path would leave the area.
    """
    step = huav.max_speed_mps * params.slot_s
    direction = np.array([1.0, 1.0]) / math.sqrt(2.0)
    pos = np.array([huav.x, huav.y], dtype=float)
    sign = 1.0
    out = np.zeros((n_slots, 2))
    for n in range(n_slots):
        cand = pos + sign * step * direction
        if np.any(cand > params.area_m) or np.any(cand < 0.0):
            sign = -sign
            cand = pos + sign * step * direction
        pos = np.clip(cand, 0.0, params.area_m)
        out[n] = pos
    return out


def make_policy(kind: str, params: SystemParams, huav: HUavState,
                n_slots: int | None = None, **kwargs) -> Policy:
    """Construct a policy, filling in defaults that depend on the scenario."""
    if kind == "FT_LATUS" and "waypoints" not in kwargs:
        kwargs["waypoints"] = diagonal_waypoints(params, huav, n_slots or params.n_slots)
    if kind == "PER_SLOT_CAP" and kwargs.get("cap_j") is None:
        kwargs["cap_j"] = params.energy_quota_j
    return Policy(kind=kind, **kwargs)


@dataclass
class SlotInputs:
    vehicles: list[VehicleState]
    tasks: list[TaskRequest]
    harvest: np.ndarray


@dataclass
class SimState:
    luavs: list[LUavState]
    huav: HUavState
    vehicles: list[VehicleState]
    queue_state: QueueState
    prev_energy: np.ndarray | None = None
    prev_harvest: np.ndarray | None = None

    @property
    def slot(self) -> int:
        return self.queue_state.slot_index

    @property
    def queues(self) -> np.ndarray:
        return self.queue_state.q


@dataclass
class SlotMetrics:
    slot: int
    n_tasks: int
    queues: np.ndarray          # deviation queues the decision saw, Q(n)
    queues_after: np.ndarray    # end-of-slot deviation queues, Q(n+1)
    harvest: np.ndarray
    delays: list[radio.TaskDelayBreakdown]
    energies: list[radio.LUavEnergyBreakdown]
    total_delay_s: float
    mean_task_delay_s: float
    deadline_violations: int
    infeasible: bool
    relax_factor: float
    cap_violated: bool
    matching_converged: bool
    bcd_iterations: int
    converged: bool
    objective_trace: list[float]
    luav_positions: np.ndarray
    huav_position: np.ndarray
    bound: BoundReport
    dedr: float = math.nan


@dataclass
class RunTrace:
    policy: str
    seed: int
    slots: list[SlotMetrics]
    summary: dict

    def verify_aggregates(self, tol: float = 1e-9) -> bool:
        """Recompute the summary from the per-slot rows and compare."""
        fresh = summarize(self.policy, self.seed, self.slots)
        for key, value in fresh.items():
            have = self.summary[key]
            if isinstance(value, float):
                if not math.isclose(value, have, rel_tol=tol, abs_tol=tol):
                    return False
            elif isinstance(value, list):
                if not np.allclose(value, have, rtol=tol, atol=tol):
                    return False
            elif value != have:
                return False
        return True


def _effective_weights(policy: Policy, queues: np.ndarray, k: float):
    if policy.kind in ("LATUS", "FT_LATUS"):
        return k, queues
    if policy.kind == "DELAY_ONLY":
        return k, np.zeros_like(queues)
    if policy.kind == "ENERGY_CENTRIC":
        return 0.0, np.full_like(queues, policy.energy_weight)
    if policy.kind == "PER_SLOT_CAP":
        return k, None  # multiplier search supplies the weights
    raise ValueError(policy.kind)


def _decide_with_cap(state: SimState, inputs: SlotInputs, policy: Policy,
                     params: SystemParams, k: float) -> tuple[bcd.SlotDecision, bool]:
    """Enforce E_u <= cap + harvest by searching per-UAV energy multipliers."""
    caps = (policy.cap_j or params.energy_quota_j) + inputs.harvest
    nu = np.zeros(len(state.luavs))
    compliant: bcd.SlotDecision | None = None
    decision = None
    for _ in range(CAP_SEARCH_ITERS):
        decision = bcd.optimize_slot(state.luavs, state.huav, inputs.vehicles,
                                     inputs.tasks, params, k, nu)
        _, energies = radio.evaluate_slot(inputs.vehicles, inputs.tasks, decision,
                                          state.luavs, state.huav, params)
        totals = np.array([e.total for e in energies])
        over = totals > caps * (1.0 + 1e-6)
        if not np.any(over):
            compliant = decision
            slack = (nu > 0.0) & (totals < 0.9 * caps)
            if not np.any(slack):
                break
            nu = np.where(slack, nu * 0.5, nu)
        else:
            nu = np.where(over, np.maximum(nu * 4.0, 1e-2), nu)
    if compliant is not None:
        return compliant, False
    return decision, True


def step(state: SimState, inputs: SlotInputs, policy: Policy, params: SystemParams,
         e_u_max: np.ndarray) -> tuple[SimState, SlotMetrics]:
    """Advance one slot: queues, decision, realization, state hand-off."""
    if state.slot == 0:
        queues = np.zeros(len(state.luavs))
    else:
        queues = update_queue_vec(state.queues, state.prev_energy,
                                  state.prev_harvest, params.energy_quota_j)
    for u, luav in enumerate(state.luavs):
        luav.queue_j = float(queues[u])

    k = params.control_k
    cap_violated = False
    if policy.kind == "PER_SLOT_CAP":
        decision, cap_violated = _decide_with_cap(state, inputs, policy, params, k)
    else:
        k_eff, q_eff = _effective_weights(policy, queues, k)
        fixed = policy.waypoints[state.slot] if policy.kind == "FT_LATUS" else None
        decision = bcd.optimize_slot(state.luavs, state.huav, inputs.vehicles,
                                     inputs.tasks, params, k_eff, q_eff,
                                     fixed_huav_position=fixed)

    delays, energies = radio.evaluate_slot(inputs.vehicles, inputs.tasks, decision,
                                           state.luavs, state.huav, params)
    totals = np.array([e.total for e in energies])
    total_delay = float(sum(d.total for d in delays))
    violations = sum(
        1 for d, t in zip(delays, inputs.tasks)
        if d.total > t.deadline_s * (1.0 + 1e-9)
    )

    bound = check_drift_bound(queues, totals, inputs.harvest, params.energy_quota_j,
                              k, total_delay, params.max_harvest_j, e_u_max)

    metrics = SlotMetrics(
        slot=state.slot,
        n_tasks=len(inputs.tasks),
        queues=queues.copy(),
        queues_after=update_queue_vec(queues, totals, inputs.harvest,
                                      params.energy_quota_j),
        harvest=np.asarray(inputs.harvest, dtype=float).copy(),
        delays=delays,
        energies=energies,
        total_delay_s=total_delay,
        mean_task_delay_s=total_delay / max(len(inputs.tasks), 1),
        deadline_violations=violations,
        infeasible=not decision.feasible,
        relax_factor=decision.relax_factor,
        cap_violated=cap_violated,
        matching_converged=decision.matching.converged,
        bcd_iterations=decision.bcd_iterations,
        converged=decision.converged,
        objective_trace=list(decision.objective_trace),
        luav_positions=np.asarray(decision.luav_positions, dtype=float).copy(),
        huav_position=np.asarray(decision.huav_position, dtype=float).copy(),
        bound=bound,
    )

    new_luavs = [
        replace(luav, x=float(decision.luav_positions[u][0]),
                y=float(decision.luav_positions[u][1]))
        for u, luav in enumerate(state.luavs)
    ]
    new_huav = replace(state.huav, x=float(decision.huav_position[0]),
                       y=float(decision.huav_position[1]))
    new_state = SimState(
        luavs=new_luavs, huav=new_huav, vehicles=inputs.vehicles,
        slot=state.slot + 1, prev_energy=totals,
        prev_harvest=np.asarray(inputs.harvest, dtype=float),
    )
    return new_state, metrics


def compute_dedr(metrics: list[SlotMetrics], window: int | None = None) -> np.ndarray:
    """Delay-to-energy-deviation ratio series.

    Windowed (or expanding, when ``window`` is None) mean task delay over
    the same-windowed mean per-UAV queue deviation, guarded against zero
    deviation by a tiny constant. Deviations are measured at the end of
    each slot (the initial queues are identically zero and carry no
    information).
    """
    delays = np.array([m.mean_task_delay_s for m in metrics])
    devs = np.array([float(np.mean(m.queues_after)) for m in metrics])
    n = len(metrics)
    out = np.zeros(n)
    for i in range(n):
        start = 0 if window is None else max(0, i - window + 1)
        out[i] = delays[start:i + 1].mean() / (devs[start:i + 1].mean() + DEDR_GUARD_J)
    return out


def summarize(policy_kind: str, seed: int, metrics: list[SlotMetrics]) -> dict:
    """Aggregate a run's per-slot rows into its summary scalars."""
    n_uavs = len(metrics[0].queues) if metrics else 0
    net = np.array([
        [m.energies[u].total - m.harvest[u] for u in range(n_uavs)]
        for m in metrics
    ])
    tx = np.array([[m.energies[u].e_relay for u in range(n_uavs)] for m in metrics])
    dedr = np.array([m.dedr for m in metrics])
    return {
        "policy": policy_kind,
        "seed": seed,
        "n_slots": len(metrics),
        "time_avg_total_delay_s": float(np.mean([m.total_delay_s for m in metrics])),
        "time_avg_task_delay_s": float(np.mean([m.mean_task_delay_s for m in metrics])),
        "time_avg_tx_energy_j": float(tx.mean()),
        "dedr_std": float(np.std(dedr)),
        "queue_max": float(max(np.max(m.queues) for m in metrics)),
        "per_uav_avg_net_energy_j": [float(v) for v in net.mean(axis=0)],
        "deadline_violations": int(sum(m.deadline_violations for m in metrics)),
        "infeasible_slots": int(sum(m.infeasible for m in metrics)),
        "cap_violated_slots": int(sum(m.cap_violated for m in metrics)),
        "bound_violations": int(sum(m.bound.violated for m in metrics)),
        "bcd_iterations_mean": float(np.mean([m.bcd_iterations for m in metrics])),
        "bcd_iterations_max": int(max(m.bcd_iterations for m in metrics)),
        "converged_slots": int(sum(m.converged for m in metrics)),
    }


def run(scenario_seed: int, policy: Policy, params: SystemParams,
        luavs: list[LUavState], huav: HUavState,
        n_slots: int | None = None) -> RunTrace:
    """Drive one seeded episode and return its full trace."""
    n_slots = n_slots if n_slots is not None else params.n_slots
    rng = np.random.default_rng(scenario_seed)
    state = SimState(
        luavs=[replace(u, queue_j=0.0) for u in luavs],
        huav=replace(huav),
        vehicles=[],
    )
    e_u_max = worst_case_energies(params, state.luavs)

    metrics: list[SlotMetrics] = []
    for _ in range(n_slots):
        vehicles, tasks = generate_slot(rng, params, state.vehicles)
        harvest = sample_harvest_vec(rng, params.max_harvest_j, len(state.luavs))
        inputs = SlotInputs(vehicles, tasks, harvest)
        state, m = step(state, inputs, policy, params, e_u_max)
        metrics.append(m)

    for i, d in enumerate(compute_dedr(metrics)):
        metrics[i].dedr = float(d)

    return RunTrace(policy.kind, scenario_seed, metrics,
                    summarize(policy.kind, scenario_seed, metrics))
