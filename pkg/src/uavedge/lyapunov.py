"""Energy-deviation queues and the per-slot drift-plus-penalty objective.

Each L-UAV carries a virtual queue that accumulates how far its realized
energy use has run ahead of harvest plus quota. The queue value weights that
UAV's energy in the per-slot objective, so energy-hungry UAVs are throttled
while well-charged ones chase delay. ``check_drift_bound`` verifies the
sampled one-slot drift inequality the controller is built on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import radio
from .scenario import LUavState, SystemParams


@dataclass
class QueueState:
    """Energy-deviation queue values (J per L-UAV) at a given slot."""

    q: np.ndarray
    slot_index: int = 0


@dataclass
class BoundReport:
    """One slot's realized drift-plus-penalty inequality check.

    ``lhs`` is the sampled drift plus weighted delay; ``rhs`` the constant
    bound plus penalty plus queue-weighted energy deviation. ``b_const``
    is 0.5 * sum((E_max)^2 + (e_m + E_q)^2) over L-UAVs.
    """

    lhs: float
    rhs: float
    b_const: float
    e_u_max: np.ndarray
    violated: bool


def update_queue(q: float, energy_used: float, harvested: float, quota: float) -> float:
    """Advance one deviation queue: max(q + E - e - E_q, 0)."""
    return max(q + energy_used - harvested - quota, 0.0)


def update_queue_vec(q: np.ndarray, energy_used: np.ndarray, harvested: np.ndarray,
                     quota: float) -> np.ndarray:
    """Vectorized queue update across L-UAVs."""
    return np.maximum(np.asarray(q) + np.asarray(energy_used)
                      - np.asarray(harvested) - quota, 0.0)


def slot_objective(k: float, total_delay: float, queues: np.ndarray,
                   luav_energies: np.ndarray) -> float:
    """Per-slot objective: K * T(n) + sum_u Q_u(n) * E_u(n)."""
    queues = np.asarray(queues, dtype=float)
    energies = np.asarray(luav_energies, dtype=float)
    if queues.shape != energies.shape:
        raise ValueError("queues and energies must have matching lengths")
    return k * total_delay + float(np.dot(queues, energies))


def drift_bound_constant(e_u_max: np.ndarray, max_harvest_j: float, quota: float) -> float:
    """Constant B bounding the quadratic deviation term across L-UAVs."""
    e_u_max = np.asarray(e_u_max, dtype=float)
    return 0.5 * float(np.sum(e_u_max ** 2 + (max_harvest_j + quota) ** 2))


def check_drift_bound(
    queues: np.ndarray,
    energy_used: np.ndarray,
    harvested: np.ndarray,
    quota: float,
    k: float,
    total_delay: float,
    max_harvest_j: float,
    e_u_max: np.ndarray,
) -> BoundReport:
    """Evaluate the realized one-slot drift-plus-penalty inequality.

    The expectation-free (pathwise) form is checked: with q' the updated
    queues, 0.5*sum(q'^2 - q^2) + K*T must not exceed
    B + K*T + sum(q * (E - e - E_q)). A violation is reported, not raised.
    """
    queues = np.asarray(queues, dtype=float)
    energy_used = np.asarray(energy_used, dtype=float)
    harvested = np.asarray(harvested, dtype=float)
    q_next = update_queue_vec(queues, energy_used, harvested, quota)

    b_const = drift_bound_constant(e_u_max, max_harvest_j, quota)
    lhs = 0.5 * float(np.sum(q_next ** 2 - queues ** 2)) + k * total_delay
    rhs = b_const + k * total_delay + float(
        np.dot(queues, energy_used - harvested - quota)
    )
    tol = 1e-9 * max(1.0, abs(lhs), abs(rhs))
    return BoundReport(
        lhs=lhs,
        rhs=rhs,
        b_const=b_const,
        e_u_max=np.asarray(e_u_max, dtype=float),
        violated=lhs > rhs + tol,
    )


def worst_case_slot_energy(params: SystemParams, luav: LUavState) -> float:
    """Constructive upper bound on one L-UAV's per-slot energy use.

    Assumes the worst admissible slot: the maximum vehicle count all served
    by this UAV, each with the largest task computed at full clock, each
    relayed at the weakest in-area link rate, plus a full-speed move. Loose
    by design; only finiteness and validity matter.
    """
    v_max = params.v_count_range[1]
    bits_max = params.task_bits_range[1]
    cycles_max = bits_max * params.density_range[1]

    # weakest relay link: both UAVs pinned to opposite corners of the area
    diag_sq = 2.0 * params.area_m ** 2
    gain_min = radio.los_gain(diag_sq, params.h2_m - params.h1_m, params.gamma0)
    rate_min = radio.link_rate(params.bw_lu2hu, luav.tx_power_w, gain_min,
                               params.noise_psd)

    e_comp = luav.kappa * cycles_max * luav.cpu_hz ** 2
    e_relay = luav.tx_power_w * bits_max / rate_min
    e_flight = 0.5 * luav.mass_kg * params.slot_s * luav.max_speed_mps ** 2
    return v_max * (e_comp + e_relay) + e_flight


def worst_case_energies(params: SystemParams, luavs: list[LUavState]) -> np.ndarray:
    return np.array([worst_case_slot_energy(params, u) for u in luavs])
