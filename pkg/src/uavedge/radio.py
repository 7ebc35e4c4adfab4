"""Stateless link-budget, delay, and energy formulas.

All air links are line-of-sight with an inverse-square power law, and rates
follow the Shannon capacity of the allocated band. Delay and energy
evaluation of a full slot decision reduces to sums of these scalar formulas,
which keeps every piece independently checkable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import HUavState, LUavState, SystemParams, TaskRequest, VehicleState


@dataclass
class LinkBudget:
    """Resolved radio link: power gain, achievable rate, and its inputs."""

    gain: float
    rate: float         # bit/s
    bandwidth: float    # Hz
    tx_power: float     # W


@dataclass
class TaskDelayBreakdown:
    """Delay components of one task along its active offload path, in s.

    Relayed tasks use the four-hop pipeline (vehicle uplink, L-UAV compute,
    relay hop, H-UAV compute); direct tasks replace the first three terms
    with the vehicle->H-UAV uplink.
    """

    t_v2lu: float = 0.0
    t_lu_comp: float = 0.0
    t_lu2hu: float = 0.0
    t_h_comp: float = 0.0
    t_v2hu_direct: float = 0.0

    @property
    def total(self) -> float:
        return (
            self.t_v2lu + self.t_lu_comp + self.t_lu2hu
            + self.t_h_comp + self.t_v2hu_direct
        )


@dataclass
class LUavEnergyBreakdown:
    """Per-slot energy spent by one L-UAV, in J."""

    e_comp: float = 0.0
    e_relay: float = 0.0
    e_flight: float = 0.0

    @property
    def total(self) -> float:
        return self.e_comp + self.e_relay + self.e_flight


def los_gain(horiz_dist_sq, alt_diff: float, gamma0: float):
    """LoS channel power gain: gamma0 over squared 3-D separation.

    ``horiz_dist_sq`` may be a scalar or array of squared horizontal
    distances in m^2.
    """
    total_sq = alt_diff * alt_diff + np.asarray(horiz_dist_sq, dtype=float)
    if np.any(total_sq <= 0.0):
        raise ValueError("co-located antennas: zero total distance")
    out = gamma0 / total_sq
    return float(out) if np.ndim(horiz_dist_sq) == 0 else out


def link_rate(bandwidth: float, tx_power, gain, noise_psd: float):
    """Shannon rate of the link in bit/s: B * log2(1 + P*h / (N0*B))."""
    if bandwidth <= 0.0 or noise_psd <= 0.0:
        raise ValueError("bandwidth and noise_psd must be positive")
    snr = np.asarray(tx_power, dtype=float) * np.asarray(gain, dtype=float) / (
        noise_psd * bandwidth
    )
    out = bandwidth * np.log2(1.0 + snr)
    return float(out) if np.ndim(out) == 0 else out


def tx_delay(bits, rate):
    """Transmission delay of a full payload at the given rate."""
    if np.any(np.asarray(rate) <= 0.0):
        raise ValueError("rate must be positive")
    out = np.asarray(bits, dtype=float) / rate
    return float(out) if np.ndim(out) == 0 else out


def relay_delay(bits, alpha, rate):
    """Relay-hop delay for the (1 - alpha) remainder of the payload."""
    if np.any(np.asarray(rate) <= 0.0):
        raise ValueError("rate must be positive")
    out = np.asarray(bits, dtype=float) * (1.0 - np.asarray(alpha, dtype=float)) / rate
    return float(out) if np.ndim(out) == 0 else out


def comp_delay(bits, density, fraction, cpu_hz):
    """Compute delay of a task fraction on a server clocked at cpu_hz."""
    work = np.asarray(bits, dtype=float) * np.asarray(density, dtype=float) \
        * np.asarray(fraction, dtype=float)
    cpu = np.asarray(cpu_hz, dtype=float)
    if np.any((work > 0.0) & (cpu <= 0.0)):
        raise ValueError("unserved work: positive fraction with zero cpu_hz")
    out = np.where(work > 0.0, work / np.where(cpu > 0.0, cpu, 1.0), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def comp_energy(bits, density, fraction, cpu_hz, kappa):
    """Compute energy of a task fraction: kappa * cycles * f^2."""
    work = np.asarray(bits, dtype=float) * np.asarray(density, dtype=float) \
        * np.asarray(fraction, dtype=float)
    out = kappa * work * np.asarray(cpu_hz, dtype=float) ** 2
    return float(out) if np.ndim(out) == 0 else out


def relay_energy(tx_power, delay):
    """Transmit energy for a relay hop: power times airtime."""
    out = np.asarray(tx_power, dtype=float) * np.asarray(delay, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def flight_energy(mass: float, dist, slot_len: float):
    """Kinetic flight cost of moving ``dist`` within one slot.

    Uses the average-speed model 0.5 * M * tau * (dist/tau)^2; hovering is
    free.
    """
    speed = np.asarray(dist, dtype=float) / slot_len
    out = 0.5 * mass * slot_len * speed * speed
    return float(out) if np.ndim(out) == 0 else out


def v2lu_link(params: SystemParams, veh_xy, luav_xy, tx_power: float) -> LinkBudget:
    """Vehicle -> L-UAV uplink budget at the given horizontal positions."""
    d2 = float(np.sum((np.asarray(luav_xy) - np.asarray(veh_xy)) ** 2))
    gain = los_gain(d2, params.h1_m, params.gamma0)
    rate = link_rate(params.bw_v2lu, tx_power, gain, params.noise_psd)
    return LinkBudget(gain, rate, params.bw_v2lu, tx_power)


def lu2hu_link(params: SystemParams, luav_xy, huav_xy, tx_power: float) -> LinkBudget:
    """L-UAV -> H-UAV relay link budget (altitude gap h2 - h1)."""
    d2 = float(np.sum((np.asarray(huav_xy) - np.asarray(luav_xy)) ** 2))
    gain = los_gain(d2, params.h2_m - params.h1_m, params.gamma0)
    rate = link_rate(params.bw_lu2hu, tx_power, gain, params.noise_psd)
    return LinkBudget(gain, rate, params.bw_lu2hu, tx_power)


def v2hu_link(params: SystemParams, veh_xy, huav_xy, tx_power: float) -> LinkBudget:
    """Vehicle -> H-UAV direct uplink budget (full altitude h2)."""
    d2 = float(np.sum((np.asarray(huav_xy) - np.asarray(veh_xy)) ** 2))
    gain = los_gain(d2, params.h2_m, params.gamma0)
    rate = link_rate(params.bw_v2hu, tx_power, gain, params.noise_psd)
    return LinkBudget(gain, rate, params.bw_v2hu, tx_power)


def v2lu_rates(params: SystemParams, veh_xy: np.ndarray, luav_xy: np.ndarray,
               tx_power) -> np.ndarray:
    """Rate matrix (V, U) between vehicle rows and L-UAV columns."""
    diff = veh_xy[:, None, :] - luav_xy[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    gain = los_gain(d2, params.h1_m, params.gamma0)
    p = np.asarray(tx_power, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    return link_rate(params.bw_v2lu, p, gain, params.noise_psd)


def evaluate_slot(
    vehicles: list[VehicleState],
    tasks: list[TaskRequest],
    decision,
    luavs: list[LUavState],
    huav: HUavState,
    params: SystemParams,
) -> tuple[list[TaskDelayBreakdown], list[LUavEnergyBreakdown]]:
    """Realize a slot decision into per-task delays and per-L-UAV energies.

    ``decision`` must expose ``assignment`` (vehicle_id -> L-UAV index),
    ``alpha``, ``f_lu``, ``f_h`` aligned with ``tasks``, ``direct_flags``,
    and the new UAV positions. L-UAV flight energy is charged against the
    move from the state's current position to the decided one.
    """
    veh_by_id = {v.id: v for v in vehicles}
    luav_pos = np.asarray(decision.luav_positions, dtype=float)
    huav_pos = np.asarray(decision.huav_position, dtype=float)

    relay_rates = [
        lu2hu_link(params, luav_pos[u], huav_pos, luavs[u].tx_power_w).rate
        for u in range(len(luavs))
    ]

    delays: list[TaskDelayBreakdown] = []
    energies = [LUavEnergyBreakdown() for _ in luavs]

    for i, task in enumerate(tasks):
        if task.vehicle_id not in decision.assignment:
            raise ValueError(f"task for vehicle {task.vehicle_id} has no L-UAV assignment")
        u = decision.assignment[task.vehicle_id]
        veh = veh_by_id[task.vehicle_id]
        alpha = float(decision.alpha[i])

        if decision.direct_flags[i]:
            rate_direct = v2hu_link(params, veh.position, huav_pos, veh.tx_power).rate
            bd = TaskDelayBreakdown(
                t_v2hu_direct=tx_delay(task.data_bits, rate_direct),
                t_h_comp=comp_delay(task.data_bits, task.density, 1.0, decision.f_h[i]),
            )
            delays.append(bd)
            continue

        rate_up = v2lu_link(params, veh.position, luav_pos[u], veh.tx_power).rate
        t_relay = relay_delay(task.data_bits, alpha, relay_rates[u])
        bd = TaskDelayBreakdown(
            t_v2lu=tx_delay(task.data_bits, rate_up),
            t_lu_comp=comp_delay(task.data_bits, task.density, alpha, decision.f_lu[i]),
            t_lu2hu=t_relay,
            t_h_comp=comp_delay(task.data_bits, task.density, 1.0 - alpha, decision.f_h[i]),
        )
        delays.append(bd)
        energies[u].e_comp += comp_energy(
            task.data_bits, task.density, alpha, decision.f_lu[i], luavs[u].kappa
        )
        energies[u].e_relay += relay_energy(luavs[u].tx_power_w, t_relay)

    for u, luav in enumerate(luavs):
        dist = float(np.linalg.norm(luav_pos[u] - luav.position))
        energies[u].e_flight = flight_energy(luav.mass_kg, dist, params.slot_s)

    return delays, energies
