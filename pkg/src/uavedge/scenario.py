"""Static system parameters and seeded per-slot scenario generation.

Vehicles live on the ground plane of a square service area, move along
straight lines with boundary reflection, and emit one compute task per slot.
Low-tier UAVs harvest a random amount of energy each slot. Everything is
drawn from one explicit numpy Generator so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def db_to_linear(db: float) -> float:
    """Convert a dB power ratio to linear scale."""
    return 10.0 ** (db / 10.0)


def dbm_per_hz_to_w_per_hz(dbm: float) -> float:
    """Convert a spectral density in dBm/Hz to W/Hz."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class SystemParams:
    """Global scenario constants, stored in SI units (already converted).

    ``gamma0`` is the linear reference channel power gain at 1 m and
    ``noise_psd`` the noise power spectral density in W/Hz; the config layer
    converts them from dB / dBm/Hz.
    """

    gamma0: float = db_to_linear(-50.0)
    noise_psd: float = dbm_per_hz_to_w_per_hz(-174.0)
    bw_v2lu: float = 2e6            # Hz, vehicle -> L-UAV uplink
    bw_lu2hu: float = 10e6          # Hz, L-UAV -> H-UAV relay link
    bw_v2hu: float = 2e6            # Hz, vehicle -> H-UAV direct uplink
    slot_s: float = 0.2             # slot length tau, s
    control_k: float = 100.0        # delay weight in the per-slot objective
    energy_quota_j: float = 4.0     # per-slot reference energy budget, J
    max_harvest_j: float = 0.5      # max harvestable energy per slot, J
    d_safe_m: float = 5.0           # minimum pairwise L-UAV separation, m
    h1_m: float = 100.0             # L-UAV operating altitude, m
    h2_m: float = 150.0             # H-UAV operating altitude, m
    n_slots: int = 100
    area_m: float = 1000.0          # side of the square service area, m
    v_count_range: tuple[int, int] = (10, 40)
    task_bits_range: tuple[float, float] = (1e6, 10e6)
    density_range: tuple[float, float] = (10.0, 100.0)      # cycles/bit
    deadline_range: tuple[float, float] = (0.050, 0.200)    # s
    speed_range: tuple[float, float] = (30.0 / 3.6, 80.0 / 3.6)  # m/s
    p_v_w: float = 0.5              # vehicle transmit power, W

    def validate(self) -> list[str]:
        """Return a list of invariant violations (empty when valid)."""
        bad = []
        positives = [
            ("gamma0", self.gamma0), ("noise_psd", self.noise_psd),
            ("bw_v2lu", self.bw_v2lu), ("bw_lu2hu", self.bw_lu2hu),
            ("bw_v2hu", self.bw_v2hu), ("slot_s", self.slot_s),
            ("energy_quota_j", self.energy_quota_j),
            ("max_harvest_j", self.max_harvest_j),
            ("d_safe_m", self.d_safe_m), ("h1_m", self.h1_m),
            ("h2_m", self.h2_m), ("area_m", self.area_m),
            ("p_v_w", self.p_v_w),
        ]
        for name, value in positives:
            if not value > 0.0:
                bad.append(f"{name} must be > 0, got {value}")
        if self.control_k < 0.0:
            bad.append(f"control_k must be >= 0, got {self.control_k}")
        if self.n_slots < 1:
            bad.append(f"n_slots must be >= 1, got {self.n_slots}")
        if self.h2_m <= self.h1_m:
            bad.append(f"h2_m must exceed h1_m, got {self.h2_m} <= {self.h1_m}")
        if self.v_count_range[0] < 1:
            bad.append(f"v_count_range min must be >= 1, got {self.v_count_range[0]}")
        for name, rng in [
            ("v_count_range", self.v_count_range),
            ("task_bits_range", self.task_bits_range),
            ("density_range", self.density_range),
            ("deadline_range", self.deadline_range),
            ("speed_range", self.speed_range),
        ]:
            if rng[0] > rng[1]:
                bad.append(f"{name} min must not exceed max, got {rng}")
        if self.task_bits_range[0] <= 0.0:
            bad.append("task_bits_range must be positive")
        if self.density_range[0] <= 0.0:
            bad.append("density_range must be positive")
        if self.deadline_range[0] <= 0.0 or self.deadline_range[1] > self.slot_s:
            bad.append(
                f"deadline_range must lie within (0, slot_s], got {self.deadline_range}"
            )
        return bad


@dataclass
class VehicleState:
    """Ground vehicle: position on the z=0 plane plus straight-line motion."""

    id: int
    x: float
    y: float
    speed: float        # m/s
    heading: float      # rad
    tx_power: float     # W

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class TaskRequest:
    """One compute request: payload size, compute density, and deadline."""

    vehicle_id: int
    data_bits: float
    density: float          # cycles/bit
    deadline_s: float


@dataclass
class LUavState:
    """Low-tier UAV: edge server with an energy-deviation queue."""

    id: int
    x: float
    y: float
    cpu_hz: float
    kappa: float            # compute energy coefficient, J per cycle per Hz^2
    mass_kg: float
    tx_power_w: float
    max_speed_mps: float
    queue_j: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class HUavState:
    """High-tier UAV: backup server and relay target, no energy accounting."""

    x: float
    y: float
    cpu_hz: float
    max_speed_mps: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


def _reflect(value: float, low: float, high: float) -> tuple[float, bool]:
    """Fold ``value`` back into ``[low, high]``; report whether it bounced."""
    span = high - low
    offset = (value - low) % (2.0 * span)
    if offset > span:
        return high - (offset - span), True
    bounced = not (low <= value <= high)
    return low + offset, bounced


def advance_vehicle(vehicle: VehicleState, slot_s: float, area_m: float) -> VehicleState:
    """Move a vehicle one slot along its heading, reflecting at the boundary."""
    dx = vehicle.speed * slot_s * math.cos(vehicle.heading)
    dy = vehicle.speed * slot_s * math.sin(vehicle.heading)
    x, flip_x = _reflect(vehicle.x + dx, 0.0, area_m)
    y, flip_y = _reflect(vehicle.y + dy, 0.0, area_m)
    vx = math.cos(vehicle.heading) * (-1.0 if flip_x else 1.0)
    vy = math.sin(vehicle.heading) * (-1.0 if flip_y else 1.0)
    heading = math.atan2(vy, vx) if (flip_x or flip_y) else vehicle.heading
    return VehicleState(vehicle.id, x, y, vehicle.speed, heading, vehicle.tx_power)


def generate_slot(
    rng: np.random.Generator,
    params: SystemParams,
    prev_vehicles: list[VehicleState] | None = None,
) -> tuple[list[VehicleState], list[TaskRequest]]:
    """Produce the vehicle population and task batch for one slot.

    The requesting count is redrawn uniformly each slot. Vehicles carried
    over from the previous slot advance along their headings; the remainder
    spawn uniformly in the area with fresh speed and heading. Every vehicle
    submits exactly one task.
    """
    prev_vehicles = prev_vehicles or []
    lo, hi = params.v_count_range
    count = int(rng.integers(lo, hi + 1))

    survivors = [
        advance_vehicle(v, params.slot_s, params.area_m)
        for v in prev_vehicles[: min(count, len(prev_vehicles))]
    ]
    next_id = max((v.id for v in prev_vehicles), default=-1) + 1

    vehicles = list(survivors)
    for _ in range(count - len(survivors)):
        x, y = rng.uniform(0.0, params.area_m, size=2)
        speed = float(rng.uniform(*params.speed_range))
        heading = float(rng.uniform(0.0, TWO_PI))
        vehicles.append(VehicleState(next_id, float(x), float(y), speed, heading, params.p_v_w))
        next_id += 1

    tasks = [
        TaskRequest(
            vehicle_id=v.id,
            data_bits=float(rng.uniform(*params.task_bits_range)),
            density=float(rng.uniform(*params.density_range)),
            deadline_s=float(rng.uniform(*params.deadline_range)),
        )
        for v in vehicles
    ]
    return vehicles, tasks


def sample_harvest(rng: np.random.Generator, max_harvest_j: float) -> float:
    """Draw one slot's harvested energy, uniform on [0, max_harvest_j]."""
    if max_harvest_j < 0.0:
        raise ValueError(f"max_harvest_j must be >= 0, got {max_harvest_j}")
    return float(rng.uniform(0.0, max_harvest_j))


def sample_harvest_vec(rng: np.random.Generator, max_harvest_j: float, n: int) -> np.ndarray:
    """Independent harvest draws for ``n`` L-UAVs, identical distribution."""
    if max_harvest_j < 0.0:
        raise ValueError(f"max_harvest_j must be >= 0, got {max_harvest_j}")
    return rng.uniform(0.0, max_harvest_j, size=n)
