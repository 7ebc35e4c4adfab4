"""Config file loading/validation and run-output serialization.

Configs are YAML (JSON parses too). Every key is optional; omitted keys
fall back to the default scenario. Validation collects every violation
before failing so a bad file is fixed in one pass. Output writing is fully
deterministic: fixed column order, repr-formatted floats, sorted JSON keys.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .scenario import (
    HUavState, LUavState, SystemParams, db_to_linear, dbm_per_hz_to_w_per_hz,
)
from .sim import RunTrace


class ConfigError(Exception):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


SCALAR_KEYS = {
    "gamma0_db": -50.0,
    "noise_dbm_hz": -174.0,
    "bw_v2lu_hz": 2e6,
    "bw_lu2hu_hz": 10e6,
    "bw_v2hu_hz": 2e6,
    "slot_s": 0.2,
    "control_k": 100.0,
    "energy_quota_j": 4.0,
    "max_harvest_j": 0.5,
    "d_safe_m": 5.0,
    "h1_m": 100.0,
    "h2_m": 150.0,
    "n_slots": 100,
    "area_m": 1000.0,
    "v_min": 10,
    "v_max": 40,
    "task_mbits_min": 1.0,
    "task_mbits_max": 10.0,
    "density_min": 10.0,
    "density_max": 100.0,
    "deadline_ms_min": 50.0,
    "deadline_ms_max": 200.0,
    "speed_kmh_min": 30.0,
    "speed_kmh_max": 80.0,
    "p_v_w": 0.5,
    "n_luavs": 4,
}

LUAV_DEFAULTS = {
    "cpu_hz": 1e10,
    "kappa": 1e-27,
    "mass_kg": 4.0,
    "tx_power_w": 1.0,
    "max_speed_mps": 5.0,
}

HUAV_DEFAULTS = {
    "cpu_hz": 5e10,
    "max_speed_mps": 25.0,
}


def default_luav_positions(n: int, area_m: float) -> np.ndarray:
    """Evenly spaced ring through the four quarter-point corners.

    For n == 4 this reproduces the canonical layout (area/4, area/4),
    (3*area/4, area/4), (3*area/4, 3*area/4), (area/4, 3*area/4).
    """
    center = area_m / 2.0
    radius = area_m * math.sqrt(2.0) / 4.0
    angles = np.deg2rad(225.0) + 2.0 * math.pi * np.arange(n) / n
    ring = np.stack([
        center + radius * np.cos(angles),
        center + radius * np.sin(angles),
    ], axis=1)
    return np.round(ring, 6)


def _build_params(cfg: dict, violations: list[str]) -> SystemParams:
    vals = dict(SCALAR_KEYS)
    for key in SCALAR_KEYS:
        if key in cfg:
            vals[key] = cfg[key]
    params = SystemParams(
        gamma0=db_to_linear(float(vals["gamma0_db"])),
        noise_psd=dbm_per_hz_to_w_per_hz(float(vals["noise_dbm_hz"])),
        bw_v2lu=float(vals["bw_v2lu_hz"]),
        bw_lu2hu=float(vals["bw_lu2hu_hz"]),
        bw_v2hu=float(vals["bw_v2hu_hz"]),
        slot_s=float(vals["slot_s"]),
        control_k=float(vals["control_k"]),
        energy_quota_j=float(vals["energy_quota_j"]),
        max_harvest_j=float(vals["max_harvest_j"]),
        d_safe_m=float(vals["d_safe_m"]),
        h1_m=float(vals["h1_m"]),
        h2_m=float(vals["h2_m"]),
        n_slots=int(vals["n_slots"]),
        area_m=float(vals["area_m"]),
        v_count_range=(int(vals["v_min"]), int(vals["v_max"])),
        task_bits_range=(float(vals["task_mbits_min"]) * 1e6,
                         float(vals["task_mbits_max"]) * 1e6),
        density_range=(float(vals["density_min"]), float(vals["density_max"])),
        deadline_range=(float(vals["deadline_ms_min"]) / 1e3,
                        float(vals["deadline_ms_max"]) / 1e3),
        speed_range=(float(vals["speed_kmh_min"]) / 3.6,
                     float(vals["speed_kmh_max"]) / 3.6),
        p_v_w=float(vals["p_v_w"]),
    )
    violations.extend(params.validate())
    return params


def _build_fleet(cfg: dict, params: SystemParams,
                 violations: list[str]) -> tuple[list[LUavState], HUavState]:
    n_luavs = int(cfg.get("n_luavs", SCALAR_KEYS["n_luavs"]))
    blocks = cfg.get("luavs")
    if blocks is None:
        positions = default_luav_positions(n_luavs, params.area_m)
        blocks = [{"x_m": float(x), "y_m": float(y)} for x, y in positions]
    if not blocks:
        violations.append("need at least one L-UAV")
        blocks = [{"x_m": params.area_m / 2, "y_m": params.area_m / 2}]

    luavs = []
    for i, block in enumerate(blocks):
        merged = {**LUAV_DEFAULTS, **block}
        luav = LUavState(
            id=i,
            x=float(merged.get("x_m", params.area_m / 2)),
            y=float(merged.get("y_m", params.area_m / 2)),
            cpu_hz=float(merged["cpu_hz"]),
            kappa=float(merged["kappa"]),
            mass_kg=float(merged["mass_kg"]),
            tx_power_w=float(merged["tx_power_w"]),
            max_speed_mps=float(merged["max_speed_mps"]),
        )
        for name in ("cpu_hz", "kappa", "mass_kg", "tx_power_w", "max_speed_mps"):
            if getattr(luav, name) <= 0.0:
                violations.append(f"luavs[{i}].{name} must be > 0")
        if not (0.0 <= luav.x <= params.area_m and 0.0 <= luav.y <= params.area_m):
            violations.append(f"luavs[{i}] position outside the area")
        luavs.append(luav)

    for i in range(len(luavs)):
        for j in range(i + 1, len(luavs)):
            gap = math.hypot(luavs[i].x - luavs[j].x, luavs[i].y - luavs[j].y)
            if gap < params.d_safe_m:
                violations.append(
                    f"luavs[{i}] and luavs[{j}] closer than d_safe_m ({gap:.1f} m)"
                )

    hblock = {**HUAV_DEFAULTS, **(cfg.get("huav") or {})}
    huav = HUavState(
        x=float(hblock.get("x_m", params.area_m / 2)),
        y=float(hblock.get("y_m", params.area_m / 2)),
        cpu_hz=float(hblock["cpu_hz"]),
        max_speed_mps=float(hblock["max_speed_mps"]),
    )
    if huav.cpu_hz <= 0.0:
        violations.append("huav.cpu_hz must be > 0")
    if huav.max_speed_mps <= 0.0:
        violations.append("huav.max_speed_mps must be > 0")
    return luavs, huav


def load_config(path: str | None = None) -> tuple[SystemParams, list[LUavState], HUavState]:
    """Load and validate a scenario; ``None`` or an empty file means defaults."""
    cfg: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError([f"config root must be a mapping, got {type(loaded).__name__}"])
        cfg = loaded

    known = set(SCALAR_KEYS) | {"luavs", "huav"}
    violations = [f"unknown key {key!r}" for key in cfg if key not in known]
    params = _build_params(cfg, violations)
    luavs, huav = _build_fleet(cfg, params, violations)
    if violations:
        raise ConfigError(violations)
    return params, luavs, huav


def params_echo(params: SystemParams, luavs: list[LUavState], huav: HUavState) -> dict:
    """Effective configuration as plain data, for provenance in summaries."""
    return {
        "gamma0": params.gamma0,
        "noise_psd_w_hz": params.noise_psd,
        "bw_v2lu_hz": params.bw_v2lu,
        "bw_lu2hu_hz": params.bw_lu2hu,
        "bw_v2hu_hz": params.bw_v2hu,
        "slot_s": params.slot_s,
        "control_k": params.control_k,
        "energy_quota_j": params.energy_quota_j,
        "max_harvest_j": params.max_harvest_j,
        "d_safe_m": params.d_safe_m,
        "h1_m": params.h1_m,
        "h2_m": params.h2_m,
        "n_slots": params.n_slots,
        "area_m": params.area_m,
        "v_count_range": list(params.v_count_range),
        "task_bits_range": list(params.task_bits_range),
        "density_range": list(params.density_range),
        "deadline_range_s": list(params.deadline_range),
        "speed_range_mps": list(params.speed_range),
        "p_v_w": params.p_v_w,
        "luavs": [
            {
                "x_m": u.x, "y_m": u.y, "cpu_hz": u.cpu_hz, "kappa": u.kappa,
                "mass_kg": u.mass_kg, "tx_power_w": u.tx_power_w,
                "max_speed_mps": u.max_speed_mps,
            }
            for u in luavs
        ],
        "huav": {
            "x_m": huav.x, "y_m": huav.y, "cpu_hz": huav.cpu_hz,
            "max_speed_mps": huav.max_speed_mps,
        },
    }


def _metric_header(n_uavs: int) -> list[str]:
    cols = ["run_id", "seed", "policy", "slot", "total_delay_s", "mean_task_delay_s"]
    for u in range(n_uavs):
        cols += [f"q_{u}_j", f"e_comp_{u}_j", f"e_relay_{u}_j",
                 f"e_flight_{u}_j", f"harvest_{u}_j"]
    cols += ["dedr", "deadline_violations"]
    return cols


def write_outputs(
    traces: dict[str, RunTrace],
    out_dir: str,
    params: SystemParams,
    luavs: list[LUavState],
    huav: HUavState,
) -> dict[str, str]:
    """Write metrics.csv, trajectories.csv, and summary.json for a batch.

    ``traces`` maps run_id -> trace; rows appear in run_id iteration order.
    Returns the paths written. The directory is probed for writability
    before any file is created so failures cannot leave partial output.
    """
    os.makedirs(out_dir, exist_ok=True)
    probe = os.path.join(out_dir, ".write_probe")
    try:
        with open(probe, "w") as fh:
            fh.write("ok")
    except OSError as err:
        raise OSError(f"output directory not writable: {out_dir}") from err
    finally:
        if os.path.exists(probe):
            os.remove(probe)

    n_uavs = len(luavs)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_metric_header(n_uavs))
        for run_id, trace in traces.items():
            for m in trace.slots:
                row = [run_id, trace.seed, trace.policy, m.slot,
                       repr(m.total_delay_s), repr(m.mean_task_delay_s)]
                for u in range(n_uavs):
                    row += [
                        repr(float(m.queues[u])),
                        repr(m.energies[u].e_comp),
                        repr(m.energies[u].e_relay),
                        repr(m.energies[u].e_flight),
                        repr(float(m.harvest[u])),
                    ]
                row += [repr(m.dedr), m.deadline_violations]
                writer.writerow(row)

    traj_path = os.path.join(out_dir, "trajectories.csv")
    with open(traj_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "slot", "entity_id", "x_m", "y_m"])
        for run_id, trace in traces.items():
            for m in trace.slots:
                for u in range(n_uavs):
                    writer.writerow([
                        run_id, m.slot, f"luav{u}",
                        repr(float(m.luav_positions[u][0])),
                        repr(float(m.luav_positions[u][1])),
                    ])
                writer.writerow([
                    run_id, m.slot, "huav",
                    repr(float(m.huav_position[0])),
                    repr(float(m.huav_position[1])),
                ])

    summary_path = os.path.join(out_dir, "summary.json")
    payload = {
        "config": params_echo(params, luavs, huav),
        "runs": {run_id: trace.summary for run_id, trace in traces.items()},
    }
    with open(summary_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"metrics": metrics_path, "trajectories": traj_path, "summary": summary_path}
