"""Command-line batch driver for seeded policy runs and parameter sweeps."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import configio, sim
from .configio import ConfigError, default_luav_positions, load_config
from .scenario import HUavState, LUavState, SystemParams

SWEEP_AXES = ("none", "K", "n_luavs", "energy_quota", "max_harvest", "v_count")


@dataclass
class ExperimentSpec:
    """One batch: a config, a policy set, a seed set, an optional sweep."""

    config_path: str | None
    policies: list[str]
    seeds: list[int]
    sweep_axis: str = "none"
    sweep_values: list[float] = field(default_factory=list)
    out_dir: str = "out"
    n_slots: int | None = None

    def validate(self) -> list[str]:
        bad = []
        if not self.policies:
            bad.append("need at least one --policy")
        for p in self.policies:
            if p not in sim.POLICY_KINDS:
                bad.append(f"unknown policy {p!r} (choose from {sim.POLICY_KINDS})")
        if not self.seeds:
            bad.append("need at least one seed")
        if self.sweep_axis not in SWEEP_AXES:
            bad.append(f"unknown sweep axis {self.sweep_axis!r}")
        if self.sweep_axis != "none" and not self.sweep_values:
            bad.append("sweep axis given without sweep values")
        if any(v <= 0 for v in self.sweep_values):
            bad.append("sweep values must be positive")
        return bad


def _apply_sweep(
    axis: str, value: float, params: SystemParams,
    luavs: list[LUavState], huav: HUavState,
) -> tuple[SystemParams, list[LUavState], HUavState]:
    if axis == "K":
        return replace(params, control_k=float(value)), luavs, huav
    if axis == "energy_quota":
        return replace(params, energy_quota_j=float(value)), luavs, huav
    if axis == "max_harvest":
        return replace(params, max_harvest_j=float(value)), luavs, huav
    if axis == "v_count":
        count = max(int(value), 1)
        return replace(params, v_count_range=(count, count)), luavs, huav
    if axis == "n_luavs":
        n = max(int(value), 1)
        template = luavs[0]
        positions = default_luav_positions(n, params.area_m)
        fleet = [
            replace(template, id=i, x=float(x), y=float(y), queue_j=0.0)
            for i, (x, y) in enumerate(positions)
        ]
        return params, fleet, huav
    raise ValueError(axis)


def run_experiment(spec: ExperimentSpec) -> dict[str, sim.RunTrace]:
    """Execute every (sweep value, policy, seed) combination, in order."""
    params, luavs, huav = load_config(spec.config_path)
    if spec.n_slots is not None:
        params = replace(params, n_slots=spec.n_slots)

    sweep = [(None, None)] if spec.sweep_axis == "none" else [
        (spec.sweep_axis, v) for v in spec.sweep_values
    ]
    traces: dict[str, sim.RunTrace] = {}
    for axis, value in sweep:
        p, fleet, h = params, luavs, huav
        suffix = ""
        if axis is not None:
            p, fleet, h = _apply_sweep(axis, value, params, luavs, huav)
            suffix = f"-{axis}{value:g}"
        for kind in spec.policies:
            policy = sim.make_policy(kind, p, h, p.n_slots)
            for seed in spec.seeds:
                run_id = f"{kind}-s{seed}{suffix}"
                traces[run_id] = sim.run(seed, policy, p, fleet, h)
    return traces


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavedge",
        description="Seeded batch runs of the multi-tier UAV edge-computing simulator.",
    )
    parser.add_argument("--config", default=None, help="YAML scenario file (defaults apply)")
    parser.add_argument("--policy", action="append", default=None,
                        help=f"policy kind, repeatable (one of {', '.join(sim.POLICY_KINDS)})")
    parser.add_argument("--seed", action="append", type=int, default=None,
                        help="explicit seed, repeatable")
    parser.add_argument("--seeds", type=int, default=None,
                        help="shorthand for seeds 0..N-1")
    parser.add_argument("--slots", type=int, default=None, help="override slot count")
    parser.add_argument("--sweep", nargs="+", default=None, metavar=("AXIS", "VALUES"),
                        help=f"sweep axis then values; axes: {', '.join(SWEEP_AXES[1:])}")
    parser.add_argument("--out", default="out", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    seeds = list(args.seed) if args.seed else []
    if args.seeds is not None:
        seeds += list(range(args.seeds))
    if not seeds:
        seeds = [0]

    sweep_axis, sweep_values = "none", []
    if args.sweep:
        sweep_axis = args.sweep[0]
        try:
            sweep_values = [float(v) for v in args.sweep[1:]]
        except ValueError:
            print(json.dumps({"error": "validation",
                              "violations": ["sweep values must be numeric"]}),
                  file=sys.stderr)
            return 2

    spec = ExperimentSpec(
        config_path=args.config,
        policies=args.policy or ["LATUS"],
        seeds=seeds,
        sweep_axis=sweep_axis,
        sweep_values=sweep_values,
        out_dir=args.out,
        n_slots=args.slots,
    )
    bad = spec.validate()
    if bad:
        print(json.dumps({"error": "validation", "violations": bad}), file=sys.stderr)
        return 2

    try:
        params, luavs, huav = load_config(spec.config_path)
        if spec.n_slots is not None:
            params = replace(params, n_slots=spec.n_slots)
        traces = run_experiment(spec)
        paths = configio.write_outputs(traces, spec.out_dir, params, luavs, huav)
    except ConfigError as err:
        print(json.dumps({"error": "config", "violations": err.violations}),
              file=sys.stderr)
        return 2
    except OSError as err:
        print(json.dumps({"error": "io", "violations": [str(err)]}), file=sys.stderr)
        return 3

    for run_id, trace in traces.items():
        s = trace.summary
        print(f"{run_id}: mean task delay {s['time_avg_task_delay_s']:.4f} s, "
              f"tx energy {s['time_avg_tx_energy_j']:.4f} J, "
              f"queue max {s['queue_max']:.2f} J, "
              f"violations {s['deadline_violations']}")
    print(f"wrote {paths['metrics']}, {paths['trajectories']}, {paths['summary']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
