import json
import math
import os

import numpy as np
import pytest

from uavedge import cli, sim
from uavedge.configio import (
    ConfigError, default_luav_positions, load_config, write_outputs,
)


def test_empty_file_yields_full_defaults(tmp_path):
    cfg = tmp_path / "empty.yaml"
    cfg.write_text("")
    params, luavs, huav = load_config(str(cfg))
    assert params.gamma0 == pytest.approx(1e-5)
    assert params.noise_psd == pytest.approx(10 ** (-20.4))
    assert params.slot_s == 0.2
    assert params.energy_quota_j == 4.0
    assert params.max_harvest_j == 0.5
    assert params.d_safe_m == 5.0
    assert params.h1_m == 100.0 and params.h2_m == 150.0
    assert params.bw_v2lu == 2e6 and params.bw_lu2hu == 10e6
    assert params.v_count_range == (10, 40)
    assert params.task_bits_range == (1e6, 10e6)
    assert params.density_range == (10.0, 100.0)
    assert params.deadline_range == (0.05, 0.2)
    assert params.p_v_w == 0.5
    assert len(luavs) == 4
    corners = {(u.x, u.y) for u in luavs}
    assert corners == {(250.0, 250.0), (750.0, 250.0), (750.0, 750.0), (250.0, 750.0)}
    for u in luavs:
        assert u.cpu_hz == 1e10 and u.kappa == 1e-27
        assert u.mass_kg == 4.0 and u.tx_power_w == 1.0
    assert (huav.x, huav.y) == (500.0, 500.0)
    assert huav.cpu_hz == 5e10 and huav.max_speed_mps == 25.0


def test_validation_collects_all_violations(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("h2_m: 50\nv_min: 0\nslot_s: -1\nbogus_key: 3\n")
    with pytest.raises(ConfigError) as err:
        load_config(str(cfg))
    text = "; ".join(err.value.violations)
    assert "h2_m" in text
    assert "v_count_range" in text
    assert "slot_s" in text
    assert "bogus_key" in text


def test_override_single_key(tmp_path):
    cfg = tmp_path / "k.yaml"
    cfg.write_text("control_k: 100\n")
    params, _, _ = load_config(str(cfg))
    assert params.control_k == 100.0
    assert params.energy_quota_j == 4.0  # everything else untouched


def test_uav_blocks_override(tmp_path):
    cfg = tmp_path / "fleet.yaml"
    cfg.write_text(
        "luavs:\n"
        "  - {x_m: 100, y_m: 100, cpu_hz: 2.0e10}\n"
        "  - {x_m: 900, y_m: 900, max_speed_mps: 2.5}\n"
        "huav: {x_m: 400, y_m: 600, cpu_hz: 9.0e10}\n"
    )
    params, luavs, huav = load_config(str(cfg))
    assert len(luavs) == 2
    assert luavs[0].cpu_hz == 2e10 and luavs[0].mass_kg == 4.0
    assert luavs[1].max_speed_mps == 2.5
    assert (huav.x, huav.y, huav.cpu_hz) == (400.0, 600.0, 9e10)


def test_ring_layout_reproduces_corners():
    pos = default_luav_positions(4, 1000.0)
    assert np.allclose(sorted(map(tuple, pos)),
                       [(250.0, 250.0), (250.0, 750.0), (750.0, 250.0), (750.0, 750.0)])
    pos6 = default_luav_positions(6, 1000.0)
    center = np.array([500.0, 500.0])
    radii = np.linalg.norm(pos6 - center, axis=1)
    assert np.allclose(radii, radii[0])
    gaps = [np.linalg.norm(pos6[i] - pos6[j]) for i in range(6) for j in range(i + 1, 6)]
    assert min(gaps) > 5.0


@pytest.fixture(scope="module")
def tiny_traces():
    params, luavs, huav = load_config(None)
    from dataclasses import replace
    params = replace(params, n_slots=2, v_count_range=(3, 6))
    traces = {}
    for kind in ("LATUS", "DELAY_ONLY"):
        policy = sim.make_policy(kind, params, huav, 2)
        traces[f"{kind}-s0"] = sim.run(0, policy, params, luavs, huav)
    return params, luavs, huav, traces


def test_write_outputs_schema_and_rows(tmp_path, tiny_traces):
    params, luavs, huav, traces = tiny_traces
    paths = write_outputs(traces, str(tmp_path / "out"), params, luavs, huav)
    with open(paths["metrics"]) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    assert header[:6] == ["run_id", "seed", "policy", "slot",
                          "total_delay_s", "mean_task_delay_s"]
    for u in range(4):
        for col in (f"q_{u}_j", f"e_comp_{u}_j", f"e_relay_{u}_j",
                    f"e_flight_{u}_j", f"harvest_{u}_j"):
            assert col in header
    assert header[-2:] == ["dedr", "deadline_violations"]
    assert len(lines) == 1 + 2 * 2  # header + 2 runs x 2 slots

    with open(paths["trajectories"]) as fh:
        tlines = fh.read().splitlines()
    assert tlines[0] == "run_id,slot,entity_id,x_m,y_m"
    assert len(tlines) == 1 + 2 * 2 * 5  # 4 L-UAVs + 1 H-UAV per slot per run

    with open(paths["summary"]) as fh:
        summary = json.load(fh)
    assert set(summary) == {"config", "runs"}
    assert summary["config"]["control_k"] == params.control_k
    assert set(summary["runs"]) == set(traces)


def test_rerun_is_byte_identical(tmp_path, tiny_traces):
    params, luavs, huav, traces = tiny_traces
    a = write_outputs(traces, str(tmp_path / "a"), params, luavs, huav)
    b = write_outputs(traces, str(tmp_path / "b"), params, luavs, huav)
    for key in a:
        assert open(a[key], "rb").read() == open(b[key], "rb").read()


def test_summary_recomputable_from_csv(tmp_path, tiny_traces):
    params, luavs, huav, traces = tiny_traces
    paths = write_outputs(traces, str(tmp_path / "r"), params, luavs, huav)
    import csv
    per_run = {}
    with open(paths["metrics"]) as fh:
        for row in csv.DictReader(fh):
            per_run.setdefault(row["run_id"], []).append(float(row["total_delay_s"]))
    with open(paths["summary"]) as fh:
        summary = json.load(fh)
    for run_id, delays in per_run.items():
        want = summary["runs"][run_id]["time_avg_total_delay_s"]
        assert math.isclose(sum(delays) / len(delays), want, rel_tol=1e-9)


def test_cli_end_to_end(tmp_path):
    out = str(tmp_path / "cli_out")
    code = cli.main([
        "--policy", "LATUS", "--seed", "0", "--slots", "2", "--out", out,
    ])
    assert code == 0
    assert os.path.exists(os.path.join(out, "metrics.csv"))
    assert os.path.exists(os.path.join(out, "summary.json"))


def test_cli_rejects_bad_policy(tmp_path, capsys):
    code = cli.main(["--policy", "NOPE", "--seed", "0", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == "validation"


def test_cli_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("h2_m: 10\n")
    code = cli.main(["--config", str(cfg), "--seed", "0", "--out", str(tmp_path / "o")])
    assert code == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "config"
    assert any("h2_m" in v for v in payload["violations"])


def test_cli_sweep_runs_each_value(tmp_path):
    out = str(tmp_path / "sweep")
    code = cli.main([
        "--policy", "DELAY_ONLY", "--seed", "0", "--slots", "1",
        "--sweep", "K", "1", "10", "--out", out,
    ])
    assert code == 0
    with open(os.path.join(out, "summary.json")) as fh:
        runs = json.load(fh)["runs"]
    assert set(runs) == {"DELAY_ONLY-s0-K1", "DELAY_ONLY-s0-K10"}
