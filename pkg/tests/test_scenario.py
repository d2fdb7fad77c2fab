import math
import subprocess
import sys

import pytest
import yaml

from conftest import load_scenario
from mmwave_mc.cli import EXIT_CONFIG, EXIT_OK, main
from mmwave_mc.config import parse_config
from mmwave_mc.engine import rng_stream
from mmwave_mc.errors import ConfigError
from mmwave_mc.metrics import read_summary
from mmwave_mc.scenario import (
    DEFAULT_BOUNDS,
    MobilityState,
    build_scenario,
    run_experiment,
    walk_step,
)


def _tiny_raw(**over):
    raw = {
        "name": "tiny",
        "duration_s": 0.01,
        "seed": 11,
        "runs": 1,
        "sweep": {"parameter": "distance_m", "values": [30.0]},
        "traffic": {"type": "full_buffer"},
        "rlc": {"mode": "SM"},
        "ue": {"placement": {"type": "fixed"}, "speed_mps": 0.0},
        "channel": {"los": True, "coherence_bandwidth_mhz": 200,
                    "antennas": {"bs": 64, "ue": 16}},
        "variants": [
            {"name": "duo", "ca_policy": "round_robin",
             "carriers": [
                 {"center_freq_ghz": 39.75, "bandwidth_mhz": 500, "primary": True},
                 {"center_freq_ghz": 40.25, "bandwidth_mhz": 500},
             ]},
        ],
    }
    raw.update(over)
    return raw


def _tiny_cfg(tmp_path, **over):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump(_tiny_raw(**over)))
    return parse_config(p)


# -- mobility -----------------------------------------------------------------

def test_walk_zero_speed_never_moves_or_draws():
    rng = rng_stream("walk", 1)
    s = MobilityState(3.0, 4.0, speed_mps=0.0)
    assert walk_step(s, 1.0, rng) is s
    assert (s.x, s.y) == (3.0, 4.0)
    assert rng.draw_count == 0


def test_walk_moves_at_speed_with_one_heading_per_epoch():
    rng = rng_stream("walk", 1)
    s = MobilityState(0.0, 0.0, speed_mps=1.0)
    walk_step(s, 0.5, rng)
    assert math.hypot(s.x, s.y) == pytest.approx(0.5)
    assert rng.draw_count == 1
    walk_step(s, 0.4, rng)                       # still inside the 1 s epoch
    assert math.hypot(s.x, s.y) == pytest.approx(0.9)
    assert rng.draw_count == 1


def test_walk_reflects_at_walls():
    rng = rng_stream("walk", 1)
    s = MobilityState(199.9, 0.0, speed_mps=1.0, heading_rad=0.0,
                      epoch_remaining_s=10.0)
    walk_step(s, 0.2, rng)
    assert s.x == pytest.approx(199.9)
    assert s.heading_rad == pytest.approx(math.pi)
    assert rng.draw_count == 0


def test_walk_stays_in_bounds():
    rng = rng_stream("walk", 99)
    s = MobilityState(0.0, 0.0, speed_mps=30.0)
    x_min, y_min, x_max, y_max = DEFAULT_BOUNDS
    for _ in range(10_000):
        walk_step(s, 0.1, rng)
        assert x_min <= s.x <= x_max
        assert y_min <= s.y <= y_max


# -- UE placement ----------------------------------------------------------------

def test_fixed_placement_puts_ue_at_sweep_distance(tmp_path):
    cfg = _tiny_cfg(tmp_path)
    sim = build_scenario(cfg, cfg.variants[0], 77.0, seed=1)
    assert (sim.mobility.x, sim.mobility.y) == (77.0, 0.0)


def test_uniform_disc_placement_is_seeded(tmp_path):
    cfg = _tiny_cfg(
        tmp_path, ue={"placement": {"type": "uniform_disc", "r_max_m": 50.0}})
    a = build_scenario(cfg, cfg.variants[0], 77.0, seed=5).mobility
    b = build_scenario(cfg, cfg.variants[0], 77.0, seed=5).mobility
    c = build_scenario(cfg, cfg.variants[0], 77.0, seed=6).mobility
    assert (a.x, a.y) == (b.x, b.y)
    assert (a.x, a.y) != (c.x, c.y)
    assert math.hypot(a.x, a.y) <= 50.0


def test_unknown_placement_rejected(tmp_path):
    cfg = _tiny_cfg(tmp_path, ue={"placement": {"type": "ring"}})
    with pytest.raises(ConfigError, match="placement"):
        build_scenario(cfg, cfg.variants[0], 77.0, seed=1)


# -- short runs ------------------------------------------------------------------

def test_ca_run_counters_match_traces(tmp_path):
    cfg = _tiny_cfg(tmp_path)
    sim = build_scenario(cfg, cfg.variants[0], 30.0, seed=11, traces_on=True)
    rr = sim.run(0.05)
    assert rr.delivered_bytes > 0
    delivered = sum(row[6] for row in sim.traces.rlc if row[4] == "deliver")
    assert delivered == rr.delivered_bytes
    acked = sum(row[4] for row in sim.traces.mac if row[6] == "ACK")
    assert acked == sum(rr.per_cc_acked_bytes.values())
    assert set(rr.per_cc_tx_tb) == {0, 1}
    assert all(n > 0 for n in rr.per_cc_tx_tb.values())
    # channel snapshots every 10 ms for each of the two carriers
    assert len(sim.traces.channel) == 2 * 5


def test_same_seed_reproduces_channel_and_throughput(tmp_path):
    cfg = _tiny_cfg(tmp_path)
    runs = []
    for seed in (11, 11, 12):
        sim = build_scenario(cfg, cfg.variants[0], 30.0, seed=seed, traces_on=True)
        rr = sim.run(0.01)
        runs.append((rr.delivered_bytes, list(sim.traces.channel)))
    assert runs[0] == runs[1]
    assert runs[0][1] != runs[2][1]


def test_scripted_dc_handover_executes():
    cfg = load_scenario("dc-handover-lossless")
    sim = build_scenario(cfg, cfg.variants[0], cfg.sweep_values[0],
                         seed=cfg.seed, traces_on=True)
    rr = sim.run(0.3)                            # covers the 0.25 s handover
    assert rr.handover_count == 1
    assert rr.lost_sns == 0
    assert rr.delivered_sdus > 0
    events = [row[2] for row in sim.traces.dc]
    assert events.count("HO_TRIGGER") == 1
    assert events.count("HO_DONE") == 1
    assert events.index("HO_TRIGGER") < events.index("HO_DONE")


def test_run_experiment_writes_summary_and_traces(tmp_path):
    cfg = _tiny_cfg(tmp_path, duration_s=0.005, runs=2,
                    sweep={"parameter": "distance_m", "values": [10.0, 20.0]})
    out = tmp_path / "results"
    summaries = run_experiment(cfg, out, traces=True)
    assert set(summaries) == {"duo"}
    rows = read_summary(summaries["duo"])
    xs = {r["x"] for r in rows if r["metric"] == "s_rlc_bps"}
    assert xs == {10.0, 20.0}
    for x in ("10", "20"):
        for k in range(2):
            for kind in ("mac", "rlc", "dc", "channel"):
                assert (out / "duo" / f"distance_m-{x}" / f"run-{k}-{kind}.csv").exists()


# -- command line -----------------------------------------------------------------

def test_cli_runs_a_scenario(tmp_path, capsys):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump(_tiny_raw(duration_s=0.005)))
    out = tmp_path / "out"
    rc = main(["--config", str(p), "--out-dir", str(out), "--quiet"])
    assert rc == EXIT_OK
    assert (out / "duo" / "summary.csv").exists()
    assert "summary.csv" in capsys.readouterr().out


def test_cli_rejects_bad_arguments(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump(_tiny_raw()))
    assert main(["--config", str(p), "--runs", "0"]) == EXIT_CONFIG
    assert main(["--config", str(p), "--duration", "-1"]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_cli_module_entry_point(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(yaml.safe_dump(_tiny_raw(duration_s=0.005)))
    proc = subprocess.run(
        [sys.executable, "-m", "mmwave_mc.cli", "--config", str(p),
         "--out-dir", str(tmp_path / "out"), "--quiet"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "duo" / "summary.csv").exists()
