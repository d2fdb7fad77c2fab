"""Shared fixtures: packaged scenario configs and the heavy sweep batches.

The sweep batches are session-scoped because several acceptance criteria read
the same runs; unit test modules never request them, so plain `pytest tests/`
stays fast when acceptance is deselected.
"""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

import pytest

from mmwave_mc.config import parse_config
from mmwave_mc.metrics import read_summary
from mmwave_mc.scenario import run_experiment
from mmwave_mc.traces import read_trace


def scenario_path(name: str) -> Path:
    return Path(str(files("mmwave_mc") / "scenarios" / f"{name}.yaml"))


def load_scenario(name: str):
    return parse_config(scenario_path(name))


def trace_dicts(path: Path) -> list[dict]:
    header, rows = read_trace(path)
    return [dict(zip(header, row)) for row in rows]


def summary_means(summary_csv: Path) -> dict[tuple[str, float], float]:
    """(metric, x) -> mean for one variant's summary file."""
    return {(r["metric"], r["x"]): r["mean"] for r in read_summary(summary_csv)}


@pytest.fixture(scope="session")
def fig5_batch(tmp_path_factory):
    """Full same-bandwidth comparison: 8 variants x 3 distances x 20 seeds."""
    cfg = load_scenario("ca-same-bandwidth")
    out = tmp_path_factory.mktemp("fig5")
    summaries = run_experiment(cfg, out)
    means = {}
    for vname, path in summaries.items():
        for (metric, x), mean in summary_means(path).items():
            means[(vname, metric, x)] = mean
    return {"cfg": cfg, "out": out, "means": means}


@pytest.fixture(scope="session")
def fig6_batch(tmp_path_factory):
    """Bandwidth-ratio sweep: R_CC in {0.5, 0.25, 0.125}, 20 seeds."""
    cfg = load_scenario("ca-diff-bandwidth")
    out = tmp_path_factory.mktemp("fig6")
    summaries = run_experiment(cfg, out)
    path = summaries["bandwidth-aware"]
    return {"cfg": cfg, "out": out, "means": summary_means(path)}


def _dc_batch(tmp_path_factory, name: str):
    cfg = load_scenario(name)
    out = tmp_path_factory.mktemp(name)
    run_experiment(cfg, out, traces=True)
    variant = cfg.variants[0].name
    x = cfg.sweep_values[0]
    run_dir = out / variant / f"{cfg.sweep_parameter}-{x:g}"
    return {"cfg": cfg, "out": out, "run_dir": run_dir, "runs": cfg.runs}


@pytest.fixture(scope="session")
def dc_lossless(tmp_path_factory):
    return _dc_batch(tmp_path_factory, "dc-handover-lossless")


@pytest.fixture(scope="session")
def dc_seamless(tmp_path_factory):
    return _dc_batch(tmp_path_factory, "dc-handover-seamless")


@pytest.fixture(scope="session")
def dc_fallback(tmp_path_factory):
    return _dc_batch(tmp_path_factory, "dc-fallback")
