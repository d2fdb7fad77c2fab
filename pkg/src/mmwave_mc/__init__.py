"""Discrete-event simulator of multi-connectivity in mmWave/LTE cellular stacks.

Carrier aggregation (per-carrier channels and schedulers under a component
carrier manager) and dual connectivity (split-bearer PDCP over an LTE anchor
and a mmWave secondary, with X2 forwarding, outage fallback and fast secondary
handover). Ships scenario files for the two canonical experiments plus a
``simulate`` CLI that writes per-run CSV traces and an aggregated summary.
"""

from .engine import Engine, rng_stream
from .channel import (
    CarrierConfig,
    LinkGeometry,
    pathloss_db,
    beamforming_gain_db,
    wideband_sinr,
)
from .ca import (
    BufferStatusReport,
    CarrierSet,
    split_bsr_noop,
    split_bsr_round_robin,
    split_bsr_bandwidth_aware,
)
from .config import ScenarioConfig, parse_config
from .errors import ConfigError, SimAbort
from .scenario import build_scenario, run_experiment
from .metrics import RunResult, summarize, read_summary

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "rng_stream",
    "CarrierConfig",
    "LinkGeometry",
    "pathloss_db",
    "beamforming_gain_db",
    "wideband_sinr",
    "BufferStatusReport",
    "CarrierSet",
    "split_bsr_noop",
    "split_bsr_round_robin",
    "split_bsr_bandwidth_aware",
    "ScenarioConfig",
    "ConfigError",
    "SimAbort",
    "parse_config",
    "build_scenario",
    "run_experiment",
    "RunResult",
    "summarize",
    "read_summary",
    "__version__",
]
