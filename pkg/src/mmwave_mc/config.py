"""Scenario configuration: YAML loading and validation.

Validation is collect-then-raise: every violation found is reported in one
ConfigError instead of stopping at the first, since sweep configs are edited
by hand and usually break in more than one place at a time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .ca import POLICIES
from .channel import CarrierConfig
from .errors import ConfigError
from .rlcpdcp import LOSSLESS, MODES, ROUTING_POLICIES, SEAMLESS

DEFAULT_SEED = 1
SWEEP_PARAMETERS = ("distance_m", "r_cc")
TRAFFIC_TYPES = ("full_buffer", "cbr")
SUBBAND_WIDTH_MHZ = 50.0

# mmWave numerology (subframe 100 us, 24 symbols of which 2 control)
MMWAVE_NUMEROLOGY = dict(symbols_per_subframe=24, control_symbols=2,
                         symbol_duration_us=4.16, subframe_duration_us=100.0)
# LTE numerology (subframe 1 ms, 14 symbols)
LTE_NUMEROLOGY = dict(symbols_per_subframe=14, control_symbols=2,
                      symbol_duration_us=71.4, subframe_duration_us=1000.0)


@dataclass
class VariantConfig:
    name: str
    carriers: list[CarrierConfig] = field(default_factory=list)
    ca_policy: str = "round_robin"
    blockage_enabled: bool = False
    blockage_cc_ids: tuple[int, ...] = ()   # empty = all carriers
    blockage_attenuation_db: float = 30.0


@dataclass
class ScenarioConfig:
    name: str
    duration_s: float
    seed: int
    runs: int
    sweep_parameter: str
    sweep_values: list[float]
    variants: list[VariantConfig]
    traffic: dict
    ue: dict
    channel: dict
    rlc: dict
    dc: dict | None
    script: dict
    carrier_plan: dict | None
    source_path: str = ""


def _coerce_num(container: dict, key: str):
    """YAML 1.1 reads '40.0e6' (signless exponent) as a string; accept it."""
    v = container.get(key)
    if isinstance(v, str):
        try:
            container[key] = float(v)
        except ValueError:
            pass
    return container.get(key)


def _carrier_from_dict(d: dict, cc_id: int, channel: dict, errors: list,
                       where: str) -> CarrierConfig | None:
    try:
        freq = float(d["center_freq_ghz"])
        bw = float(d["bandwidth_mhz"])
    except (KeyError, TypeError, ValueError):
        errors.append(f"{where}: carrier needs numeric center_freq_ghz and bandwidth_mhz")
        return None
    rat = str(d.get("rat", "MMWAVE")).upper()
    numerology = LTE_NUMEROLOGY if rat == "LTE" else MMWAVE_NUMEROLOGY
    if rat == "LTE":
        n_sub = 1
        coherence = None
    else:
        n_sub = int(d.get("n_subbands", max(2, round(bw / SUBBAND_WIDTH_MHZ))))
        coherence = channel.get("coherence_bandwidth_mhz")
    try:
        return CarrierConfig(
            cc_id=cc_id,
            center_freq_ghz=freq,
            bandwidth_mhz=bw,
            n_subbands=n_sub,
            is_primary=bool(d.get("primary", cc_id == 0)),
            rat=rat,
            tx_power_dbm=float(d.get("tx_power_dbm", 46.0 if rat == "LTE" else 30.0)),
            noise_figure_db=float(d.get("noise_figure_db", 5.0)),
            fading_sigma_db=float(d.get("fading_sigma_db",
                                        channel.get("fading_sigma_db", 4.0))),
            coherence_bandwidth_mhz=coherence,
            **numerology,
        )
    except ConfigError as exc:
        errors.append(f"{where}: {exc}")
        return None


def _check_spectrum(carriers: list[CarrierConfig], errors: list, where: str) -> None:
    spans = sorted((c.spectrum_edges_ghz(), c.cc_id) for c in carriers)
    for (lo_a, hi_a), id_a in spans:
        for (lo_b, hi_b), id_b in spans:
            if id_a < id_b and hi_a > lo_b + 1e-12 and hi_b > lo_a + 1e-12:
                errors.append(f"{where}: carriers {id_a} and {id_b} overlap in spectrum "
                              f"([{lo_a:.4f},{hi_a:.4f}] vs [{lo_b:.4f},{hi_b:.4f}] GHz)")


def _parse_variant(raw: dict, idx: int, channel: dict, errors: list) -> VariantConfig:
    name = str(raw.get("name", f"variant-{idx}"))
    where = f"variants[{idx}] ({name})"
    policy = str(raw.get("ca_policy", "round_robin"))
    if policy not in POLICIES:
        errors.append(f"{where}: unknown ca_policy {policy!r}, expected one of {POLICIES}")
    carriers = []
    raw_carriers = raw.get("carriers", [])
    if not isinstance(raw_carriers, list):
        errors.append(f"{where}: carriers must be a list")
        raw_carriers = []
    for cc_id, cdict in enumerate(raw_carriers):
        c = _carrier_from_dict(cdict, cc_id, channel, errors, where)
        if c is not None:
            carriers.append(c)
    if carriers:
        if sum(c.is_primary for c in carriers) != 1:
            errors.append(f"{where}: exactly one carrier must be primary")
        _check_spectrum(carriers, errors, where)
        if policy == "noop" and len(carriers) != 1:
            errors.append(f"{where}: noop policy requires exactly one carrier")
    blk = raw.get("blockage", {}) or {}
    return VariantConfig(
        name=name,
        carriers=carriers,
        ca_policy=policy,
        blockage_enabled=bool(blk.get("enabled", False)),
        blockage_cc_ids=tuple(blk.get("carriers", ())),
        blockage_attenuation_db=float(blk.get("attenuation_db", 30.0)),
    )


def parse_config(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario file; raises ConfigError listing every
    violation found."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    errors: list[str] = []
    name = str(raw.get("name", path.stem))

    duration = _coerce_num(raw, "duration_s") if "duration_s" in raw else 0
    if not isinstance(duration, (int, float)) or duration <= 0:
        errors.append(f"duration_s must be a positive number, got {duration!r}")

    if "seed" in raw:
        seed = int(raw["seed"])
    else:
        seed = DEFAULT_SEED
        warnings.warn(f"{path.name}: no seed given, defaulting to {DEFAULT_SEED}",
                      stacklevel=2)

    runs = raw.get("runs", 1)
    if not isinstance(runs, int) or runs < 1:
        errors.append(f"runs must be a positive integer, got {runs!r}")
        runs = 1

    sweep = raw.get("sweep", {}) or {}
    sweep_parameter = str(sweep.get("parameter", "distance_m"))
    sweep_values = sweep.get("values", [])
    if sweep_parameter not in SWEEP_PARAMETERS:
        errors.append(f"sweep.parameter must be one of {SWEEP_PARAMETERS}, "
                      f"got {sweep_parameter!r}")
    if not isinstance(sweep_values, list) or not sweep_values:
        errors.append("sweep.values must be a non-empty list")
        sweep_values = []
    else:
        bad = [v for v in sweep_values if not isinstance(v, (int, float)) or v <= 0]
        if bad:
            errors.append(f"sweep.values must be positive numbers, got {bad}")

    channel = raw.get("channel", {}) or {}
    traffic = raw.get("traffic", {"type": "full_buffer"}) or {}
    ttype = str(traffic.get("type", "full_buffer"))
    if ttype not in TRAFFIC_TYPES:
        errors.append(f"traffic.type must be one of {TRAFFIC_TYPES}, got {ttype!r}")
    if ttype == "cbr":
        rate = _coerce_num(traffic, "rate_bps")
        if not (isinstance(rate, (int, float)) and rate > 0):
            errors.append("cbr traffic needs positive rate_bps")
        if not (isinstance(traffic.get("sdu_bytes"), int) and traffic["sdu_bytes"] > 0):
            errors.append("cbr traffic needs positive integer sdu_bytes")

    rlc = raw.get("rlc", {"mode": "SM"}) or {}
    mode = str(rlc.get("mode", "SM"))
    if mode not in MODES:
        errors.append(f"rlc.mode must be one of {MODES}, got {mode!r}")

    carrier_plan = raw.get("carrier_plan")
    if carrier_plan is not None:
        total = carrier_plan.get("total_bandwidth_mhz")
        if not (isinstance(total, (int, float)) and total > 0):
            errors.append("carrier_plan.total_bandwidth_mhz must be positive")
        if str(carrier_plan.get("type", "r_cc")) != "r_cc":
            errors.append("carrier_plan.type must be 'r_cc'")
    if sweep_parameter == "r_cc" and carrier_plan is None:
        errors.append("sweep over r_cc requires a carrier_plan section")

    variants_raw = raw.get("variants", [])
    if not isinstance(variants_raw, list) or not variants_raw:
        errors.append("variants must be a non-empty list")
        variants_raw = []
    variants = [_parse_variant(v, i, channel, errors)
                for i, v in enumerate(variants_raw)]
    # dual-connectivity cells carry their own layout; ratio sweeps plan theirs
    if sweep_parameter != "r_cc" and raw.get("dc") is None:
        for v in variants:
            if not v.carriers:
                errors.append(f"variant {v.name!r} defines no carriers")

    dc = raw.get("dc")
    if ttype == "full_buffer" and mode != "SM":
        errors.append("full_buffer traffic requires rlc.mode SM")
    if dc is not None and mode == "SM":
        errors.append("dual connectivity needs sequence numbers: rlc.mode UM or AM")
    if dc is not None:
        fw = str(dc.get("forwarding", LOSSLESS))
        if fw not in (LOSSLESS, SEAMLESS):
            errors.append(f"dc.forwarding must be LOSSLESS or SEAMLESS, got {fw!r}")
        routing = str(dc.get("routing", "MMWAVE_WITH_FALLBACK"))
        if routing not in ROUTING_POLICIES:
            errors.append(f"dc.routing must be one of {ROUTING_POLICIES}, got {routing!r}")
        if fw == LOSSLESS and mode != "AM":
            errors.append("LOSSLESS forwarding requires rlc.mode AM")
        if fw == SEAMLESS and mode != "UM":
            errors.append("SEAMLESS forwarding requires rlc.mode UM")
        cells = dc.get("cells", [])
        if not isinstance(cells, list) or len(cells) < 1:
            errors.append("dc.cells must list at least one mmWave cell")
        if not isinstance(dc.get("lte"), dict):
            errors.append("dc.lte carrier definition is required")

    if errors:
        raise ConfigError(f"{path.name}: {len(errors)} problem(s):\n  - "
                          + "\n  - ".join(errors))

    return ScenarioConfig(
        name=name,
        duration_s=float(duration),
        seed=seed,
        runs=runs,
        sweep_parameter=sweep_parameter,
        sweep_values=[float(v) for v in sweep_values],
        variants=variants,
        traffic=traffic,
        ue=raw.get("ue", {}) or {},
        channel=channel,
        rlc=rlc,
        dc=dc,
        script=raw.get("script", {}) or {},
        carrier_plan=carrier_plan,
        source_path=str(path),
    )


def build_carrier(d: dict, cc_id: int, channel: dict) -> CarrierConfig:
    """Build one carrier from its mapping, raising on any problem."""
    errors: list[str] = []
    c = _carrier_from_dict(d, cc_id, channel, errors, "carrier")
    if errors or c is None:
        raise ConfigError("; ".join(errors) or "invalid carrier definition")
    return c


# Two 30 dBm power amplifiers drive the CA cell; a ratio-swept layout splits
# that budget in proportion to carrier bandwidth so the PSD is flat across
# the band, which is what keeps per-MHz throughput comparable between splits.
PLAN_TOTAL_TX_DBM = 30.0 + 10.0 * math.log10(2.0)


def plan_carriers(carrier_plan: dict, r_cc: float, channel: dict) -> list[CarrierConfig]:
    """Build a contiguous two-carrier layout for a bandwidth ratio sweep.

    The primary gets total/(1+r), the secondary the remaining r*total/(1+r),
    packed edge to edge from band_low_ghz upward. Transmit power splits by
    bandwidth (equal split reproduces the 30 dBm per-carrier default).
    """
    if r_cc <= 0:
        raise ConfigError("r_cc must be > 0")
    total = float(carrier_plan["total_bandwidth_mhz"])
    low = float(carrier_plan.get("band_low_ghz", 39.5))
    total_tx = float(carrier_plan.get("total_tx_power_dbm", PLAN_TOTAL_TX_DBM))
    b0 = total / (1.0 + r_cc)
    b1 = total - b0
    specs = [
        dict(center_freq_ghz=low + b0 / 2e3, bandwidth_mhz=b0, primary=True,
             tx_power_dbm=total_tx + 10.0 * math.log10(b0 / total)),
        dict(center_freq_ghz=low + (b0 + b1 / 2) / 1e3, bandwidth_mhz=b1,
             tx_power_dbm=total_tx + 10.0 * math.log10(b1 / total)),
    ]
    errors: list[str] = []
    carriers = [_carrier_from_dict(d, i, channel, errors, "carrier_plan")
                for i, d in enumerate(specs)]
    if errors or any(c is None for c in carriers):
        raise ConfigError("carrier_plan produced invalid carriers: " + "; ".join(errors))
    return carriers
