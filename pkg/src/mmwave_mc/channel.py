"""Per-carrier radio channel: pathloss, shadowing, blockage, beamforming gain
and per-subband SINR.

Each component carrier owns an independent channel instance (and fading
substream). Large-scale terms — shadowing and the two-state blockage process —
belong to the (cell, ue) link and are shared by all carriers of that cell;
the per-carrier blockage map only decides whether the attenuation applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import RngStream
from .errors import ConfigError

THERMAL_NOISE_DBM_HZ = -174.0

# urban-macro style pathloss, f in GHz, d in meters
_PL_LOS = (28.0, 22.0)
_PL_NLOS = (13.54, 39.08)


@dataclass(frozen=True)
class CarrierConfig:
    """One component carrier's numerology and radio parameters."""

    cc_id: int
    center_freq_ghz: float
    bandwidth_mhz: float
    n_subbands: int = 1
    symbols_per_subframe: int = 24
    control_symbols: int = 2
    symbol_duration_us: float = 4.16
    subframe_duration_us: float = 100.0
    subframes_per_frame: int = 10
    is_primary: bool = False
    rat: str = "MMWAVE"             # MMWAVE or LTE
    tx_power_dbm: float = 30.0
    noise_figure_db: float = 5.0
    fading_sigma_db: float = 4.0
    coherence_bandwidth_mhz: float | None = None   # None: independent subbands

    def __post_init__(self):
        if self.bandwidth_mhz <= 0:
            raise ConfigError(f"cc{self.cc_id}: bandwidth must be > 0")
        if self.n_subbands < 1:
            raise ConfigError(f"cc{self.cc_id}: n_subbands must be >= 1")
        if self.rat not in ("MMWAVE", "LTE"):
            raise ConfigError(f"cc{self.cc_id}: unknown rat {self.rat!r}")
        if self.control_symbols >= self.symbols_per_subframe:
            raise ConfigError(f"cc{self.cc_id}: no data symbols left in subframe")

    @property
    def data_symbols(self) -> int:
        return self.symbols_per_subframe - self.control_symbols

    @property
    def bandwidth_hz(self) -> float:
        return self.bandwidth_mhz * 1e6

    def spectrum_edges_ghz(self) -> tuple[float, float]:
        half = self.bandwidth_mhz / 2e3
        return self.center_freq_ghz - half, self.center_freq_ghz + half


@dataclass(frozen=True)
class LinkGeometry:
    distance_2d_m: float
    bs_antenna_elements: int = 1
    ue_antenna_elements: int = 1

    def __post_init__(self):
        if self.distance_2d_m <= 0:
            raise ConfigError("distance_2d_m must be > 0")
        if self.bs_antenna_elements < 1 or self.ue_antenna_elements < 1:
            raise ConfigError("antenna element counts must be >= 1")


@dataclass(frozen=True)
class BlockageState:
    active: bool = False
    attenuation_db: float = 30.0
    enabled_for_carrier: bool = False


@dataclass
class LinkState:
    los: bool
    pathloss_db: float
    shadowing_db: float
    subband_fading_db: np.ndarray
    blockage: BlockageState
    wideband_sinr_db: float = 0.0


def pathloss_db(carrier: CarrierConfig, geom: LinkGeometry, los: bool) -> float:
    """Deterministic distance/frequency pathloss; NLOS >= LOS at any geometry."""
    f = carrier.center_freq_ghz
    d = geom.distance_2d_m
    if d <= 0:
        raise ConfigError("pathloss: distance must be > 0")
    if not 0.5 <= f <= 100.0:
        raise ConfigError(f"pathloss: frequency {f} GHz outside [0.5, 100]")
    pl_los = _PL_LOS[0] + _PL_LOS[1] * math.log10(d) + 20.0 * math.log10(f)
    if los:
        return pl_los
    pl_nlos = _PL_NLOS[0] + _PL_NLOS[1] * math.log10(d) + 20.0 * math.log10(f)
    # raw curves cross at ~7 m; clamp keeps NLOS >= LOS
    return max(pl_los, pl_nlos)


def beamforming_gain_db(geom: LinkGeometry) -> float:
    return 10.0 * math.log10(geom.bs_antenna_elements) + 10.0 * math.log10(
        geom.ue_antenna_elements
    )


def update_blockage(
    state: BlockageState,
    dt: float,
    rng: RngStream,
    mean_blocked_s: float = 0.5,
    mean_free_s: float = 1.5,
) -> BlockageState:
    """Advance the two-state blockage process by dt.

    Exactly one uniform draw is consumed per call whatever the outcome, so
    trajectories stay aligned across configurations that share the stream.
    """
    if dt <= 0:
        raise ConfigError("update_blockage: dt must be > 0")
    u = rng.random()
    if not state.enabled_for_carrier:
        return replace(state, active=False)
    mean = mean_blocked_s if state.active else mean_free_s
    if u < 1.0 - math.exp(-dt / mean):
        return replace(state, active=not state.active)
    return state


def resample_fading(carrier: CarrierConfig, rng: RngStream) -> np.ndarray:
    """Per-subband fading vector in dB, redrawn each channel-update period.

    Log-normal with carrier.fading_sigma_db; AR(1) across subbands when a
    coherence bandwidth is set (correlation exp(-spacing/coherence)), else
    independent. Always consumes n_subbands normal draws.
    """
    n = carrier.n_subbands
    z = rng.standard_normal(n)
    sigma = carrier.fading_sigma_db
    if sigma <= 0:
        return np.zeros(n)
    coh = carrier.coherence_bandwidth_mhz
    if not coh or n == 1:
        return sigma * z
    rho = math.exp(-(carrier.bandwidth_mhz / n) / coh)
    f = np.empty(n)
    f[0] = z[0]
    c = math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        f[i] = rho * f[i - 1] + c * z[i]
    return sigma * f


def subband_sinr(
    carrier: CarrierConfig,
    link: LinkState,
    tx_power_dbm: float,
    noise_figure_db: float,
    geom: LinkGeometry,
) -> np.ndarray:
    """Per-subband SINR in dB; tx power split evenly across subbands."""
    n = carrier.n_subbands
    if len(link.subband_fading_db) != n:
        raise ConfigError("fading vector length does not match n_subbands")
    tx_share = tx_power_dbm - 10.0 * math.log10(n)
    noise = (
        THERMAL_NOISE_DBM_HZ
        + 10.0 * math.log10(carrier.bandwidth_hz / n)
        + noise_figure_db
    )
    base = tx_share - link.pathloss_db - link.shadowing_db + beamforming_gain_db(geom) - noise
    if link.blockage.active:
        base -= link.blockage.attenuation_db
    return base + link.subband_fading_db


def wideband_sinr(subbands) -> float:
    """Linear-domain mean of per-subband SINRs, in dB (the MCS metric)."""
    v = np.asarray(subbands, dtype=float)
    if v.size == 0:
        raise ConfigError("wideband_sinr: empty subband vector")
    return float(10.0 * np.log10(np.mean(10.0 ** (v / 10.0))))


class LinkShared:
    """Large-scale state of one (cell, ue) link, shared across carriers:
    a static shadowing draw and the always-advancing blockage process."""

    def __init__(
        self,
        shadow_rng: RngStream,
        blockage_rng: RngStream,
        los: bool,
        shadow_sigma_los_db: float = 4.0,
        shadow_sigma_nlos_db: float = 6.0,
        mean_blocked_s: float = 0.5,
        mean_free_s: float = 1.5,
    ):
        sigma = shadow_sigma_los_db if los else shadow_sigma_nlos_db
        self.los = los
        self.shadowing_db = shadow_rng.normal(0.0, sigma) if sigma > 0 else 0.0
        self._rng = blockage_rng
        self.blocked = False
        self.mean_blocked_s = mean_blocked_s
        self.mean_free_s = mean_free_s

    def advance_blockage(self, dt: float) -> None:
        # one draw per step, state-independent consumption
        u = self._rng.random()
        mean = self.mean_blocked_s if self.blocked else self.mean_free_s
        if u < 1.0 - math.exp(-dt / mean):
            self.blocked = not self.blocked


class ChannelInstance:
    """Channel of one carrier towards one UE; owns the carrier's fading
    substream and derives per-subband and wideband SINR snapshots."""

    def __init__(
        self,
        carrier: CarrierConfig,
        shared: LinkShared,
        fading_rng: RngStream,
        blockage_enabled: bool,
        blockage_attenuation_db: float = 30.0,
    ):
        self.carrier = carrier
        self.shared = shared
        self.rng = fading_rng
        self.blockage_enabled = blockage_enabled
        self.blockage_attenuation_db = blockage_attenuation_db
        self.state: LinkState | None = None
        self.wideband_db = float("-inf")
        self.effective_db = float("-inf")   # dB-domain mean, the decode metric
        self.forced_outage = False          # script hook: drives SINR to the floor

    def update(self, geom: LinkGeometry) -> LinkState:
        carrier = self.carrier
        fading = resample_fading(carrier, self.rng)
        blk = BlockageState(
            active=self.shared.blocked and self.blockage_enabled,
            attenuation_db=self.blockage_attenuation_db,
            enabled_for_carrier=self.blockage_enabled,
        )
        state = LinkState(
            los=self.shared.los,
            pathloss_db=pathloss_db(carrier, geom, self.shared.los),
            shadowing_db=self.shared.shadowing_db,
            subband_fading_db=fading,
            blockage=blk,
        )
        sinrs = subband_sinr(carrier, state, carrier.tx_power_dbm, carrier.noise_figure_db, geom)
        if self.forced_outage:
            sinrs = sinrs - 200.0
        state.wideband_sinr_db = wideband_sinr(sinrs)
        self.wideband_db = state.wideband_sinr_db
        self.effective_db = float(np.mean(sinrs))
        self.state = state
        return state
