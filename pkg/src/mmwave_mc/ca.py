"""Component-carrier manager: BSR splitting policies, primary-CC control
routing and RRC-style carrier reconfiguration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .channel import CarrierConfig
from .errors import ConfigError

POLICIES = ("noop", "round_robin", "bandwidth_aware")

RECONFIGURATION_DELAY_S = 0.010


@dataclass(frozen=True)
class BufferStatusReport:
    ue_id: int
    bearer_id: int
    tx_queue_bytes: int = 0
    retx_queue_bytes: int = 0
    status_pdu_bytes: int = 0

    def __post_init__(self):
        if min(self.tx_queue_bytes, self.retx_queue_bytes, self.status_pdu_bytes) < 0:
            raise ConfigError("BSR fields must be >= 0")

    @property
    def total_bytes(self) -> int:
        return self.tx_queue_bytes + self.retx_queue_bytes + self.status_pdu_bytes


@dataclass
class CarrierSet:
    carriers: list[CarrierConfig]
    primary_cc_id: int

    def __post_init__(self):
        if not self.carriers:
            raise ConfigError("carrier set must be non-empty")
        ids = [c.cc_id for c in self.carriers]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate cc_ids {ids}")
        if self.primary_cc_id not in ids:
            raise ConfigError(f"primary cc{self.primary_cc_id} not in set {ids}")

    def by_id(self, cc_id: int) -> CarrierConfig:
        for c in self.carriers:
            if c.cc_id == cc_id:
                return c
        raise KeyError(cc_id)


def largest_remainder(total: int, weights: list[float], keys: list[int]) -> dict[int, int]:
    """Split an integer total proportionally to weights; remainders rounded to
    the largest fractional parts (ties to the lowest key). Conserves exactly."""
    wsum = sum(weights)
    exact = [total * w / wsum for w in weights]
    base = [math.floor(x) for x in exact]
    left = total - sum(base)
    order = sorted(range(len(keys)), key=lambda i: (-(exact[i] - base[i]), keys[i]))
    for i in order[:left]:
        base[i] += 1
    return {k: b for k, b in zip(keys, base)}


def _split(bsr: BufferStatusReport, weights, keys) -> dict[int, BufferStatusReport]:
    tx = largest_remainder(bsr.tx_queue_bytes, weights, keys)
    retx = largest_remainder(bsr.retx_queue_bytes, weights, keys)
    status = largest_remainder(bsr.status_pdu_bytes, weights, keys)
    return {
        k: BufferStatusReport(bsr.ue_id, bsr.bearer_id, tx[k], retx[k], status[k])
        for k in keys
    }


def split_bsr_noop(bsr: BufferStatusReport, cs: CarrierSet) -> dict[int, BufferStatusReport]:
    if len(cs.carriers) != 1:
        raise ConfigError("noop manager requires exactly one carrier")
    return {cs.carriers[0].cc_id: bsr}


def split_bsr_round_robin(bsr: BufferStatusReport, cs: CarrierSet) -> dict[int, BufferStatusReport]:
    keys = [c.cc_id for c in cs.carriers]
    return _split(bsr, [1.0] * len(keys), keys)


def split_bsr_bandwidth_aware(bsr: BufferStatusReport, cs: CarrierSet) -> dict[int, BufferStatusReport]:
    keys = [c.cc_id for c in cs.carriers]
    return _split(bsr, [c.bandwidth_mhz for c in cs.carriers], keys)


SPLITTERS = {
    "noop": split_bsr_noop,
    "round_robin": split_bsr_round_robin,
    "bandwidth_aware": split_bsr_bandwidth_aware,
}


def route_control(msg, cs: CarrierSet) -> int:
    """Every control message type rides the primary CC."""
    return cs.primary_cc_id


@dataclass
class Reconfiguration:
    effective_at: float
    new_set: CarrierSet


class CcManager:
    """Splits per-bearer BSRs across the active carrier set and tracks
    RRC reconfigurations (new set effective after a fixed delay)."""

    def __init__(self, carrier_set: CarrierSet, policy: str,
                 reconfiguration_delay_s: float = RECONFIGURATION_DELAY_S):
        if policy not in POLICIES:
            raise ConfigError(f"unknown cc_manager policy {policy!r}")
        if policy == "noop" and len(carrier_set.carriers) != 1:
            raise ConfigError("noop manager requires exactly one carrier")
        self.policy = policy
        self.carrier_set = carrier_set
        self.delay_s = reconfiguration_delay_s
        self._pending: Reconfiguration | None = None
        self.control_routes: dict[int, int] = {}   # cc_id -> count, for trace checks

    def split(self, bsr: BufferStatusReport) -> dict[int, BufferStatusReport]:
        return SPLITTERS[self.policy](bsr, self.carrier_set)

    def route_control(self, msg=None) -> int:
        cc = route_control(msg, self.carrier_set)
        self.control_routes[cc] = self.control_routes.get(cc, 0) + 1
        return cc

    def reconfigure_carriers(self, new_set: CarrierSet, at_time: float) -> Reconfiguration:
        if self._pending is not None:
            raise ConfigError("reconfiguration already pending")
        if new_set.primary_cc_id != self.carrier_set.primary_cc_id:
            raise ConfigError("primary CC cannot change mid-session")
        rc = Reconfiguration(at_time + self.delay_s, new_set)
        self._pending = rc
        return rc

    def activate_due(self, now: float) -> bool:
        """Apply a pending reconfiguration once its effective time is reached.
        Queued bytes of removed carriers re-appear at the next full-queue split."""
        rc = self._pending
        if rc is not None and now >= rc.effective_at:
            self.carrier_set = rc.new_set
            self._pending = None
            return True
        return False
