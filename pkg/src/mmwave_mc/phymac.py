"""Per-carrier MAC: link adaptation, scheduling, transport blocks and HARQ.

MCS selection uses the wideband (linear-mean) SINR; decode success is judged
at the dB-domain mean of the subbands. On a frequency-dispersive carrier the
first overshoots the second, which is exactly how a wideband-average metric
misallocates MCS on wide carriers.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .channel import CarrierConfig
from .engine import RngStream
from .errors import ConfigError

N_MCS = 29
MCS_FLOOR_DB = -5.0
MCS_STEP_DB = 1.6
SE_CAP = 7.4

THRESHOLDS_DB = [MCS_FLOOR_DB + MCS_STEP_DB * i for i in range(N_MCS)]
SPECTRAL_EFF = [
    min(0.75 * math.log2(1.0 + 10.0 ** (t / 10.0)), SE_CAP) for t in THRESHOLDS_DB
]

# logistic BLER: 0.1 at the MCS threshold, one decade per dB
_BLER_A = math.log(11.0)
_BLER_B = math.log(9.0)

HARQ_MAX_ATTEMPTS = 3
HARQ_FEEDBACK_DELAY_SF = 2
N_HARQ_PROCESSES = 8


def select_mcs(wideband_sinr_db: float) -> tuple[int, bool]:
    """Highest MCS whose threshold is <= SINR; (0, True) below the floor."""
    if not math.isfinite(wideband_sinr_db):
        raise ConfigError("select_mcs: SINR must be finite")
    if wideband_sinr_db < MCS_FLOOR_DB:
        return 0, True
    idx = int((wideband_sinr_db - MCS_FLOOR_DB) / MCS_STEP_DB)
    return min(idx, N_MCS - 1), False


def tb_size_bytes(mcs: int, n_symbols: int, carrier: CarrierConfig) -> int:
    if n_symbols < 1:
        raise ConfigError("tb_size_bytes: n_symbols must be >= 1")
    se = SPECTRAL_EFF[mcs]
    return math.floor(
        se * carrier.bandwidth_hz * n_symbols * carrier.symbol_duration_us * 1e-6 / 8.0
    )


def bler(sinr_db: float, mcs: int) -> float:
    x = _BLER_A * (sinr_db - THRESHOLDS_DB[mcs]) + _BLER_B
    if x > 60.0:
        return 0.0
    if x < -60.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(x))


@dataclass
class Dci:
    """One scheduling grant."""

    cc_id: int
    ue_id: int
    bearer_id: int
    n_symbols: int
    mcs: int
    tb_size_bytes: int
    is_retx: bool = False
    harq_pid: int = -1


def transport_outcome(dci: Dci, sinr_db: float, rng: RngStream) -> str:
    """ACK/NACK for one transport block at the given effective SINR."""
    return "NACK" if rng.random() < bler(sinr_db, dci.mcs) else "ACK"


@dataclass
class HarqProcess:
    harq_pid: int
    ue_id: int = -1
    attempts: int = 0
    max_attempts: int = HARQ_MAX_ATTEMPTS
    pending_tb: int = 0          # carried bytes awaiting ACK
    mcs: int = 0
    n_symbols: int = 0
    segments: tuple = ()
    port: object = None
    gen: int = 0                 # guards stale feedback after abort/reuse
    delivered: bool = False      # last attempt decoded at the receiver


class MacCounters:
    __slots__ = ("tx_tb", "acked_tb", "nacked_tb", "dropped_tb", "acked_bytes")

    def __init__(self) -> None:
        self.tx_tb = 0
        self.acked_tb = 0
        self.nacked_tb = 0
        self.dropped_tb = 0
        self.acked_bytes = 0


class CarrierMac:
    """Scheduler + HARQ of one carrier at one cell.

    Ports are the RLC attachment points; each must provide
    ``pull(grant_bytes) -> (segments, carried_bytes)``, ``deliver(segments)``,
    ``on_ack(segments)`` and ``on_drop(segments)``.
    """

    def __init__(self, carrier: CarrierConfig, rng: RngStream, trace=None):
        self.carrier = carrier
        self.rng = rng
        self.trace = trace               # list to append mac rows to, or None
        self.counters = MacCounters()
        # cached link adaptation, refreshed on channel updates
        self.mcs = 0
        self.zero_rate = True
        self.bler = 1.0
        self.effective_db = float("-inf")
        self.bytes_per_symbol = 1
        self.full_tb = 0
        # HARQ
        self._procs = [HarqProcess(pid) for pid in range(N_HARQ_PROCESSES)]
        self._free = list(range(N_HARQ_PROCESSES - 1, -1, -1))
        self._feedback: deque = deque()  # (due_sf, pid, ack)
        self._retx: deque = deque()      # pids ready to retransmit
        self._rr = 0
        # block-buffered uniforms for outcome draws
        self._u = rng.random_block(256)
        self._ui = 0

    # -- link adaptation ---------------------------------------------------

    def on_channel_update(self, wideband_db: float, effective_db: float) -> None:
        self.mcs, self.zero_rate = select_mcs(wideband_db)
        self.effective_db = effective_db
        self.bler = bler(effective_db, self.mcs)
        if self.zero_rate:
            self.full_tb = 0
            self.bytes_per_symbol = 1
        else:
            self.bytes_per_symbol = max(1, tb_size_bytes(self.mcs, 1, self.carrier))
            self.full_tb = tb_size_bytes(self.mcs, self.carrier.data_symbols, self.carrier)

    # -- internals ----------------------------------------------------------

    def _draw(self) -> float:
        i = self._ui
        if i == len(self._u):
            self._u = self.rng.random_block(256)
            i = 0
        self._ui = i + 1
        return self._u[i]

    def _emit(self, time_us, ue_id, tb, attempt, outcome):
        self.trace.append((time_us, self.carrier.cc_id, ue_id, self.mcs, tb, attempt, outcome))

    # -- subframe step -------------------------------------------------------

    def subframe(self, sf: int, time_us: int, ports: list) -> None:
        """One scheduling round. ports: list of (ue_id, bearer_id, port, demand_bytes)."""
        # reveal HARQ feedback due by now
        fb = self._feedback
        while fb and fb[0][0] <= sf:
            _, pid, gen, ack = fb.popleft()
            p = self._procs[pid]
            if p.attempts == 0 or p.gen != gen:   # aborted/reused meanwhile
                continue
            if ack:
                p.port.on_ack(p.segments)
                self._release(pid)
            elif p.attempts >= p.max_attempts:
                p.port.on_drop(p.segments)
                self.counters.dropped_tb += 1
                self._release(pid)
            else:
                self._retx.append(pid)

        if self.zero_rate:
            return

        symbols = self.carrier.data_symbols
        cc_id = self.carrier.cc_id
        trace = self.trace
        counters = self.counters

        # retransmissions before new data
        while self._retx and symbols > 0:
            pid = self._retx[0]
            p = self._procs[pid]
            if p.n_symbols > symbols:
                break
            self._retx.popleft()
            symbols -= p.n_symbols
            p.attempts += 1
            counters.tx_tb += 1
            ok = self._draw() >= bler(self.effective_db, p.mcs)
            p.delivered = ok
            if ok:
                p.port.deliver(p.segments)
                counters.acked_tb += 1
                counters.acked_bytes += p.pending_tb
                if trace is not None:
                    trace.append((time_us, cc_id, p.ue_id, p.mcs, p.pending_tb,
                                  p.attempts, "ACK"))
            else:
                counters.nacked_tb += 1
                if trace is not None:
                    last = p.attempts >= p.max_attempts
                    trace.append((time_us, cc_id, p.ue_id, p.mcs, p.pending_tb,
                                  p.attempts, "DROP" if last else "NACK"))
            fb.append((sf + HARQ_FEEDBACK_DELAY_SF, pid, p.gen, ok))

        if symbols <= 0:
            return

        # new data, round-robin over users with positive demand
        active = [entry for entry in ports if entry[3] > 0]
        if not active:
            return
        k = len(active)
        if k > 1:
            start = self._rr % k
            active = active[start:] + active[:start]
        self._rr += 1
        base, extra = divmod(symbols, k)
        for i, (ue_id, bearer_id, port, demand) in enumerate(active):
            share = base + (1 if i < extra else 0)
            if share <= 0 or not self._free:
                continue
            need = math.ceil(demand / self.bytes_per_symbol)
            n_sym = min(share, need)
            if n_sym <= 0:
                continue
            tb = (self.full_tb if n_sym == self.carrier.data_symbols
                  else tb_size_bytes(self.mcs, n_sym, self.carrier))
            segments, carried = port.pull(tb)
            if carried <= 0:
                continue
            pid = self._free.pop()
            p = self._procs[pid]
            p.ue_id = ue_id
            p.attempts = 1
            p.pending_tb = carried
            p.mcs = self.mcs
            p.n_symbols = n_sym
            p.segments = segments
            p.port = port
            p.gen += 1
            counters.tx_tb += 1
            ok = self._draw() >= self.bler
            p.delivered = ok
            if ok:
                port.deliver(segments)
                counters.acked_tb += 1
                counters.acked_bytes += carried
                if trace is not None:
                    self._emit(time_us, ue_id, carried, 1, "ACK")
            else:
                counters.nacked_tb += 1
                if trace is not None:
                    self._emit(time_us, ue_id, carried, 1, "NACK")
            fb.append((sf + HARQ_FEEDBACK_DELAY_SF, pid, p.gen, ok))

    def _release(self, pid: int) -> None:
        p = self._procs[pid]
        p.attempts = 0
        p.segments = ()
        p.port = None
        p.pending_tb = 0
        p.delivered = False
        self._free.append(pid)

    def abort_ue(self, ue_id: int) -> list:
        """Cancel in-flight TBs and pending retx for a UE (handover/fallback).

        Data to the departing cell stops immediately and no drop notices are
        issued. Returns the segment lists of aborted TBs whose last attempt
        had NOT decoded: those bytes will never reach the receiver from here,
        which is exactly what loss accounting at the seam needs.
        """
        self._retx = deque(pid for pid in self._retx if self._procs[pid].ue_id != ue_id)
        undelivered = []
        for pid, p in enumerate(self._procs):
            if p.attempts > 0 and p.ue_id == ue_id:
                if not p.delivered:
                    undelivered.append(p.segments)
                self._release(pid)
        return undelivered

    @property
    def outstanding(self) -> int:
        return N_HARQ_PROCESSES - len(self._free)
