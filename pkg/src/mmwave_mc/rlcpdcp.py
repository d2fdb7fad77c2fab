"""RLC entities (SM/UM/AM) and the split-bearer PDCP.

Sizes only: payloads are byte counts, identified by (sn, offset, length)
ranges, which is all the throughput and ordering semantics need. Segments are
tuples (sn, offset, length, is_last); each costs RLC_HEADER extra grant bytes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .ca import BufferStatusReport
from .errors import ConfigError

RLC_HEADER = 2
SM_SATURATION_BYTES = 10_000_000
REORDER_TIMEOUT_S = 0.100

MODES = ("SM", "UM", "AM")
LOSSLESS, SEAMLESS = "LOSSLESS", "SEAMLESS"


class RlcTx:
    """Transmit side of one RLC entity (one bearer on one leg of one cell)."""

    def __init__(self, mode: str, bearer_id: int, ue_id: int, leg: str):
        if mode not in MODES:
            raise ConfigError(f"unknown RLC mode {mode!r}")
        self.mode = mode
        self.bearer_id = bearer_id
        self.ue_id = ue_id
        self.leg = leg
        self.queue: deque[list] = deque()      # [sn, size, sent_bytes]
        self.retx: deque = deque()             # (sn, offset, length), AM only
        self.am_unacked: dict[int, list] = {}  # sn -> [size, acked_bytes]
        self.tx_bytes = 0                      # payload+header handed to MAC
        self.warn_unknown_feedback = 0

    def enqueue(self, sn: int, size: int) -> None:
        if size <= 0:
            raise ConfigError("PDU payload must be > 0")
        self.queue.append([sn, size, 0])

    def queued_bytes(self) -> int:
        return sum(item[1] - item[2] for item in self.queue)

    def retx_bytes(self) -> int:
        return sum(r[2] for r in self.retx)

    def bsr(self) -> BufferStatusReport:
        if self.mode == "SM":
            return BufferStatusReport(self.ue_id, self.bearer_id, SM_SATURATION_BYTES)
        return BufferStatusReport(
            self.ue_id, self.bearer_id, self.queued_bytes(), self.retx_bytes(), 0
        )

    def pull(self, grant_bytes: int) -> tuple[list, int]:
        """Dequeue up to grant_bytes (header included) as segments.

        Retransmission ranges go first (AM); SM fabricates a payload that
        fills the grant exactly.
        """
        if grant_bytes <= 0:
            raise ConfigError("grant must be > 0")
        if self.mode == "SM":
            payload = grant_bytes - RLC_HEADER
            if payload <= 0:
                return [], 0
            self.tx_bytes += grant_bytes
            return [(-1, 0, payload, True)], grant_bytes

        segments = []
        carried = 0
        room = grant_bytes
        while self.retx and room > RLC_HEADER:
            sn, off, ln = self.retx[0]
            take = min(ln, room - RLC_HEADER)
            size = self.am_unacked[sn][0]
            segments.append((sn, off, take, off + take == size))
            carried += take + RLC_HEADER
            room -= take + RLC_HEADER
            if take == ln:
                self.retx.popleft()
            else:
                self.retx[0] = (sn, off + take, ln - take)
        while self.queue and room > RLC_HEADER:
            item = self.queue[0]
            sn, size, sent = item
            take = min(size - sent, room - RLC_HEADER)
            segments.append((sn, sent, take, sent + take == size))
            carried += take + RLC_HEADER
            room -= take + RLC_HEADER
            item[2] = sent + take
            if item[2] == size:
                self.queue.popleft()
                if self.mode == "AM":
                    self.am_unacked[sn] = [size, 0]
        self.tx_bytes += carried
        return segments, carried

    # -- AM feedback ---------------------------------------------------------

    def on_ack(self, segments) -> list[int]:
        """Returns the sns of PDUs that became fully acknowledged."""
        completed: list[int] = []
        if self.mode != "AM":
            return completed
        for sn, off, ln, _last in segments:
            rec = self.am_unacked.get(sn)
            if rec is None:
                self.warn_unknown_feedback += 1
                continue
            rec[1] += ln
            if rec[1] >= rec[0]:
                del self.am_unacked[sn]
                completed.append(sn)
        return completed

    def on_drop(self, segments) -> None:
        """MAC gave up on a TB (HARQ exhaustion): AM re-queues the ranges."""
        if self.mode != "AM":
            return
        for sn, off, ln, _last in segments:
            if sn in self.am_unacked:
                self.retx.append((sn, off, ln))
            else:
                self.warn_unknown_feedback += 1

    # -- handover support ------------------------------------------------------

    def snapshot_sizes(self) -> dict[int, int]:
        sizes = {sn: size for sn, size, _ in self.queue}
        for sn, (size, _acked) in self.am_unacked.items():
            sizes[sn] = size
        return sizes


def handover_forward(rlc: RlcTx, mode: str) -> tuple[list[tuple[int, int]], list[int]]:
    """Collect PDUs to re-route at a secondary handover and clear the source.

    LOSSLESS (AM): every buffered PDU — untransmitted, transmitted-unacked and
    retx candidates — is forwarded whole. SEAMLESS (UM): only never-transmitted
    PDUs; partially-sent heads count as transmitted and are dropped (returned
    as casualties). Returns (forward list of (sn, size), casualty sns).
    """
    if mode == LOSSLESS and rlc.mode != "AM":
        raise ConfigError("LOSSLESS forwarding requires an AM leg")
    if mode == SEAMLESS and rlc.mode != "UM":
        raise ConfigError("SEAMLESS forwarding requires a UM leg")
    forward: list[tuple[int, int]] = []
    casualties: list[int] = []
    if mode == LOSSLESS:
        sizes = rlc.snapshot_sizes()
        forward = sorted(sizes.items())
    else:
        for sn, size, sent in rlc.queue:
            if sent == 0:
                forward.append((sn, size))
            else:
                casualties.append(sn)
    rlc.queue.clear()
    rlc.retx.clear()
    rlc.am_unacked.clear()
    return forward, casualties


class Reassembler:
    """Receiver-side segment reassembly.

    Coverage is tracked as merged byte intervals per SN, so overlapping
    re-deliveries (forwarded copies of partially received PDUs) are discarded
    rather than double-counted, and completion means genuine full coverage.
    """

    def __init__(self):
        self._partial: dict[int, list] = {}   # sn -> [intervals, total|None]
        self.duplicate_segments = 0

    def on_segments(self, segments) -> list[tuple[int, int]]:
        """Feed decoded segments; return completed (sn, size) PDUs in order."""
        done = []
        for sn, off, ln, last in segments:
            rec = self._partial.get(sn)
            if rec is None:
                rec = [[], None]
                self._partial[sn] = rec
            if not self._insert(rec[0], off, off + ln):
                self.duplicate_segments += 1
            if last:
                rec[1] = off + ln
            total = rec[1]
            if total is not None:
                iv = rec[0]
                if len(iv) == 1 and iv[0][0] == 0 and iv[0][1] >= total:
                    done.append((sn, total))
                    del self._partial[sn]
        return done

    @staticmethod
    def _insert(intervals: list, lo: int, hi: int) -> bool:
        """Merge [lo, hi) into the sorted disjoint interval list; False if the
        range was already fully covered."""
        orig_lo, orig_hi = lo, hi
        covered = False
        merged = []
        placed = False
        for a, b in intervals:
            if a <= orig_lo and orig_hi <= b:
                covered = True
            if b < lo:
                merged.append((a, b))
            elif hi < a:
                if not placed:
                    merged.append((lo, hi))
                    placed = True
                merged.append((a, b))
            else:
                lo, hi = min(lo, a), max(hi, b)
        if not placed:
            merged.append((lo, hi))
        merged.sort()
        intervals[:] = merged
        return not covered

    def drop_partials(self) -> list[int]:
        sns = sorted(self._partial)
        self._partial.clear()
        return sns


@dataclass
class PdcpCounters:
    delivered_sdus: int = 0
    delivered_bytes: int = 0
    duplicates: int = 0
    lost_sns: int = 0


class PdcpRx:
    """In-order delivery with a reordering timer per bearer."""

    def __init__(self, bearer_id: int, schedule, deliver_cb, loss_cb=None,
                 reorder_timeout_s: float = REORDER_TIMEOUT_S):
        self.bearer_id = bearer_id
        self.expected = 0
        self.buffer: dict[int, int] = {}
        self.counters = PdcpCounters()
        self._schedule = schedule            # schedule(delay, action, tag)
        self._deliver = deliver_cb           # deliver_cb(sn, size)
        self._loss = loss_cb                 # loss_cb(sn) on skipped SNs
        self.timeout_s = reorder_timeout_s
        self._timer_armed = False

    def receive(self, sn: int, size: int) -> None:
        c = self.counters
        if sn < self.expected or sn in self.buffer:
            c.duplicates += 1
            return
        self.buffer[sn] = size
        while self.expected in self.buffer:
            self._deliver(self.expected, self.buffer.pop(self.expected))
            self.expected += 1
            c.delivered_sdus += 1
        if self.buffer and not self._timer_armed:
            self._timer_armed = True
            self._schedule(self.timeout_s, self._on_timeout, "pdcp-reorder")

    def _on_timeout(self) -> None:
        self._timer_armed = False
        if not self.buffer:
            return
        skip_to = min(self.buffer)
        for sn in range(self.expected, skip_to):
            self.counters.lost_sns += 1
            if self._loss is not None:
                self._loss(sn)
        self.expected = skip_to
        while self.expected in self.buffer:
            self._deliver(self.expected, self.buffer.pop(self.expected))
            self.expected += 1
            self.counters.delivered_sdus += 1
        if self.buffer and not self._timer_armed:
            self._timer_armed = True
            self._schedule(self.timeout_s, self._on_timeout, "pdcp-reorder")


MMWAVE_WITH_FALLBACK = "MMWAVE_WITH_FALLBACK"
SPLIT = "SPLIT"
ROUTING_POLICIES = (MMWAVE_WITH_FALLBACK, SPLIT)


class PdcpTx:
    """Split-bearer transmit side: SN assignment and leg routing.

    Legs are registered as callables enqueue(sn, size); availability flags are
    flipped by DC control. SNs are assigned at routing time whatever the leg,
    so routing-policy changes never reorder SN assignment.
    """

    def __init__(self, bearer_id: int, routing_policy: str, split_weight: float = 0.5):
        if routing_policy not in ROUTING_POLICIES:
            raise ConfigError(f"unknown routing policy {routing_policy!r}")
        self.bearer_id = bearer_id
        self.policy = routing_policy
        self.split_weight = split_weight
        self.next_tx_sn = 0
        self.leg_enqueue: dict[str, object] = {}    # "LTE"/"MMWAVE" -> callable
        self.leg_up: dict[str, bool] = {"LTE": True, "MMWAVE": True}
        self.mmwave_in_outage = False
        self._acc = 0.0
        self.pending: deque = deque()               # both legs down

    def route(self, size: int) -> tuple[int, str | None]:
        """Assign the next SN and push to a leg; returns (sn, leg or None)."""
        sn = self.next_tx_sn
        self.next_tx_sn += 1
        leg = self._pick_leg()
        if leg is None:
            self.pending.append((sn, size))
            return sn, None
        self.leg_enqueue[leg](sn, size)
        return sn, leg

    def _pick_leg(self) -> str | None:
        mm_ok = self.leg_up["MMWAVE"] and not self.mmwave_in_outage
        lte_ok = self.leg_up["LTE"]
        if self.policy == MMWAVE_WITH_FALLBACK:
            if mm_ok:
                return "MMWAVE"
            if lte_ok:
                return "LTE"
            return None
        # SPLIT: deterministic weighted alternation
        if mm_ok and lte_ok:
            self._acc += self.split_weight
            if self._acc >= 1.0 - 1e-12:
                self._acc -= 1.0
                return "MMWAVE"
            return "LTE"
        if mm_ok:
            return "MMWAVE"
        if lte_ok:
            return "LTE"
        return None

    def flush_pending(self) -> int:
        """Re-route PDUs parked while both legs were down."""
        n = 0
        while self.pending:
            leg = self._pick_leg()
            if leg is None:
                break
            sn, size = self.pending.popleft()
            self.leg_enqueue[leg](sn, size)
            n += 1
        return n
