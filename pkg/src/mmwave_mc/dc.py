"""Dual-connectivity control: measurements, fast secondary handover, fallback.

The controller runs at the LTE anchor. Secondary handovers never touch a core
network path: the anchor coordinates source and target over X2 (signaling
takes SIGNALING_X2_ROUND_TRIPS times the one-way latency) and buffered PDUs
are forwarded over the same link.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .rlcpdcp import LOSSLESS, SEAMLESS, RlcTx, handover_forward

EMA_ALPHA = 0.1
MEASUREMENT_PERIOD_S = 0.001
HYSTERESIS_DB = 3.0
OUTAGE_THRESHOLD_DB = -5.0        # below the lowest MCS: link carries nothing
INTERRUPTION_S = 0.005
SIGNALING_X2_ROUND_TRIPS = 4

DC_MMWAVE_ACTIVE = "MMWAVE_ACTIVE"
DC_LTE_FALLBACK = "LTE_FALLBACK"

NO_CELL = -1


@dataclass(frozen=True)
class MeasurementReport:
    time_s: float
    ue_id: int
    cell_id: int
    sinr_db: float


class X2Link:
    """FIFO point-to-point link: latency plus serialization at a fixed rate."""

    def __init__(self, latency_s: float = 0.001, rate_bps: float = 10e9):
        if latency_s < 0 or rate_bps <= 0:
            raise ConfigError("X2 link needs latency >= 0 and rate > 0")
        self.latency_s = latency_s
        self.rate_bps = rate_bps
        self.busy_until = 0.0

    def deliver_time(self, send_time_s: float, payload_bytes: int) -> float:
        start = max(send_time_s, self.busy_until)
        tx = payload_bytes * 8.0 / self.rate_bps
        self.busy_until = start + tx
        return start + self.latency_s + tx


@dataclass
class DcHooks:
    """Wiring points the controller drives; provided by the scenario."""

    abort_mac: object        # (cell_id, ue_id) -> [undelivered segment lists]
    attach: object           # (cell_id) -> None: move the mmWave leg's MAC port
    rlc_trace: object = None  # (event, leg, sn, size) -> None
    dc_trace: object = None   # (event, detail) -> None


class DcController:
    """Per-UE secondary-cell manager with EMA measurements and hysteresis."""

    def __init__(self, ue_id: int, engine, cells: list[int], serving_cell: int,
                 pdcp, mm_rlc: RlcTx, lte_rlc: RlcTx, hooks: DcHooks,
                 forwarding_mode: str = LOSSLESS,
                 x2: X2Link | None = None,
                 ema_alpha: float = EMA_ALPHA,
                 hysteresis_db: float = HYSTERESIS_DB,
                 outage_threshold_db: float = OUTAGE_THRESHOLD_DB,
                 interruption_s: float = INTERRUPTION_S,
                 auto_handover: bool = True):
        if serving_cell not in cells:
            raise ConfigError("serving cell must be one of the mmWave cells")
        if forwarding_mode not in (LOSSLESS, SEAMLESS):
            raise ConfigError(f"unknown forwarding mode {forwarding_mode!r}")
        self.ue_id = ue_id
        self.engine = engine
        self.cells = list(cells)
        self.serving = serving_cell
        self.pdcp = pdcp
        self.mm_rlc = mm_rlc
        self.lte_rlc = lte_rlc
        self.hooks = hooks
        self.forwarding_mode = forwarding_mode
        self.x2 = x2 if x2 is not None else X2Link()
        self.alpha = ema_alpha
        self.hysteresis_db = hysteresis_db
        self.outage_threshold_db = outage_threshold_db
        self.interruption_s = interruption_s
        self.auto_handover = auto_handover

        self.state = DC_MMWAVE_ACTIVE
        self.ho_in_progress = False
        self.ema: dict[int, float] = {}
        self.handover_count = 0
        self.fallback_count = 0
        self.recovery_count = 0
        self.fallback_time_s = 0.0
        self._fallback_since = None

    # -- measurements --------------------------------------------------------

    def on_measurement(self, rep: MeasurementReport) -> None:
        prev = self.ema.get(rep.cell_id)
        if prev is None:
            self.ema[rep.cell_id] = rep.sinr_db
        else:
            self.ema[rep.cell_id] = prev + self.alpha * (rep.sinr_db - prev)

    def select_secondary(self) -> int:
        """Best cell by EMA under hysteresis; NO_CELL when all are in outage."""
        if not self.ema:
            return self.serving
        best = max(self.ema, key=lambda c: (self.ema[c], -c))
        if self.ema[best] < self.outage_threshold_db:
            return NO_CELL
        if best == self.serving:
            return best
        serving_ema = self.ema.get(self.serving, float("-inf"))
        # boundary-inclusive: a gap of exactly the hysteresis switches
        if self.ema[best] >= serving_ema + self.hysteresis_db:
            return best
        return self.serving

    def evaluate(self, now: float) -> None:
        """Run the state machine once per measurement tick."""
        if self.ho_in_progress:
            return
        if self.state == DC_LTE_FALLBACK:
            recoverable = [c for c in self.cells
                           if self.ema.get(c, float("-inf"))
                           >= self.outage_threshold_db + self.hysteresis_db]
            if recoverable:
                best = max(recoverable, key=lambda c: (self.ema[c], -c))
                self._recover(best, now)
            return
        choice = self.select_secondary()
        if choice == NO_CELL:
            self._fallback(now)
        elif choice != self.serving and self.auto_handover:
            self.trigger_secondary_handover(choice, now)

    # -- secondary handover ----------------------------------------------------

    def trigger_secondary_handover(self, target_cell: int, now: float) -> None:
        if self.ho_in_progress:
            raise ConfigError("concurrent secondary handover rejected")
        if self.state != DC_MMWAVE_ACTIVE:
            raise ConfigError("handover requires an active mmWave leg")
        if target_cell == self.serving or target_cell not in self.cells:
            raise ConfigError(f"bad handover target {target_cell}")
        source = self.serving
        self._trace_dc(now, "HO_TRIGGER", f"{source}->{target_cell}")
        aborted = self.hooks.abort_mac(source, self.ue_id)
        # target already in outage: give up on mmWave instead of chasing it
        if self.ema.get(target_cell, float("-inf")) < self.outage_threshold_db:
            self._apply_abort_losses(now, aborted)
            self._fallback(now)
            return
        self.ho_in_progress = True
        self.pdcp.leg_up["MMWAVE"] = False
        signal_done = now + SIGNALING_X2_ROUND_TRIPS * self.x2.latency_s

        def _forward():
            t = self.engine.now
            forward, casualties = handover_forward(self.mm_rlc, self.forwarding_mode)
            casualties = self._merge_casualties(casualties, aborted)
            for sn in casualties:
                self._trace_rlc(t, "loss", sn, 0)
            for sn, size in forward:
                arrival = self.x2.deliver_time(t, size)
                self._trace_rlc(t, "fwd", sn, size)
                self.engine.schedule(arrival - t,
                                     lambda sn=sn, size=size: self._arrive(sn, size),
                                     tag="x2-forward")

        def _attach():
            self.serving = target_cell
            self.hooks.attach(target_cell)
            self.pdcp.leg_up["MMWAVE"] = True
            self.pdcp.flush_pending()
            self.ho_in_progress = False
            self.handover_count += 1
            self._trace_dc(self.engine.now, "HO_DONE", f"serving={target_cell}")

        self.engine.schedule(signal_done - now, _forward, tag="x2-signaling")
        self.engine.schedule(self.interruption_s, _attach, tag="ho-attach")

    def _arrive(self, sn: int, size: int) -> None:
        self.mm_rlc.enqueue(sn, size)
        self._trace_rlc(self.engine.now, "enq", sn, size)

    def _merge_casualties(self, casualties: list[int], aborted) -> list[int]:
        sns = set(casualties)
        if self.forwarding_mode == SEAMLESS:
            for segments in aborted:
                for sn, _off, _ln, _last in segments:
                    sns.add(sn)
        return sorted(sns)

    def _apply_abort_losses(self, now: float, aborted) -> None:
        """Aborted in-flight TBs: AM ranges go back to retx (they retransmit
        after recovery), UM bytes are gone."""
        if self.mm_rlc.mode == "AM":
            for segments in aborted:
                for sn, off, ln, _last in segments:
                    if sn in self.mm_rlc.am_unacked:
                        self.mm_rlc.retx.append((sn, off, ln))
        else:
            for segments in aborted:
                for sn, _off, _ln, _last in segments:
                    self._trace_rlc(now, "loss", sn, 0)

    # -- outage fallback -------------------------------------------------------

    def _fallback(self, now: float) -> None:
        if self.state == DC_LTE_FALLBACK:
            return
        self.state = DC_LTE_FALLBACK
        self.fallback_count += 1
        self._fallback_since = now
        self.pdcp.mmwave_in_outage = True
        aborted = self.hooks.abort_mac(self.serving, self.ue_id)
        self._apply_abort_losses(now, aborted)
        # never-transmitted PDUs waiting on the dead leg move to LTE
        moved = self._move_untransmitted(self.mm_rlc, self.lte_rlc, now)
        self._trace_dc(now, "FALLBACK", f"moved={moved}")

    def _recover(self, cell: int, now: float) -> None:
        self.state = DC_MMWAVE_ACTIVE
        self.recovery_count += 1
        if self._fallback_since is not None:
            self.fallback_time_s += now - self._fallback_since
            self._fallback_since = None
        self.serving = cell
        self.hooks.attach(cell)   # idempotent: re-registers the mmWave port
        self.pdcp.mmwave_in_outage = False
        moved = self._drain_to(self.lte_rlc, self.mm_rlc, now)
        self.pdcp.flush_pending()
        self._trace_dc(now, "RECOVERY", f"serving={cell} moved={moved}")

    def _drain_to(self, src: RlcTx, dst: RlcTx, now: float) -> int:
        """Move every PDU still needing air time off src at recovery.

        A partly-sent head is re-enqueued whole; the receiver's byte-coverage
        reassembly discards the overlap. Without this the LTE leg would keep
        draining its head after the bearer is back on mmWave.
        """
        moved = 0
        seen = set()
        for sn, size, _sent in src.queue:
            dst.enqueue(sn, size)
            self._trace_rlc(now, "fwd", sn, size)
            seen.add(sn)
            moved += 1
        src.queue.clear()
        for sn, _off, _ln in src.retx:
            if sn in seen or sn not in src.am_unacked:
                continue
            seen.add(sn)
            dst.enqueue(sn, src.am_unacked[sn][0])
            self._trace_rlc(now, "fwd", sn, src.am_unacked[sn][0])
            moved += 1
        src.retx.clear()
        return moved

    def _move_untransmitted(self, src: RlcTx, dst: RlcTx, now: float) -> int:
        keep, moved = [], 0
        for item in src.queue:
            if item[2] == 0:
                dst.enqueue(item[0], item[1])
                self._trace_rlc(now, "fwd", item[0], item[1])
                moved += 1
            else:
                keep.append(item)
        src.queue.clear()
        src.queue.extend(keep)
        return moved

    def finish(self, now: float) -> None:
        """Close open fallback intervals at end of run."""
        if self._fallback_since is not None:
            self.fallback_time_s += now - self._fallback_since
            self._fallback_since = None

    # -- tracing ---------------------------------------------------------------

    def _trace_dc(self, now: float, event: str, detail: str) -> None:
        if self.hooks.dc_trace is not None:
            self.hooks.dc_trace(now, self.ue_id, event, detail)

    def _trace_rlc(self, now: float, event: str, sn: int, size: int) -> None:
        if self.hooks.rlc_trace is not None:
            self.hooks.rlc_trace(now, event, sn, size)
