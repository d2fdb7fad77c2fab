"""Scenario assembly and the per-run simulation loop.

One Sim instance is one run: a fixed carrier layout, one UE, and a 100 us
tick that drives channel updates (every 10 ms), measurements (every 1 ms),
and per-carrier MAC scheduling. Everything slower-than-tick (X2 transfers,
reordering timers, scripted events, CBR arrivals) rides the event engine so
ordering stays explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .ca import CarrierSet, CcManager
from .channel import CarrierConfig, ChannelInstance, LinkGeometry, LinkShared
from .config import ScenarioConfig, VariantConfig, build_carrier, plan_carriers
from .dc import DcController, DcHooks, MeasurementReport, X2Link
from .engine import Engine, rng_stream
from .errors import ConfigError
from .metrics import RunResult, summarize, write_summary
from .phymac import CarrierMac
from .rlcpdcp import PdcpRx, PdcpTx, Reassembler, RlcTx
from .traces import TraceSet, fmt_db

TICK_S = 100e-6                  # mmWave subframe
CHANNEL_UPDATE_TICKS = 100       # 10 ms
MEASUREMENT_TICKS = 10           # 1 ms
LTE_TICKS = 10                   # LTE subframe = 1 ms
MIN_LINK_DISTANCE_M = 1.0        # far-field clamp
DEFAULT_BOUNDS = (-200.0, -200.0, 200.0, 200.0)


# -- mobility -----------------------------------------------------------------

@dataclass
class MobilityState:
    x: float
    y: float
    speed_mps: float = 0.0
    heading_rad: float = 0.0
    epoch_s: float = 1.0         # new random heading this often
    epoch_remaining_s: float = 0.0


def walk_step(state: MobilityState, dt: float, rng, bounds=DEFAULT_BOUNDS) -> MobilityState:
    """Advance a bounded random walk by dt; reflective walls, heading redrawn
    each epoch. A zero-speed state never moves and never draws."""
    if state.speed_mps <= 0.0 or dt <= 0.0:
        return state
    x_min, y_min, x_max, y_max = bounds
    remaining = dt
    while remaining > 1e-12:
        if state.epoch_remaining_s <= 1e-12:
            state.heading_rad = rng.uniform(0.0, 2.0 * math.pi)
            state.epoch_remaining_s = state.epoch_s
        step = min(remaining, state.epoch_remaining_s)
        state.x += state.speed_mps * step * math.cos(state.heading_rad)
        state.y += state.speed_mps * step * math.sin(state.heading_rad)
        if state.x < x_min or state.x > x_max:
            state.x = min(max(2.0 * x_min - state.x if state.x < x_min
                              else 2.0 * x_max - state.x, x_min), x_max)
            state.heading_rad = math.pi - state.heading_rad
        if state.y < y_min or state.y > y_max:
            state.y = min(max(2.0 * y_min - state.y if state.y < y_min
                              else 2.0 * y_max - state.y, y_min), y_max)
            state.heading_rad = -state.heading_rad
        state.epoch_remaining_s -= step
        remaining -= step
    return state


# -- MAC attachment point ------------------------------------------------------

class RlcPort:
    """Adapter between one CarrierMac and the UE's RLC/PDCP machinery."""

    __slots__ = ("rlc", "reassembler", "sink", "cc_id", "leg", "trace")

    def __init__(self, rlc: RlcTx, reassembler: Reassembler, sink,
                 cc_id: int, leg: str, trace=None):
        self.rlc = rlc
        self.reassembler = reassembler
        self.sink = sink              # sink(sn, size) for completed PDUs
        self.cc_id = cc_id
        self.leg = leg
        self.trace = trace            # trace(leg, cc_id, event, sn, bytes)

    def pull(self, grant_bytes: int):
        segments, carried = self.rlc.pull(grant_bytes)
        if self.trace is not None and segments:
            for sn, _off, ln, _last in segments:
                self.trace(self.leg, self.cc_id, "tx", sn, ln)
        return segments, carried

    def deliver(self, segments) -> None:
        for sn, size in self.reassembler.on_segments(segments):
            self.sink(sn, size)

    def on_ack(self, segments) -> None:
        acked = self.rlc.on_ack(segments)
        if self.trace is not None:
            for sn in acked:
                self.trace(self.leg, self.cc_id, "ack", sn, 0)

    def on_drop(self, segments) -> None:
        self.rlc.on_drop(segments)


@dataclass
class CellNode:
    cell_id: int
    x: float
    y: float
    rat: str
    carriers: list[CarrierConfig]
    shared: LinkShared
    channels: dict[int, ChannelInstance] = field(default_factory=dict)
    macs: dict[int, CarrierMac] = field(default_factory=dict)
    ports: dict[int, RlcPort] = field(default_factory=dict)
    attached: bool = True


@dataclass
class _Acc:
    delivered_bytes: int = 0
    delivered_sdus: int = 0


class Sim:
    """One configured run; build with build_scenario(), then call run()."""

    def __init__(self, cfg: ScenarioConfig, variant: VariantConfig,
                 x_value: float, seed: int, traces_on: bool):
        self.cfg = cfg
        self.variant = variant
        self.x_value = x_value
        self.seed = seed
        self.engine = Engine()
        self.traces = TraceSet() if traces_on else None
        self.acc = _Acc()
        self.cells: list[CellNode] = []      # mmWave cells
        self.lte: CellNode | None = None
        self.controller: DcController | None = None
        self.ccm: CcManager | None = None
        self.pdcp_rx: PdcpRx | None = None
        self.delivered_log: list[int] = []
        self.bounds = tuple(cfg.ue.get("bounds", DEFAULT_BOUNDS))
        self._antennas = (int(cfg.channel.get("antennas", {}).get("bs", 64)),
                          int(cfg.channel.get("antennas", {}).get("ue", 16)))
        self._k = 0
        self._n_ticks = 0
        self._next_sn = 0
        if cfg.dc is None:
            self._build_ca()
        else:
            self._build_dc()
        self._mobility_rng = self._stream("mobility/ue0")
        self._setup_traffic()
        self._setup_script()

    # -- shared helpers ------------------------------------------------------

    def _stream(self, label: str):
        return rng_stream(label, self.seed)

    def _now_us(self) -> int:
        return int(round(self.engine.now * 1e6))

    def _rlc_row(self, leg: str, cc_id: int, event: str, sn: int, nbytes: int) -> None:
        if self.traces is not None:
            self.traces.rlc.append((self._now_us(), leg, cc_id, 0, event, sn, nbytes))

    def _dc_row(self, _now: float, ue_id: int, event: str, detail: str) -> None:
        if self.traces is not None:
            self.traces.dc.append((self._now_us(), ue_id, event, detail))

    def _place_ue(self) -> MobilityState:
        ue = self.cfg.ue
        placement = ue.get("placement", {})
        ptype = placement.get("type", "fixed")
        if ptype == "fixed":
            x, y = float(self.x_value), 0.0
        elif ptype == "uniform_disc":
            r_max = float(placement.get("r_max_m", 150.0))
            rng = self._stream("placement/ue0")
            r = r_max * math.sqrt(rng.random())
            theta = rng.uniform(0.0, 2.0 * math.pi)
            x, y = r * math.cos(theta), r * math.sin(theta)
        else:
            raise ConfigError(f"unknown placement type {ptype!r}")
        return MobilityState(x=x, y=y, speed_mps=float(ue.get("speed_mps", 0.0)))

    def _geometry(self, cell: CellNode) -> LinkGeometry:
        d = math.hypot(self.mobility.x - cell.x, self.mobility.y - cell.y)
        if cell.rat == "LTE":
            bs, ue = 1, 1
        else:
            bs, ue = self._antennas
        return LinkGeometry(max(d, MIN_LINK_DISTANCE_M), bs, ue)

    def _make_cell(self, cell_id: int, x: float, y: float, rat: str,
                   carriers: list[CarrierConfig], los: bool,
                   blockage_enabled_cc=()) -> CellNode:
        shared = LinkShared(
            self._stream(f"shadow/cell{cell_id}/ue0"),
            self._stream(f"blockage/cell{cell_id}/ue0"),
            los=los,
        )
        node = CellNode(cell_id, x, y, rat, carriers, shared)
        mac_trace = self.traces.mac if self.traces is not None else None
        for c in carriers:
            node.channels[c.cc_id] = ChannelInstance(
                c, shared,
                self._stream(f"fading/cell{cell_id}/cc{c.cc_id}/ue0"),
                blockage_enabled=c.cc_id in blockage_enabled_cc,
                blockage_attenuation_db=self.variant.blockage_attenuation_db,
            )
            node.macs[c.cc_id] = CarrierMac(
                c, self._stream(f"mac/cell{cell_id}/cc{c.cc_id}/ue0"),
                trace=mac_trace,
            )
        return node

    # -- carrier-aggregation build --------------------------------------------

    def _build_ca(self) -> None:
        cfg, variant = self.cfg, self.variant
        if cfg.sweep_parameter == "r_cc":
            carriers = plan_carriers(cfg.carrier_plan, self.x_value, cfg.channel)
        else:
            carriers = variant.carriers
        self.mobility = self._place_ue()
        los = bool(cfg.channel.get("los", False))
        if variant.blockage_enabled:
            blocked_ccs = (set(variant.blockage_cc_ids) if variant.blockage_cc_ids
                           else {c.cc_id for c in carriers})
        else:
            blocked_ccs = set()
        cell = self._make_cell(0, 0.0, 0.0, "MMWAVE", carriers, los, blocked_ccs)
        self.cells = [cell]

        mode = cfg.rlc.get("mode", "SM")
        self.rlc = RlcTx(mode, 0, 0, "MMWAVE")
        reassembler = Reassembler()

        def sink(sn, size):
            self.acc.delivered_bytes += size
            self.acc.delivered_sdus += 1
            self._rlc_row("MMWAVE", -1, "deliver", sn, size)

        for c in carriers:
            cell.ports[c.cc_id] = RlcPort(
                self.rlc, reassembler, sink, c.cc_id, "MMWAVE",
                trace=self._rlc_row if self.traces is not None else None,
            )
        primary = next(c.cc_id for c in carriers if c.is_primary)
        self.ccm = CcManager(CarrierSet(tuple(carriers), primary), variant.ca_policy)

    # -- dual-connectivity build ------------------------------------------------

    def _build_dc(self) -> None:
        cfg = self.cfg
        dc = cfg.dc
        self.mobility = self._place_ue()
        mode = cfg.rlc.get("mode", "UM")
        self.mm_rlc = RlcTx(mode, 0, 0, "MMWAVE")
        self.lte_rlc = RlcTx(mode, 0, 0, "LTE")

        # mmWave cells, one carrier each unless configured otherwise
        next_cc = 0
        los = bool(cfg.channel.get("los", True))
        for raw in dc["cells"]:
            cell_id = int(raw["cell_id"])
            px, py = (float(v) for v in raw.get("position", (0.0, 0.0)))
            if "carriers" not in raw and "carrier" not in raw:
                raise ConfigError(f"dc cell {cell_id} defines no carrier")
            raw_carriers = raw.get("carriers") or [raw["carrier"]]
            carriers = []
            for cdict in raw_carriers:
                c = build_carrier(cdict, next_cc, cfg.channel)
                carriers.append(c)
                next_cc += 1
            self.cells.append(self._make_cell(cell_id, px, py, "MMWAVE",
                                              carriers, los))
        lte_raw = dc["lte"]
        lx, ly = (float(v) for v in lte_raw.get("position", (0.0, 0.0)))
        lte_carrier = build_carrier(dict(lte_raw["carrier"], rat="LTE"),
                                    next_cc, cfg.channel)
        self.lte = self._make_cell(int(lte_raw.get("cell_id", 0)), lx, ly,
                                   "LTE", [lte_carrier], los=True)

        # split bearer
        self.pdcp = PdcpTx(0, dc.get("routing", "MMWAVE_WITH_FALLBACK"),
                           float(dc.get("split_weight", 0.5)))

        def enqueue_mm(sn, size):
            self.mm_rlc.enqueue(sn, size)
            self._rlc_row("MMWAVE", -1, "enq", sn, size)

        def enqueue_lte(sn, size):
            self.lte_rlc.enqueue(sn, size)
            self._rlc_row("LTE", -1, "enq", sn, size)

        self.pdcp.leg_enqueue = {"MMWAVE": enqueue_mm, "LTE": enqueue_lte}

        def deliver(sn, size):
            self.acc.delivered_bytes += size
            self.acc.delivered_sdus += 1
            self.delivered_log.append(sn)
            self._rlc_row("PDCP", -1, "deliver", sn, size)

        self.pdcp_rx = PdcpRx(
            0,
            lambda delay, action, tag="pdcp-reorder": self.engine.schedule(delay, action, tag),
            deliver,
            loss_cb=lambda sn: self._rlc_row("PDCP", -1, "loss", sn, 0),
            reorder_timeout_s=float(dc.get("reorder_timeout_s", 0.100)),
        )
        mm_reasm, lte_reasm = Reassembler(), Reassembler()
        rx = self.pdcp_rx.receive

        def pdcp_sink(sn, size):
            rx(sn, size)

        trace_cb = self._rlc_row if self.traces is not None else None
        for cell in self.cells:
            for c in cell.carriers:
                cell.ports[c.cc_id] = RlcPort(self.mm_rlc, mm_reasm, pdcp_sink,
                                              c.cc_id, "MMWAVE", trace=trace_cb)
        self.lte.ports[lte_carrier.cc_id] = RlcPort(
            self.lte_rlc, lte_reasm, pdcp_sink, lte_carrier.cc_id, "LTE",
            trace=trace_cb)

        # controller wiring
        cells_by_id = {c.cell_id: c for c in self.cells}

        def abort_mac(cell_id, ue_id):
            cell = cells_by_id[cell_id]
            undelivered = []
            for mac in cell.macs.values():
                undelivered.extend(mac.abort_ue(ue_id))
            cell.attached = False
            return undelivered

        def attach(cell_id):
            for c in self.cells:
                c.attached = c.cell_id == cell_id

        x2cfg = dc.get("x2", {}) or {}
        serving = int(dc.get("serving_cell", self.cells[0].cell_id))
        attach(serving)
        self.controller = DcController(
            0, self.engine, [c.cell_id for c in self.cells], serving,
            self.pdcp, self.mm_rlc, self.lte_rlc,
            DcHooks(abort_mac=abort_mac, attach=attach,
                    rlc_trace=lambda _now, event, sn, size:
                        self._rlc_row("MMWAVE", -1, event, sn, size),
                    dc_trace=self._dc_row),
            forwarding_mode=dc.get("forwarding", "LOSSLESS"),
            x2=X2Link(float(x2cfg.get("latency_s", 0.001)),
                      float(x2cfg.get("rate_bps", 10e9))),
            auto_handover=bool(dc.get("auto_handover", True)),
        )

    # -- traffic and script ------------------------------------------------------

    def _setup_traffic(self) -> None:
        traffic = self.cfg.traffic
        if traffic.get("type", "full_buffer") == "full_buffer":
            return                        # SM fabricates data on demand
        sdu = int(traffic["sdu_bytes"])
        interval = sdu * 8.0 / float(traffic["rate_bps"])

        def arrive():
            if self.controller is not None:
                self.pdcp.route(sdu)
            else:
                sn = self._next_sn
                self._next_sn += 1
                self.rlc.enqueue(sn, sdu)
                self._rlc_row("MMWAVE", -1, "enq", sn, sdu)
            self.engine.schedule(interval, arrive, "traffic")

        self.engine.schedule(interval, arrive, "traffic")

    def _setup_script(self) -> None:
        script = self.cfg.script
        for window in script.get("outage", ()):
            cells = set(window.get("cells", ()))
            start, end = float(window["start_s"]), float(window["end_s"])
            if end <= start:
                raise ConfigError("outage window must have end_s > start_s")
            self.engine.schedule(start, lambda c=cells: self._set_outage(c, True),
                                 "script-outage")
            self.engine.schedule(end, lambda c=cells: self._set_outage(c, False),
                                 "script-outage")
        for ho in script.get("handover", ()):
            t = float(ho["time_s"])
            target = int(ho["target_cell"])
            self.engine.schedule(t, lambda tc=target: self._scripted_ho(tc),
                                 "script-handover")

    def _set_outage(self, cell_ids: set, on: bool) -> None:
        for cell in self.cells:
            if cell.cell_id in cell_ids:
                for inst in cell.channels.values():
                    inst.forced_outage = on

    def _scripted_ho(self, target: int) -> None:
        ctrl = self.controller
        if ctrl is None or ctrl.ho_in_progress or ctrl.state != "MMWAVE_ACTIVE":
            return
        if target == ctrl.serving:
            return
        ctrl.trigger_secondary_handover(target, self.engine.now)

    # -- the tick loop -------------------------------------------------------------

    def _channel_update(self) -> None:
        dt = CHANNEL_UPDATE_TICKS * TICK_S
        if self.mobility.speed_mps > 0:
            walk_step(self.mobility, dt, self._mobility_rng, self.bounds)
        nodes = self.cells if self.lte is None else self.cells + [self.lte]
        for cell in nodes:
            cell.shared.advance_blockage(dt)
            geom = self._geometry(cell)
            for cc_id, inst in cell.channels.items():
                state = inst.update(geom)
                cell.macs[cc_id].on_channel_update(inst.wideband_db, inst.effective_db)
                if self.traces is not None:
                    self.traces.channel.append((
                        self._now_us(), cc_id, 0,
                        fmt_db(state.pathloss_db),
                        fmt_db(inst.wideband_db),
                        fmt_db(inst.effective_db),
                        1 if state.blockage.active else 0,
                    ))

    def _measure(self) -> None:
        ctrl = self.controller
        now = self.engine.now
        for cell in self.cells:
            # a cell's link quality is its first carrier's wideband SINR
            inst = next(iter(cell.channels.values()))
            rep = MeasurementReport(now, 0, cell.cell_id, inst.wideband_db)
            ctrl.on_measurement(rep)
            if self.traces is not None:
                self.traces.dc.append((self._now_us(), 0, "MEAS",
                                       f"cell={cell.cell_id} "
                                       f"sinr={fmt_db(inst.wideband_db)}"))
        ctrl.evaluate(now)

    def _tick(self) -> None:
        k = self._k
        if k % CHANNEL_UPDATE_TICKS == 0:
            self._channel_update()
        if self.controller is not None and k % MEASUREMENT_TICKS == 0:
            self._measure()
        t_us = self._now_us()
        if self.ccm is not None:
            # carrier aggregation: split the bearer's BSR across the set
            cell = self.cells[0]
            splits = self.ccm.split(self.rlc.bsr())
            for cc_id, share in splits.items():
                demand = share.total_bytes
                ports = ([(0, 0, cell.ports[cc_id], demand)] if demand > 0 else [])
                cell.macs[cc_id].subframe(k, t_us, ports)
        else:
            for cell in self.cells:
                demand = self.mm_rlc.bsr().total_bytes if cell.attached else 0
                for cc_id, mac in cell.macs.items():
                    ports = ([(0, 0, cell.ports[cc_id], demand)] if demand > 0 else [])
                    mac.subframe(k, t_us, ports)
            if self.lte is not None and k % LTE_TICKS == 0:
                demand = self.lte_rlc.bsr().total_bytes
                for cc_id, mac in self.lte.macs.items():
                    ports = ([(0, 0, self.lte.ports[cc_id], demand)] if demand > 0 else [])
                    mac.subframe(k // LTE_TICKS, t_us, ports)
        self._k += 1
        if self._k < self._n_ticks:
            self.engine.schedule(TICK_S, self._tick, "tick")

    def run(self, duration_s: float | None = None, run_index: int = 0) -> RunResult:
        duration = self.cfg.duration_s if duration_s is None else duration_s
        if duration <= 0:
            raise ConfigError("duration must be positive")
        self._n_ticks = int(round(duration / TICK_S))
        self.engine.schedule(0.0, self._tick, "tick")
        self.engine.run_until(duration)
        if self.controller is not None:
            self.controller.finish(duration)

        rr = RunResult(run_index=run_index, duration_s=duration)
        rr.delivered_bytes = self.acc.delivered_bytes
        rr.delivered_sdus = self.acc.delivered_sdus
        nodes = self.cells if self.lte is None else self.cells + [self.lte]
        for cell in nodes:
            for cc_id, mac in cell.macs.items():
                rr.per_cc_acked_bytes[cc_id] = (rr.per_cc_acked_bytes.get(cc_id, 0)
                                                + mac.counters.acked_bytes)
                rr.per_cc_tx_tb[cc_id] = (rr.per_cc_tx_tb.get(cc_id, 0)
                                          + mac.counters.tx_tb)
        if self.controller is not None:
            rr.handover_count = self.controller.handover_count
            rr.fallback_time_s = self.controller.fallback_time_s
        if self.pdcp_rx is not None:
            rr.lost_sns = self.pdcp_rx.counters.lost_sns
            rr.duplicate_sns = self.pdcp_rx.counters.duplicates
        return rr


def build_scenario(cfg: ScenarioConfig, variant: VariantConfig, x_value: float,
                   seed: int, traces_on: bool = False) -> Sim:
    return Sim(cfg, variant, x_value, seed, traces_on)


def _fmt_x(x: float) -> str:
    return f"{x:g}"


def run_experiment(cfg: ScenarioConfig, out_dir: str | Path,
                   master_seed: int | None = None, runs: int | None = None,
                   duration_s: float | None = None, traces: bool = False,
                   progress=None) -> dict[str, Path]:
    """Run the full sweep x variants grid and write per-variant summaries.

    Each run's RNG is derived from master_seed + run_index, so run k sees
    identical large-scale randomness in every variant: comparisons across
    variants are paired.
    """
    seed0 = cfg.seed if master_seed is None else master_seed
    n_runs = cfg.runs if runs is None else runs
    out = Path(out_dir)
    summaries: dict[str, Path] = {}
    for variant in cfg.variants:
        vdir = out / variant.name
        rows = []
        for x in cfg.sweep_values:
            results = []
            for k in range(n_runs):
                sim = build_scenario(cfg, variant, x, seed0 + k, traces)
                rr = sim.run(duration_s, run_index=k)
                if traces:
                    sim.traces.write(vdir / f"{cfg.sweep_parameter}-{_fmt_x(x)}", k)
                results.append(rr)
                if progress is not None:
                    progress(variant.name, x, k, rr)
            rows.extend(summarize(results, x))
        summaries[variant.name] = write_summary(rows, vdir / "summary.csv")
    return summaries
