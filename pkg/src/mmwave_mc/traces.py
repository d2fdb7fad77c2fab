"""Per-run event traces and their CSV on-disk form.

Four streams per run: mac (transport blocks), rlc (PDU lifecycle), dc
(control events), channel (link snapshots). Formatting is explicit so that
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SimAbort

MAC_HEADER = ("time_us", "cc_id", "ue_id", "mcs", "tb_bytes", "attempt", "outcome")
RLC_HEADER = ("time_us", "leg", "cc_id", "bearer_id", "event", "sn", "bytes")
DC_HEADER = ("time_us", "ue_id", "event", "detail")
CHANNEL_HEADER = ("time_us", "cc_id", "ue_id", "pathloss_db",
                  "wideband_sinr_db", "effective_sinr_db", "blocked")

RLC_EVENTS = ("enq", "tx", "ack", "fwd", "deliver", "loss")
DC_EVENTS = ("MEAS", "HO_TRIGGER", "HO_DONE", "FALLBACK", "RECOVERY")


@dataclass
class TraceSet:
    """In-memory row buffers; rows are plain tuples in header order."""

    mac: list = field(default_factory=list)
    rlc: list = field(default_factory=list)
    dc: list = field(default_factory=list)
    channel: list = field(default_factory=list)

    def write(self, out_dir: str | Path, run_index: int) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for kind, header, rows in (("mac", MAC_HEADER, self.mac),
                                   ("rlc", RLC_HEADER, self.rlc),
                                   ("dc", DC_HEADER, self.dc),
                                   ("channel", CHANNEL_HEADER, self.channel)):
            path = out / f"run-{run_index}-{kind}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            written.append(path)
        return written


def read_trace(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Read a trace CSV; malformed rows abort with their line number."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SimAbort(f"{path}: empty trace file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SimAbort(f"{path}:{lineno}: expected {len(header)} fields, "
                               f"got {len(row)}")
            rows.append(row)
    return header, rows


def fmt_db(value: float) -> str:
    """Fixed 4-decimal dB formatting, stable across runs."""
    return f"{value:.4f}"
