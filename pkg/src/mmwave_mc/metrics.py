"""Run metrics and sweep summaries.

A run yields one RunResult; summarize() aggregates the runs of one sweep
point into (metric, x, mean, ci95, unit) rows, the only interface downstream
tooling reads. CIs are two-sided 95% Student-t over the per-run means.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats

from .errors import SimAbort
from .traces import read_trace

SUMMARY_HEADER = ("metric", "x", "mean", "ci95", "unit")


@dataclass
class RunResult:
    run_index: int
    duration_s: float
    delivered_bytes: int = 0            # RLC/PDCP payload handed to the app
    delivered_sdus: int = 0
    per_cc_acked_bytes: dict = field(default_factory=dict)
    per_cc_tx_tb: dict = field(default_factory=dict)
    handover_count: int = 0
    fallback_time_s: float = 0.0
    lost_sns: int = 0
    duplicate_sns: int = 0

    @property
    def s_rlc_bps(self) -> float:
        if self.duration_s <= 0:
            raise SimAbort("run duration must be positive")
        return self.delivered_bytes * 8.0 / self.duration_s

    def mac_bps(self, cc_id: int) -> float:
        return self.per_cc_acked_bytes.get(cc_id, 0) * 8.0 / self.duration_s

    @property
    def mac_total_bps(self) -> float:
        return sum(self.per_cc_acked_bytes.values()) * 8.0 / self.duration_s

    @property
    def fallback_fraction(self) -> float:
        return self.fallback_time_s / self.duration_s


def mean_ci95(values: list[float]) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        raise SimAbort("cannot summarize zero runs")
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    half = stats.t.ppf(0.975, n - 1) * math.sqrt(var / n)
    return mean, float(half)


def summarize(results: list[RunResult], x: float) -> list[tuple]:
    """Aggregate one sweep point into summary rows."""
    rows = []

    def add(metric: str, values: list[float], unit: str) -> None:
        mean, half = mean_ci95(values)
        rows.append((metric, x, mean, half, unit))

    add("s_rlc_bps", [r.s_rlc_bps for r in results], "bit/s")
    cc_ids = sorted({cc for r in results for cc in r.per_cc_acked_bytes})
    for cc in cc_ids:
        add(f"mac_cc{cc}_bps", [r.mac_bps(cc) for r in results], "bit/s")
    add("mac_total_bps", [r.mac_total_bps for r in results], "bit/s")
    add("handover_count", [float(r.handover_count) for r in results], "1")
    add("fallback_fraction", [r.fallback_fraction for r in results], "1")
    add("lost_sns", [float(r.lost_sns) for r in results], "1")
    return rows


def write_summary(rows: list[tuple], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for metric, x, mean, ci95, unit in rows:
            w.writerow((metric, f"{x:.10g}", f"{mean:.10g}", f"{ci95:.10g}", unit))
    return path


def read_summary(path: str | Path) -> list[dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SUMMARY_HEADER:
            raise SimAbort(f"{path}: not a summary file (header {header})")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(SUMMARY_HEADER):
                raise SimAbort(f"{path}:{lineno}: expected {len(SUMMARY_HEADER)} "
                               f"fields, got {len(row)}")
            try:
                out.append(dict(metric=row[0], x=float(row[1]), mean=float(row[2]),
                                ci95=float(row[3]), unit=row[4]))
            except ValueError as exc:
                raise SimAbort(f"{path}:{lineno}: {exc}")
    return out


# -- trace cross-checks -------------------------------------------------------

def delivered_bytes_from_rlc_trace(path: str | Path) -> int:
    """Sum of PDCP 'deliver' row payloads; must agree with the counters."""
    header, rows = read_trace(path)
    i_event, i_bytes = header.index("event"), header.index("bytes")
    total = 0
    for lineno, row in enumerate(rows, start=2):
        if row[i_event] == "deliver":
            try:
                total += int(row[i_bytes])
            except ValueError:
                raise SimAbort(f"{path}:{lineno}: bad bytes field {row[i_bytes]!r}")
    return total


def acked_bytes_from_mac_trace(path: str | Path, cc_id: int | None = None) -> int:
    header, rows = read_trace(path)
    i_cc, i_tb = header.index("cc_id"), header.index("tb_bytes")
    i_out = header.index("outcome")
    total = 0
    for row in rows:
        if row[i_out] == "ACK" and (cc_id is None or int(row[i_cc]) == cc_id):
            total += int(row[i_tb])
    return total
