"""Readers for the simulator's summary.csv interface.

A summary file has the header ``metric,x,mean,ci95,unit`` and one row per
(metric, sweep value). This module extracts one metric as a plottable series
and refuses to combine files whose sweep grids disagree.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

HEADER = ("metric", "x", "mean", "ci95", "unit")


class SummaryError(Exception):
    """A summary file could not be read or does not contain what was asked."""


class GridMismatch(SummaryError):
    """Series to be drawn together have different x grids."""


@dataclass
class Series:
    label: str
    x: list[float]
    mean: list[float]
    ci95: list[float]
    unit: str
    source: Path


def _default_label(path: Path) -> str:
    # results/<variant>/summary.csv -> the variant name, not "summary"
    if path.stem == "summary" and path.parent.name:
        return path.parent.name
    return path.stem


def read_series(path: str | Path, metric: str = "s_rlc_bps",
                label: str | None = None) -> Series:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != HEADER:
                raise SummaryError(
                    f"{path}: not a summary file (header {header!r})")
            rows = [row for row in reader if row]
    except OSError as exc:
        raise SummaryError(f"{path}: {exc.strerror or exc}") from exc

    points = []
    units = set()
    seen_metrics = set()
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(HEADER):
            raise SummaryError(f"{path}:{lineno}: expected {len(HEADER)} fields")
        name, x, mean, ci95, unit = row
        seen_metrics.add(name)
        if name != metric:
            continue
        try:
            points.append((float(x), float(mean), float(ci95)))
        except ValueError as exc:
            raise SummaryError(f"{path}:{lineno}: {exc}") from exc
        units.add(unit)

    if not points:
        have = ", ".join(sorted(seen_metrics)) or "none"
        raise SummaryError(f"{path}: no rows for metric {metric!r} (has: {have})")
    points.sort()
    xs = [p[0] for p in points]
    if len(set(xs)) != len(xs):
        raise SummaryError(f"{path}: duplicate x values for metric {metric!r}")
    return Series(
        label=label if label is not None else _default_label(path),
        x=xs,
        mean=[p[1] for p in points],
        ci95=[p[2] for p in points],
        unit=units.pop() if len(units) == 1 else "",
        source=path,
    )


def check_grids(series: list[Series]) -> list[float]:
    """Return the common x grid, or raise GridMismatch naming the files."""
    if not series:
        raise SummaryError("no series to plot")
    grid = series[0].x
    bad = [s for s in series[1:] if s.x != grid]
    if bad:
        lines = [f"  {series[0].source}: x = {grid}"]
        lines += [f"  {s.source}: x = {s.x}" for s in bad]
        raise GridMismatch("input files disagree on the x grid:\n" + "\n".join(lines))
    return grid
