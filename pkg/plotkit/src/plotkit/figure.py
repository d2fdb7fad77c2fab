"""Error-bar figure rendering. File output only, so the Agg backend is fine
everywhere and nothing here ever opens a window."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .summaries import Series, SummaryError, check_grids

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.35,
    "grid.linestyle": ":",
    "axes.labelsize": 11,
    "legend.fontsize": 9,
    "legend.framealpha": 0.9,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
}

MARKERS = ("o", "s", "^", "D", "v", "p", "*", "X")

# unit prefixes for axis scaling, largest first
_SI = ((1e9, "G"), (1e6, "M"), (1e3, "k"))


def _scale_for(values, unit):
    if not unit:
        return 1.0, ""
    top = max((abs(v) for v in values), default=0.0)
    for factor, prefix in _SI:
        if top >= factor:
            return factor, prefix + unit
    return 1.0, unit


def render(series: list[Series], out: str, title: str = "",
           xlabel: str = "", ylabel: str = "", dpi: int = 150) -> str:
    """Draw every series as mean +- ci95 over the shared x grid and write
    the figure to `out` (format from the suffix: .png, .svg, .pdf)."""
    check_grids(series)
    if len(series) > len(MARKERS):
        raise SummaryError(f"at most {len(MARKERS)} series per figure")

    units = {s.unit for s in series}
    unit = units.pop() if len(units) == 1 else ""
    scale, scaled_unit = _scale_for([m for s in series for m in s.mean], unit)
    if not ylabel:
        ylabel = scaled_unit

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for s, marker in zip(series, MARKERS):
            ax.errorbar([float(x) for x in s.x],
                        [m / scale for m in s.mean],
                        yerr=[c / scale for c in s.ci95],
                        marker=marker, markersize=5, capsize=3,
                        linewidth=1.4, label=s.label)
        if title:
            ax.set_title(title)
        if xlabel:
            ax.set_xlabel(xlabel)
        if ylabel:
            ax.set_ylabel(ylabel)
        ax.set_ylim(bottom=0)
        ax.legend()
        fig.tight_layout()
        fig.savefig(out, dpi=dpi)
        plt.close(fig)
    return out
