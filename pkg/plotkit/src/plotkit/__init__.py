from .summaries import GridMismatch, Series, SummaryError, check_grids, read_series
from .figure import render

__all__ = [
    "GridMismatch",
    "Series",
    "SummaryError",
    "check_grids",
    "read_series",
    "render",
]
