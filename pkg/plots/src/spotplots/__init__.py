"""Static chart rendering for spotsched sweep results."""

from .contract import ContractError, ResultRow, critical_threshold, is_loose, load_rows
from .render import CHART_KINDS, REGIMES, FigureSpec, build_series, make_figure, render

__all__ = [
    "CHART_KINDS",
    "ContractError",
    "FigureSpec",
    "REGIMES",
    "ResultRow",
    "build_series",
    "critical_threshold",
    "is_loose",
    "load_rows",
    "make_figure",
    "render",
]
