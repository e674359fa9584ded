"""Chart construction: one figure per spec, values straight from the CSV.

Two kinds mirror the simulator's evaluation protocol: percent savings against
the deadline ratio L/D, and percent overhead against the cost ratio K with the
deadline regime (loose/tight) classified per row by the same threshold the
theory uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .contract import ContractError, ResultRow, is_loose, load_rows

CHART_KINDS = ("savings_vs_deadline", "overhead_vs_K")
REGIMES = ("loose", "tight", "all")


@dataclass(frozen=True, slots=True)
class FigureSpec:
    csv_path: str
    kind: str
    regime: str = "all"
    policies: tuple[str, ...] = ()  # empty: every policy present
    out_path: str = "figure.png"

    def __post_init__(self) -> None:
        if self.kind not in CHART_KINDS:
            raise ValueError(f"kind must be one of {CHART_KINDS}, got {self.kind!r}")
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")


def filter_rows(rows: list[ResultRow], spec: FigureSpec) -> list[ResultRow]:
    if spec.regime == "loose":
        rows = [r for r in rows if is_loose(r)]
    elif spec.regime == "tight":
        rows = [r for r in rows if not is_loose(r)]
    if spec.policies:
        rows = [r for r in rows if r.policy in spec.policies]
    if not rows:
        raise ContractError(f"no rows left after regime={spec.regime!r} "
                            f"policies={spec.policies!r}; refusing to draw an empty chart")
    return rows


def build_series(rows: list[ResultRow], spec: FigureSpec) -> dict[str, list[tuple[float, float]]]:
    """Per-policy (x, y) points, exactly the CSV values (mean taken only when
    several rows share one x, e.g. multiple traces)."""
    rows = filter_rows(rows, spec)
    series: dict[str, dict[float, list[float]]] = {}
    for r in rows:
        if spec.kind == "savings_vs_deadline":
            x, y = r.L / r.D, r.cost_savings_pct
        else:
            x, y = r.K, r.overhead_to_opt_pct
        series.setdefault(r.policy, {}).setdefault(x, []).append(y)
    return {
        policy: [(x, ys[0] if len(ys) == 1 else fmean(ys))
                 for x, ys in sorted(points.items())]
        for policy, points in sorted(series.items())
    }


_AXIS_LABELS = {
    "savings_vs_deadline": ("L / D", "cost savings vs on-demand (%)"),
    "overhead_vs_K": ("cost ratio K", "extra cost over hindsight optimum (%)"),
}


def make_figure(spec: FigureSpec):
    rows = load_rows(spec.csv_path)
    series = build_series(rows, spec)
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    for policy, points in series.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker="o", label=policy)
    xlabel, ylabel = _AXIS_LABELS[spec.kind]
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    title = spec.kind.replace("_", " ")
    if spec.regime != "all":
        title += f" ({spec.regime} deadlines)"
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig, series


def render(spec: FigureSpec) -> str:
    fig, _ = make_figure(spec)
    fig.savefig(spec.out_path)
    plt.close(fig)
    return spec.out_path
