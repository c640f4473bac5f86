"""Report figures rendered to files next to the delimited reports.

Uses the Agg backend so rendering works headless. Evaluation reports
become a grouped precision/recall/F1 bar chart; overlap reports become a
two- or three-circle Venn diagram with region counts (four sources fall
back to a bar chart of the exclusive regions).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle

from .evaluation import EvalReport, OverlapReport

_DPI = 150


def render_eval_report(report: EvalReport, path: str | Path) -> Path:
    """Bar chart of precision/recall/F1 per entity type plus micro."""
    rows = [*report.per_type, report.micro]
    labels = [row.entity_type for row in rows]
    positions = range(len(rows))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(rows)), 4.0))
    ax.bar(
        [p - width for p in positions],
        [row.precision for row in rows],
        width,
        label="precision",
    )
    ax.bar(positions, [row.recall for row in rows], width, label="recall")
    ax.bar(
        [p + width for p in positions],
        [row.f1 for row in rows],
        width,
        label="F1",
    )
    ax.set_xticks(list(positions))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(loc="lower right")
    ax.set_title("exact-match evaluation")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


_TWO_CENTERS = ((-0.55, 0.0), (0.55, 0.0))
_THREE_CENTERS = ((0.0, 0.62), (-0.58, -0.38), (0.58, -0.38))


def _region_label(report: OverlapReport, combo: tuple[str, ...]) -> str:
    return str(report.exclusive_regions.get(combo, 0))


def render_overlap(report: OverlapReport, path: str | Path) -> Path:
    """Venn diagram (2-3 sources) or region bar chart (4 sources)."""
    names = report.source_names
    if len(names) == 4:
        return _render_region_bars(report, path)
    centers = _TWO_CENTERS if len(names) == 2 else _THREE_CENTERS
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    colors = ["C0", "C1", "C2"]
    for (x, y), name, color in zip(centers, names, colors):
        ax.add_patch(Circle((x, y), 1.0, alpha=0.3, color=color))
        ax.annotate(
            f"{name} ({report.sizes[name]})",
            xy=(x, y + 1.05),
            ha="center",
            fontsize=10,
        )
    if len(names) == 2:
        a, b = names
        spots = {(a,): (-1.0, 0.0), (b,): (1.0, 0.0), (a, b): (0.0, 0.0)}
    else:
        a, b, c = names
        spots = {
            (a,): (0.0, 1.0),
            (b,): (-1.0, -0.7),
            (c,): (1.0, -0.7),
            (a, b): (-0.52, 0.25),
            (a, c): (0.52, 0.25),
            (b, c): (0.0, -0.65),
            (a, b, c): (0.0, -0.05),
        }
    for combo, (x, y) in spots.items():
        ax.annotate(
            _region_label(report, combo), xy=(x, y), ha="center", fontsize=11
        )
    ax.set_xlim(-2.0, 2.0)
    ax.set_ylim(-2.0, 2.2)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title("term overlap")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def _render_region_bars(report: OverlapReport, path: str | Path) -> Path:
    regions = sorted(report.exclusive_regions, key=lambda c: (len(c), c))
    labels = ["+".join(combo) for combo in regions]
    counts = [report.exclusive_regions[combo] for combo in regions]
    fig, ax = plt.subplots(figsize=(8.0, 0.4 * len(regions) + 2.0))
    ax.barh(range(len(regions)), counts)
    ax.set_yticks(range(len(regions)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("terms")
    ax.set_title("exclusive overlap regions")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
