"""Report figures rendered to files next to the delimited output.

matplotlib is imported lazily so the plain text/record report paths stay
fast and dependency-light at runtime.
"""

from __future__ import annotations

from pathlib import Path

from .harness import RunMetrics
from .risk import AuditResult, CriterionRating

_RATING_VALUE = {CriterionRating.LOW: 0, CriterionRating.MEDIUM: 1,
                 CriterionRating.HIGH: 2}
_RATING_COLORS = ["#2e7d32", "#f9a825", "#c62828"]  # low, medium, high


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_risk_matrix(audit: AuditResult, path: str | Path) -> Path:
    """Heat-map of the per-attack ratings with rule and published labels."""
    plt = _mpl()
    from matplotlib.colors import ListedColormap
    from matplotlib.patches import Patch

    rows = audit.rows
    columns = ["repro", "impact", "stealth", "rule", "label"]
    grid = [[_RATING_VALUE[r.reproducibility], _RATING_VALUE[r.impact],
             _RATING_VALUE[r.stealthiness], _RATING_VALUE[r.rule_overall],
             _RATING_VALUE[r.paper_label]] for r in rows]

    fig, ax = plt.subplots(figsize=(6.0, 0.42 * len(rows) + 1.6))
    ax.imshow(grid, cmap=ListedColormap(_RATING_COLORS), vmin=0, vmax=2,
              aspect="auto")
    ax.set_xticks(range(len(columns)), columns)
    ax.set_yticks(range(len(rows)), [r.attack for r in rows])
    for i, row in enumerate(rows):
        if row.discrepant:
            ax.text(4.45, i, "*", va="center", fontsize=14)
    ax.set_title("attack risk ratings (majority rule vs published label)")
    legend = [Patch(color=c, label=l) for c, l in
              zip(_RATING_COLORS, ["Low", "Medium", "High"])]
    legend.append(Patch(color="white", label="* rule/label discrepancy"))
    ax.legend(handles=legend, loc="upper left", bbox_to_anchor=(1.02, 1.0),
              frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_metrics(metrics: RunMetrics, path: str | Path) -> Path:
    """Detection latency and channel summary for one simulation run."""
    plt = _mpl()

    per_attack = metrics.per_attack
    fig, (ax1, ax2) = plt.subplots(
        1, 2, figsize=(9.0, 3.6),
        gridspec_kw={"width_ratios": [2.2, 1.0]})

    if per_attack:
        names = sorted(per_attack)
        latencies = [per_attack[n]["detection_latency_ms"] for n in names]
        shown = [lat if lat is not None else 0 for lat in latencies]
        colors = ["#1565c0" if lat is not None else "#bdbdbd"
                  for lat in latencies]
        ax1.bar(names, shown, color=colors)
        for i, lat in enumerate(latencies):
            if lat is None:
                ax1.text(i, 50, "not flagged", rotation=90, ha="center",
                         fontsize=7, color="#616161")
        ax1.set_ylabel("detection latency (ms)")
        ax1.set_title("latency from first malicious emission")
        ax1.tick_params(axis="x", rotation=45)
    else:
        ax1.text(0.5, 0.5, "no attacks in this run", ha="center", va="center")
        ax1.set_axis_off()

    channel = metrics.channel
    kinds = ["bsm", "mscm"]
    delivered = [channel[f"{k}_delivered"] for k in kinds]
    dropped = [channel[f"{k}_dropped"] for k in kinds]
    ax2.bar(kinds, delivered, label="delivered", color="#2e7d32")
    ax2.bar(kinds, dropped, bottom=delivered, label="dropped",
            color="#c62828")
    ax2.set_title(f"channel (drop rate {channel['drop_rate']:.3f})")
    ax2.legend(fontsize=8)

    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
