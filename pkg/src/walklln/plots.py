"""Static figures for experiment reports (Agg backend, PNG files)."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import Report  # noqa: E402


def _series(report: Report) -> dict[str, list]:
    out = defaultdict(list)
    for r in report.rows:
        out[r.statistic].append(r)
    return out


def render(report: Report, path: Path) -> Path | None:
    """One figure per report: mean with 95% CI per statistic against n.

    Returns None when the report has nothing to draw.
    """
    series = _series(report)
    if not series:
        return None
    xs_all = [r.checkpoint_n for r in report.rows]
    spread = max(xs_all) > 10 * max(min(xs_all), 1)
    # moments span decades; zero moments cannot be drawn on a log axis and are dropped
    logy = report.kind in ("l2", "counterexample") and any(r.stats.mean > 0 for r in report.rows)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, rows in series.items():
        if logy:
            rows = [r for r in rows if r.stats.mean > 0]
            if not rows:
                continue
        xs = [r.checkpoint_n for r in rows]
        ys = [r.stats.mean for r in rows]
        err = None if logy else [r.stats.ci_halfwidth for r in rows]
        line = ax.errorbar(xs, ys, yerr=err, marker="o", ms=3, capsize=2, label=name)
        t = rows[-1].theory_target
        if t is not None and t > 0:
            ax.axhline(t, ls="--", lw=0.8, color=line[0].get_color())
    floor = report.details.get("lower_bound_discounted")
    if floor:
        ax.axhline(floor, ls=":", color="k", lw=1, label="discounted floor")
    if spread and report.kind != "shift":
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("offset m" if report.kind == "shift" else "n")
    ax.set_ylabel("replica mean")
    title = report.kind
    if report.gamma is not None:
        title += f"  (gamma = {report.gamma.gamma:.4g}, {report.gamma.source})"
    ax.set_title(title)
    if len(series) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
