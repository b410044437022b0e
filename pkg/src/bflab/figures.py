"""Companion figures for experiment reports.

Each experiment gets one PNG next to its CSV/JSON report.  Rendering is
deliberately boring: Agg backend, fixed geometry, constant metadata, so a
rerun of the same config reproduces the image bytes exactly.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": "bflab"}
_DPI = 110


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=_DPI)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def _ladder_figure(rows, path: Path) -> Path:
    rs = [row["r"] for row in rows]
    p = [row["p_hat"] for row in rows]
    lo = [max(row["p_hat"] - row["ci_low"], 0.0) for row in rows]
    hi = [max(row["ci_high"] - row["p_hat"], 0.0) for row in rows]
    kind = rows[0]["kind"]
    fig, ax = _new_axes(f"{kind} probability ladder", "r", "estimated probability")
    ax.errorbar(rs, p, yerr=[lo, hi], fmt="o-", capsize=3)
    positive = [v for v in p if v > 0]
    if positive and max(positive) / min(positive) > 50:
        ax.set_yscale("log")
    return _save(fig, path)


def _growth_figure(rows, path: Path) -> Path:
    fig, ax = _new_axes("growth statistics", "r", "statistic / r^2")
    by_kind = defaultdict(list)
    for row in rows:
        by_kind[row["kind"]].append(row)
    for kind, entries in sorted(by_kind.items()):
        rs = [e["r"] for e in entries]
        vals = [e["p_hat"] for e in entries]
        errs = [e["ci_high"] - e["p_hat"] for e in entries]
        ax.errorbar(rs, vals, yerr=errs, fmt="o-", capsize=3, label=kind)
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=1)
    ax.legend()
    return _save(fig, path)


def _bounds_figure(rows, path: Path) -> Path:
    fig, ax = _new_axes("orthant probability bounds", "r", "probability")
    by_kind = defaultdict(list)
    for row in rows:
        by_kind[row["kind"]].append(row)
    styles = {
        "orthant_lower": "v--",
        "orthant_upper": "^--",
        "orthant_oracle": "o-",
        "chain_bound": "s:",
    }
    for kind, entries in sorted(by_kind.items()):
        rs = [e["r"] for e in entries]
        vals = [e["p_hat"] for e in entries]
        ax.plot(rs, vals, styles.get(kind, "x-"), label=kind)
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


def _audit_figure(rows, path: Path) -> Path:
    fig, ax = _new_axes("claimed bounds vs exact values", "lambda", "probability")
    by_kind = defaultdict(list)
    for row in rows:
        by_kind[row["kind"]].append(row)
    for kind, entries in sorted(by_kind.items()):
        entries = sorted(entries, key=lambda e: e["r"])
        lams = [e["r"] for e in entries]
        ax.plot(lams, [e["p_hat"] for e in entries], "-", label=f"{kind} exact")
        ax.plot(lams, [e["ci_low"] for e in entries], "--", label=f"{kind} claim")
        bad = [e for e in entries if e["uncertain_fraction"] > 0]
        if bad:
            ax.plot([e["r"] for e in bad], [e["p_hat"] for e in bad], "rx")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    return _save(fig, path)


def _forcing_figure(rows, path: Path) -> Path:
    fig, ax = _new_axes("forced-draw verification", "r", "fraction of samples")
    rs = [row["r"] for row in rows]
    ax.bar([r - 0.05 for r in rs], [row["p_hat"] for row in rows], width=0.1, label="violations")
    ax.bar(
        [r + 0.05 for r in rs],
        [row["uncertain_fraction"] for row in rows],
        width=0.1,
        label="uncertain",
    )
    ax.set_ylim(0, 1)
    ax.legend()
    return _save(fig, path)


_RENDERERS = {
    "hole_ladder": ("ladder", _ladder_figure),
    "crowding_ladder": ("ladder", _ladder_figure),
    "growth_stats": ("growth", _growth_figure),
    "bounds_table": ("bounds", _bounds_figure),
    "audits": ("audits", _audit_figure),
    "omega_verify": ("forcing", _forcing_figure),
}


def render_report_figures(rows, out_base) -> list:
    """Render the figures for a report's rows next to out_base.

    Returns the list of written paths; an empty row set renders nothing.
    """
    if not rows:
        return []
    out_base = Path(out_base)
    experiment = rows[0]["experiment"]
    tag, renderer = _RENDERERS[experiment]
    path = out_base.with_suffix("").parent / (out_base.with_suffix("").name + f"_{tag}.png")
    return [renderer(rows, path)]
