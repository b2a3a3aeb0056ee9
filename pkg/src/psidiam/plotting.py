"""Deterministic SVG plots for experiment reports.

One figure per (ensemble, class) group found in the report rows.  Output
bytes are stable across reruns: the SVG hash salt is pinned and the date
metadata is stripped, so replotting an identical report reproduces the
files exactly.
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "psidiam"

# per-kind plotting layout: x column, y columns drawn as lines/points,
# and whether both axes are logarithmic
_LAYOUTS = {
    "concentrate": ("N", ["empirical", "bound_psi1", "bound_psi2"], True),
    "diam": ("m", ["median_Dm", "reg_denom", "naive_denom"], True),
    "gamma2": ("n", ["value", "ratio_sqrt_n"], True),
    "lowerbound": ("N", ["freq_above", "mean_R"], False),
    "apps": ("k", ["value"], False),
    "nets-selftest": ("N", ["worst_error", "bound"], True),
    "decompose": ("trial", ["mult_l2", "mult_psi", "mult_linf"], False),
    "selftest": ("case_index", ["rel_err"], False),
}

_GROUP_KEYS = ("ensemble", "class_variant")


def _slug(text: str) -> str:
    out = re.sub(r"[^A-Za-z0-9._-]+", "-", str(text)).strip("-")
    return out or "all"


def _numeric(rows, key):
    vals = []
    for r in rows:
        v = r.get(key)
        try:
            vals.append(float(v))
        except (TypeError, ValueError):
            return None
    return vals


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _axes_only(out_dir: Path, name: str) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.set_title("no rows")
    return _save(fig, out_dir / name)


def plot_report(report: dict, out_dir) -> list[Path]:
    """Emit SVGs for one report dictionary; returns the written paths.

    Rows are grouped by (ensemble, class) when those columns exist, one
    file per group.  Reports without rows produce a single axes-only file.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = report.get("kind")
    if kind not in _LAYOUTS:
        raise ValueError(f"report kind {kind!r} has no registered plot schema")
    rows = list(report.get("rows", []))
    if not rows:
        return [_axes_only(out_dir, f"plot-{_slug(kind)}-empty.svg")]

    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(str(row.get(k, "all")) for k in _GROUP_KEYS)
        groups.setdefault(key, []).append(row)

    xcol, ycols, loglog = _LAYOUTS[kind]
    written = []
    for key in sorted(groups):
        grows = groups[key]
        if xcol == "case_index":
            xs = list(range(len(grows)))
        else:
            xs = _numeric(grows, xcol)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        plotted = False
        if xs is not None:
            order = sorted(range(len(xs)), key=xs.__getitem__)
            for ycol in ycols:
                ys = _numeric(grows, ycol)
                if ys is None:
                    continue
                pairs = [(xs[i], ys[i]) for i in order if ys[i] == ys[i]]
                if not pairs:
                    continue
                ax.plot(*zip(*pairs), marker="o", label=ycol)
                plotted = True
        if plotted:
            if loglog and all(x > 0 for x in xs):
                ax.set_xscale("log")
                ax.set_yscale("log")
            ax.set_xlabel(xcol)
            ax.legend(fontsize=8)
        ax.set_title(" / ".join([kind, *key]), fontsize=9)
        name = "plot-" + "-".join(_slug(p) for p in (kind, *key)) + ".svg"
        written.append(_save(fig, out_dir / name))
    return written
