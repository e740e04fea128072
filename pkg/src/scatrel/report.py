"""Human-readable run report with figures rendered alongside the CSV output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .wavesim import BoundaryTrace


def _load_compare(path: Path):
    rows = []
    with open(path) as f:
        r = csv.DictReader(f)
        for row in r:
            rows.append(row)
    return rows


def write_report(cfg, out: Path) -> list[Path]:
    """Render summary text and figures from the compare table.

    Produces tau scatter, boundary recovery map, direction-error histogram
    and (when a trace file exists) the measurement waterfall.
    """
    compare = out / "compare.csv"
    if not compare.exists():
        from .harness import run_compare

        run_compare(cfg, out)
    rows = _load_compare(compare)
    produced = []

    fig, ax = plt.subplots(figsize=(5, 5))
    for mode, color in (("oracle", "tab:blue"), ("blind", "tab:orange")):
        sel = [r for r in rows if r["mode"] == mode]
        if not sel:
            continue
        tt = np.array([float(r["tau_true"]) for r in sel])
        th = np.array([float(r["tau_hat"]) for r in sel])
        ok = np.isfinite(th)
        ax.scatter(tt[ok], th[ok], s=18, label=mode, color=color, alpha=0.8)
    lims = ax.get_xlim()
    ax.plot(lims, lims, "k--", lw=0.8)
    ax.set_xlabel("true travel time")
    ax.set_ylabel("recovered travel time")
    ax.legend()
    fig.tight_layout()
    p = out / "fig_tau_scatter.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    produced.append(p)

    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    th = np.linspace(0, 2 * math.pi, 400)
    ax.plot(np.cos(th), np.sin(th), "k-", lw=1)
    seen = set()
    for r in rows:
        if r["mode"] not in ("oracle", "blind"):
            continue
        zx, zy = float(r["z_true_x"]), float(r["z_true_y"])
        hx, hy = float(r["z_hat_x"]), float(r["z_hat_y"])
        ea = float(r["entry_angle"])
        ax.plot([math.cos(ea)], [math.sin(ea)], "g.", ms=5)
        if not (math.isnan(hx) or math.isnan(hy)):
            ax.plot([zx, hx], [zy, hy], "r-", lw=0.7)
            ax.plot([hx], [hy], "rx", ms=6)
        key = (round(zx, 6), round(zy, 6))
        if key not in seen:
            ax.plot([zx], [zy], "bo", ms=4)
            seen.add(key)
    ax.set_aspect("equal")
    ax.set_title("entries (green), true exits (blue), decoded exits (red)")
    fig.tight_layout()
    p = out / "fig_boundary_map.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    produced.append(p)

    errs = [
        float(r["zeta_err_rad"])
        for r in rows
        if math.isfinite(float(r["zeta_err_rad"]))
    ]
    if errs:
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.hist(errs, bins=24, color="tab:purple", alpha=0.85)
        ax.set_xlabel("exit-direction error [rad]")
        ax.set_ylabel("entries")
        fig.tight_layout()
        p = out / "fig_direction_errors.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        produced.append(p)

    trace_path = out / "measurement.trace"
    if trace_path.exists():
        trace = BoundaryTrace.load(trace_path)
        fig, ax = plt.subplots(figsize=(6, 4))
        v = trace.values
        vmax = np.abs(v).max() or 1.0
        ax.imshow(
            v.T,
            aspect="auto",
            origin="lower",
            extent=(trace.times[0], trace.times[-1], 0, trace.arclengths[-1]),
            cmap="RdBu",
            vmin=-0.25 * vmax,
            vmax=0.25 * vmax,
        )
        ax.set_xlabel("time")
        ax.set_ylabel("boundary arclength")
        ax.set_title("single-measurement boundary trace")
        fig.tight_layout()
        p = out / "fig_trace.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        produced.append(p)

    lines = [f"run report for config hash {cfg.config_hash()}", ""]
    for mode in ("oracle", "blind"):
        sp = out / f"summary_{mode}.json"
        if sp.exists():
            with open(sp) as f:
                summary = json.load(f)
            lines.append(f"[{mode}] " + json.dumps(summary, sort_keys=True))
    lines.append("")
    lines.append("figures: " + ", ".join(p.name for p in produced))
    report_path = out / "report.txt"
    report_path.write_text("\n".join(lines) + "\n")
    produced.append(report_path)
    return produced
