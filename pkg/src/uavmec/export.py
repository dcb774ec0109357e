"""Flatten a finished run into one plot-ready CSV per figure family.

Five families come from the training and evaluation tables (reward curves,
allocation distributions, utility over the episode, per-user link summary,
UAV trajectories); a sixth appears when the run contains a fixed-offloading
sweep.  Re-export is idempotent: outputs depend only on the run's CSVs, and
the archive uses a pinned timestamp.
"""

from __future__ import annotations

import os
import zipfile

from .metrics import read_csv, write_csv

FIGURE_FAMILIES = (
    "fig_rewards", "fig_allocations", "fig_utility_vs_slot", "fig_per_mu",
    "fig_trajectories", "fig_alpha_sweep",
)


class ExportError(FileNotFoundError):
    """The run directory lacks the tables a family needs."""


def _require(run_dir: str, name: str) -> str:
    path = os.path.join(run_dir, name)
    if not os.path.exists(path):
        raise ExportError(f"{run_dir}: missing {name}")
    return path


def export_rewards(run_dir: str, out_dir: str) -> str:
    rows = read_csv(_require(run_dir, "returns.csv"))
    cumulative: dict[str, float] = {}
    out = []
    for row in rows:
        agent = row["agent"]
        cumulative[agent] = cumulative.get(agent, 0.0) + row["return"]
        out.append({
            "episode": int(row["episode"]), "agent": agent,
            "return": row["return"],
            "cumulative_return": cumulative[agent],
        })
    path = os.path.join(out_dir, "fig_rewards.csv")
    write_csv(path, out, ["episode", "agent", "return", "cumulative_return"])
    return path


def export_allocations(run_dir: str, out_dir: str,
                       caps: dict[str, float]) -> str:
    """Per-UAV per-slot allocation totals, long format, with cap columns."""
    rows = read_csv(_require(run_dir, "eval_per_mu.csv"))
    sums: dict[tuple, dict[str, float]] = {}
    for row in rows:
        key = (row.get("label", "learned"), int(row["episode"]),
               int(row["slot"]), int(row["uav"]))
        agg = sums.setdefault(key, {"omega_ul": 0.0, "omega_dl": 0.0,
                                    "p_dl": 0.0})
        for name in agg:
            agg[name] += row[name]
    out = []
    for (label, episode, slot, uav), agg in sums.items():
        for variable, total in agg.items():
            out.append({
                "label": label, "episode": episode, "slot": slot, "uav": uav,
                "variable": variable, "value": total,
                "cap": caps[variable],
            })
    path = os.path.join(out_dir, "fig_allocations.csv")
    write_csv(path, out, ["label", "episode", "slot", "uav", "variable",
                          "value", "cap"])
    return path


def export_utility_vs_slot(run_dir: str, out_dir: str) -> str:
    rows = read_csv(_require(run_dir, "eval_slots.csv"))
    acc: dict[tuple, list[float]] = {}
    for row in rows:
        acc.setdefault((row.get("label", "learned"), int(row["slot"])),
                       []).append(row["utility"])
    out = [
        {"label": label, "slot": slot,
         "utility": sum(vals) / len(vals)}
        for (label, slot), vals in sorted(acc.items())
    ]
    path = os.path.join(out_dir, "fig_utility_vs_slot.csv")
    write_csv(path, out, ["label", "slot", "utility"])
    return path


def export_per_mu(run_dir: str, out_dir: str) -> str:
    rows = read_csv(_require(run_dir, "eval_per_mu.csv"))
    acc: dict[tuple, list[dict]] = {}
    for row in rows:
        acc.setdefault((row.get("label", "learned"), int(row["mu"])),
                       []).append(row)
    fields = ["distance", "rate_ul", "rate_dl", "omega_ul", "omega_dl",
              "p_dl", "alpha"]
    out = []
    for (label, mu), group in sorted(acc.items()):
        rec = {"label": label, "mu": mu, "uav": int(group[0]["uav"]),
               "mu_x": group[0]["mu_x"], "mu_y": group[0]["mu_y"]}
        for name in fields:
            rec[name] = sum(g[name] for g in group) / len(group)
        out.append(rec)
    path = os.path.join(out_dir, "fig_per_mu.csv")
    write_csv(path, out, ["label", "mu", "uav", "mu_x", "mu_y"] + fields)
    return path


def export_trajectories(run_dir: str, out_dir: str) -> str:
    """UAV tracks of the first evaluation episode: UAVs x slots rows."""
    rows = read_csv(_require(run_dir, "eval_slots.csv"))
    labels = sorted({row.get("label", "learned") for row in rows})
    label = "learned" if "learned" in labels else labels[0]
    out = [
        {"slot": int(row["slot"]), "uav": int(row["uav"]),
         "x": row["x"], "y": row["y"]}
        for row in rows
        if row.get("label", "learned") == label and int(row["episode"]) == 0
    ]
    out.sort(key=lambda r: (r["slot"], r["uav"]))
    path = os.path.join(out_dir, "fig_trajectories.csv")
    write_csv(path, out, ["slot", "uav", "x", "y"])
    return path


def export_alpha_sweep(run_dir: str, out_dir: str) -> str:
    rows = read_csv(_require(run_dir, "sweep.csv"))
    path = os.path.join(out_dir, "fig_alpha_sweep.csv")
    write_csv(path, rows, ["label", "slot", "utility"])
    return path


def export_run(run_dir: str, out_dir: str | None = None,
               caps: dict[str, float] | None = None) -> dict[str, str]:
    """Emit every figure family the run supports plus a bundling archive.

    Returns a map of family name to written path; families whose inputs are
    absent are skipped (the sweep family is optional by design).
    """
    if not os.path.isdir(run_dir):
        raise ExportError(f"run directory not found: {run_dir}")
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    caps = caps or {"omega_ul": 1.0, "omega_dl": 1.0, "p_dl": 5.0}
    written: dict[str, str] = {}
    jobs = {
        "fig_rewards": lambda: export_rewards(run_dir, out_dir),
        "fig_allocations": lambda: export_allocations(run_dir, out_dir, caps),
        "fig_utility_vs_slot": lambda: export_utility_vs_slot(run_dir,
                                                              out_dir),
        "fig_per_mu": lambda: export_per_mu(run_dir, out_dir),
        "fig_trajectories": lambda: export_trajectories(run_dir, out_dir),
        "fig_alpha_sweep": lambda: export_alpha_sweep(run_dir, out_dir),
    }
    for family, job in jobs.items():
        try:
            written[family] = job()
        except ExportError:
            continue
    if not written:
        raise ExportError(f"{run_dir}: no exportable tables found")
    _write_archive(out_dir, sorted(written.values()))
    return written


def _write_archive(out_dir: str, paths: list[str]) -> str:
    """Zip the family CSVs with a pinned timestamp so re-runs match bytes."""
    archive = os.path.join(out_dir, "figures.zip")
    with zipfile.ZipFile(archive, "w", zipfile.ZIP_DEFLATED) as zf:
        for path in paths:
            info = zipfile.ZipInfo(os.path.basename(path),
                                   date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            with open(path, "rb") as fh:
                zf.writestr(info, fh.read())
    return archive
