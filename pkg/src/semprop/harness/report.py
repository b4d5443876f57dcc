"""Experiment reports: canonical JSON, per-trial CSV, density-curve CSV,
and matplotlib figures rendered to files alongside the delimited output.

Identical (config, seed) pairs produce byte-identical files: trial records
are built in a fixed order, JSON is dumped with sorted keys, CSV uses a
pinned column order and newline, and figures are rendered on the Agg
backend from the same arrays.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..errors import DomainError

__all__ = ["ExperimentReport", "emit_report", "load_report"]

REPORT_VERSION = 1


@dataclass(frozen=True)
class ExperimentReport:
    """Everything one experiment run produced.

    ``dataset`` is reserved for future label-data-backed runs and stays
    None for synthetic scenes.
    """

    kind: str
    seed: int
    mode: str
    config: dict
    config_hash: str
    trials: list
    aggregate: dict
    diagnostics: dict
    curves: dict | None = None
    dataset: dict | None = None

    def to_dict(self):
        return {
            "version": REPORT_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "mode": self.mode,
            "config": self.config,
            "config_hash": self.config_hash,
            "trials": self.trials,
            "aggregate": self.aggregate,
            "diagnostics": self.diagnostics,
            "curves": self.curves,
            "dataset": self.dataset,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("version") != REPORT_VERSION:
            raise DomainError(f"unsupported report version {doc.get('version')!r}")
        return cls(
            kind=doc["kind"],
            seed=doc["seed"],
            mode=doc["mode"],
            config=doc["config"],
            config_hash=doc["config_hash"],
            trials=doc["trials"],
            aggregate=doc["aggregate"],
            diagnostics=doc["diagnostics"],
            curves=doc.get("curves"),
            dataset=doc.get("dataset"),
        )


def _json_dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _metric_columns(trials):
    cols = ["trial"]
    sample = trials[0]
    if "metrics_before" in sample:
        for phase in ("before", "after"):
            for name in ("accuracy", "psnr", "ssim", "bce", "mse"):
                cols.append(f"{name}_{phase}")
        cols += ["measured_regions", "corrected_regions", "accuracy_improved"]
    elif "decision" in sample:
        cols += ["psi", "expected_friction", "threshold", "decision"]
    elif "mode_weights" in sample:
        cols += ["psi", "measured_mode_name", "weight_ratio"]
    return cols


def _metric_row(trial):
    if "metrics_before" in trial:
        row = [trial["trial"]]
        for phase in ("before", "after"):
            m = trial[f"metrics_{phase}"]
            for name in ("accuracy", "psnr", "ssim", "bce", "mse"):
                row.append(m[name])
        row.append(len(trial["measurements"]))
        row.append(sum(1 for m in trial["measurements"] if m["corrected"]))
        row.append(trial["accuracy_improved"])
        return row
    if "decision" in trial:
        return [
            trial["trial"], trial["psi"], trial["expected_friction"],
            trial["threshold"], trial["decision"],
        ]
    if "mode_weights" in trial:
        w = trial["mode_weights"]
        return [
            trial["trial"], trial["psi"], trial["measured_mode_name"],
            max(w) / min(w),
        ]
    return [trial["trial"]]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def _csv_cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(float(v))
    return v


def _render_curves(report, fig_dir):
    curves = report.curves
    xs = curves["psi"]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label in sorted(curves["series"]):
        ax.plot(xs, curves["series"][label], label=label)
    ax.set_xlabel(report.config.get("table", {}).get("bundled", "psi"))
    ax.set_ylabel("density")
    ax.legend(loc="best", fontsize=8)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(fig_dir / "density_curves.png", dpi=120)
    plt.close(fig)


def _render_correction_summary(report, fig_dir):
    deltas = [
        t["metrics_after"]["accuracy"] - t["metrics_before"]["accuracy"]
        for t in report.trials
    ]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.hist(deltas, bins=30, color="tab:blue", alpha=0.8)
    ax.set_xlabel("accuracy delta (after - before)")
    ax.set_ylabel("trials")
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(fig_dir / "accuracy_delta.png", dpi=120)
    plt.close(fig)


def _render_door_trace(report, fig_dir):
    steps = [t["trial"] + 1 for t in report.trials]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    k = len(report.trials[0]["mode_weights"])
    names = report.config.get("table", {}).get("classes") or [f"mode {i+1}" for i in range(k)]
    if len(names) != k:
        names = [f"mode {i+1}" for i in range(k)]
    for i in range(k):
        ax1.plot(steps, [t["mode_weights"][i] for t in report.trials], marker="o", label=str(names[i]))
        ax2.plot(steps, [t["mode_variances"][i] for t in report.trials], marker="o", label=str(names[i]))
    ax1.set_xlabel("measurement step")
    ax1.set_ylabel("mode weight")
    ax1.legend(fontsize=8)
    ax2.set_xlabel("measurement step")
    ax2.set_ylabel("mode variance")
    fig.tight_layout()
    fig.savefig(fig_dir / "door_trace.png", dpi=120)
    plt.close(fig)


def emit_report(report: ExperimentReport, out_dir, figures: bool = True):
    """Write report.json, metrics.csv, density_curves.csv and figures.

    Returns the list of written paths.  Raises OSError with the offending
    path on I/O failure.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out / "report.json"
    report_path.write_text(_json_dumps(report.to_dict()))
    written.append(report_path)

    if report.trials:
        metrics_path = out / "metrics.csv"
        _write_csv(
            metrics_path,
            _metric_columns(report.trials),
            [_metric_row(t) for t in report.trials],
        )
        written.append(metrics_path)

    if report.curves:
        curve_path = out / "density_curves.csv"
        labels = sorted(report.curves["series"])
        rows = []
        for i, x in enumerate(report.curves["psi"]):
            rows.append([x] + [report.curves["series"][lab][i] for lab in labels])
        _write_csv(curve_path, ["psi"] + labels, rows)
        written.append(curve_path)

    if figures:
        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        if report.curves:
            _render_curves(report, fig_dir)
            written.append(fig_dir / "density_curves.png")
        if report.kind in ("correct", "simulate") and report.trials:
            _render_correction_summary(report, fig_dir)
            written.append(fig_dir / "accuracy_delta.png")
        if report.kind == "door":
            _render_door_trace(report, fig_dir)
            written.append(fig_dir / "door_trace.png")
    return written


def load_report(path) -> ExperimentReport:
    """Read a report.json back; inverse of emit_report's JSON part."""
    doc = json.loads(Path(path).read_text())
    return ExperimentReport.from_dict(doc)
