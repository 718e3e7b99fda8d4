"""Report files: threshold curves as CSV, a JSON summary, SVG plots and
per-frame trajectory data for overlays."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from coarsefine.bench.metrics import PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS, EvalReport
from coarsefine.bench.ope import Trajectory
from coarsefine.bench.plotting import plot_precision, plot_success

TRAJECTORY_FIELDS = ("frame", "x", "y", "w", "h", "coarse_x", "coarse_y", "quality", "peak_score",
                     "scale", "svm_updated", "filter_updated", "best_likelihood")


def _write_curve(path: Path, thresholds, values, fmt: str) -> None:
    lines = ["threshold,value"]
    lines += [f"{t:{fmt}},{float(v)!r}" for t, v in zip(thresholds, values)]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def summary_dict(report: EvalReport) -> dict:
    out = {
        "precision_at_20": report.precision_at_20,
        "auc": report.auc,
        "frames": report.frames,
        "per_sequence": report.per_sequence,
    }
    if report.per_attribute:
        out["per_attribute"] = report.per_attribute
    return out


def emit_report(report: EvalReport, out_dir, plots: bool = True) -> list[Path]:
    """Write ``precision.csv``, ``success.csv``, ``summary.json`` and the two SVGs."""
    out_dir = Path(out_dir)
    target = out_dir
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        target = out_dir / "precision.csv"
        _write_curve(target, PRECISION_THRESHOLDS, report.precision_curve, ".0f")
        written.append(target)
        target = out_dir / "success.csv"
        _write_curve(target, SUCCESS_THRESHOLDS, report.success_curve, ".2f")
        written.append(target)
        target = out_dir / "summary.json"
        target.write_text(json.dumps(summary_dict(report), indent=2, sort_keys=True) + "\n")
        written.append(target)
        if plots:
            prec = {name: c[0] for name, c in report.sequence_curves.items()}
            succ = {name: c[1] for name, c in report.sequence_curves.items()}
            target = out_dir / "precision.svg"
            written.append(plot_precision(report.precision_curve, target, prec))
            target = out_dir / "success.svg"
            written.append(plot_success(report.success_curve, target, succ))
    except OSError as exc:
        raise OSError(f"cannot write report file {target}: {exc.strerror or exc}") from exc
    return written


def write_trajectory(traj: Trajectory, path) -> Path:
    """Per-frame boxes (0-based x, y, w, h) plus tracker diagnostics, as CSV."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="ascii") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_FIELDS, lineterminator="\n")
            writer.writeheader()
            for k, box in enumerate(traj.boxes):
                row = {"frame": k + 1, **{key: repr(float(v)) for key, v in zip("xywh", box.as_tuple())}}
                if k > 0:
                    diag = traj.diagnostics[k - 1].to_row()
                    diag.pop("frame")
                    row.update({key: repr(float(v)) if isinstance(v, float) else v for key, v in diag.items()})
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write trajectory {path}: {exc.strerror or exc}") from exc
    return path
