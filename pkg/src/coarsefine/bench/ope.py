"""One-pass evaluation: initialize on the first ground-truth box, then run once."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from coarsefine.bench.metrics import EvalReport, center_error, iou
from coarsefine.bench.sequence import Sequence
from coarsefine.boxes import BoundingBox
from coarsefine.errors import TrackerError, TrackingError
from coarsefine.features import FeatureBackend, make_backend
from coarsefine.tracker import Diagnostics, TrackerConfig, init, track


@dataclass
class Trajectory:
    name: str
    boxes: list[BoundingBox]
    diagnostics: list[Diagnostics] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def fps(self) -> float:
        return len(self.boxes) / self.wall_time if self.wall_time > 0 else float("inf")


def run_ope(config: TrackerConfig, seq: Sequence, backend: FeatureBackend | None = None) -> Trajectory:
    """Track ``seq`` once from its first ground-truth box.

    Only ``seq.ground_truth[0]`` is read.  Tracker failures are re-raised as
    :class:`TrackerError` naming the sequence and 1-based frame number.
    """
    if backend is None:
        backend = make_backend(config.backend, config.model_path, config.seed)
    start = seq.ground_truth[0]
    t0 = time.perf_counter()
    try:
        state = init(seq.frame(0), start, config, backend)
    except TrackingError as exc:
        raise TrackerError(f"{seq.name}: frame 1: {exc}") from exc
    boxes, diags = [start], []
    for k in range(1, len(seq)):
        frame = seq.frame(k)
        try:
            box, diag = track(state, frame)
        except (TrackingError, RuntimeError) as exc:
            raise TrackerError(f"{seq.name}: frame {k + 1}: {exc}") from exc
        boxes.append(box)
        diags.append(diag)
    return Trajectory(seq.name, boxes, diags, time.perf_counter() - t0)


def frame_scores(traj: Trajectory, seq: Sequence) -> tuple[list[float], list[float]]:
    """Per-frame center errors and overlaps against the full ground truth."""
    if len(traj.boxes) != len(seq.ground_truth):
        raise ValueError(f"{seq.name}: trajectory has {len(traj.boxes)} boxes for {len(seq)} frames")
    errors = [center_error(p, g) for p, g in zip(traj.boxes, seq.ground_truth)]
    overlaps = [iou(p, g) for p, g in zip(traj.boxes, seq.ground_truth)]
    return errors, overlaps


def make_report(results) -> EvalReport:
    """Frame-pooled report over ``(Trajectory, Sequence)`` pairs.

    Per-sequence scores and, when any sequence carries attribute tags,
    per-attribute scores (pooled over the frames of tagged sequences) are
    attached as plain dicts.
    """
    results = list(results)
    if not results:
        raise ValueError("make_report needs at least one trajectory")
    all_err, all_ov = [], []
    per_seq, curves = {}, {}
    by_tag: dict[str, tuple[list, list]] = {}
    for traj, seq in results:
        errors, overlaps = frame_scores(traj, seq)
        all_err += errors
        all_ov += overlaps
        single = EvalReport.from_frames(errors, overlaps)
        per_seq[seq.name] = single.headline()
        curves[seq.name] = (single.precision_curve, single.success_curve)
        for tag in seq.attributes:
            errs, ovs = by_tag.setdefault(tag, ([], []))
            errs += errors
            ovs += overlaps
    report = EvalReport.from_frames(all_err, all_ov)
    report.per_sequence = per_seq
    report.sequence_curves = curves
    report.per_attribute = {
        tag: EvalReport.from_frames(errs, ovs).headline() for tag, (errs, ovs) in sorted(by_tag.items())
    }
    return report
