"""Shared test utilities: cached synthetic sequences and a plain tracking loop."""

from functools import lru_cache

import numpy as np

from coarsefine.bench.metrics import center_error, iou
from coarsefine.bench.synth import make_sequence
from coarsefine.tracker import TrackerConfig, init, track


@lru_cache(maxsize=None)
def synthetic(kind, frames, seed=0, speed=None):
    """Cached synthetic sequence (treat as read-only)."""
    return make_sequence(kind, frames, seed=seed, speed=speed)


def run_tracker(seq, config=None, frames=None):
    """Track ``seq``; returns (boxes, diagnostics, final state)."""
    config = config or TrackerConfig()
    state = init(seq.frames[0], seq.ground_truth[0], config)
    boxes, diags = [seq.ground_truth[0]], []
    for frame in seq.frames[1:frames]:
        box, diag = track(state, frame)
        boxes.append(box)
        diags.append(diag)
    return boxes, diags, state


def scores(boxes, truth):
    errors = np.array([center_error(b, g) for b, g in zip(boxes, truth)])
    overlaps = np.array([iou(b, g) for b, g in zip(boxes, truth)])
    return errors, overlaps
