"""Coarse-to-fine single-object tracker.

A one-class SVM over pooled CNN-style activations proposes a coarse target
position, a discriminative correlation filter refines it, and a quality score
gates updates of both appearance models.
"""

from coarsefine.boxes import BoundingBox
from coarsefine.errors import (
    BackendError,
    FormatError,
    InvalidInputError,
    OutOfBoundsError,
    TrackerError,
)
from coarsefine.tracker import Tracker, TrackerConfig, TrackerState, init, track

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "BoundingBox",
    "FormatError",
    "InvalidInputError",
    "OutOfBoundsError",
    "Tracker",
    "TrackerConfig",
    "TrackerError",
    "TrackerState",
    "init",
    "track",
]
