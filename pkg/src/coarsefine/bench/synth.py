"""Seeded synthetic tracking sequences with exact ground truth.

A blocky high-contrast target texture moves over a smooth low-contrast
background.  Kinds:

* ``translate``  constant-speed motion, bouncing off the frame borders
* ``scale``      slow motion while the target size oscillates by +-25 %
* ``occlude``    slow motion; the target vanishes for ``occlusion_length``
                 consecutive frames (background shows through)
* ``distractor`` a second object of the same texture family moves nearby
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from coarsefine.boxes import BoundingBox
from coarsefine.errors import InvalidInputError

KINDS = ("translate", "scale", "occlude", "distractor")
_DEFAULT_SPEED = {"translate": 8.0, "scale": 2.0, "occlude": 2.0, "distractor": 4.0}
_ATTRIBUTES = {"translate": (), "scale": ("SV",), "occlude": ("OCC",), "distractor": ("BC",)}


@dataclass
class SyntheticSequence:
    name: str
    frames: list[np.ndarray]
    ground_truth: list[BoundingBox]
    attributes: tuple[str, ...] = ()
    occluded: list[bool] = field(default_factory=list)


def background_texture(rng: np.random.Generator, shape, contrast: float = 0.06) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), 4.0, mode="wrap")
    noise = (noise - noise.mean()) / noise.std()
    return np.clip(0.5 + contrast * noise, 0.0, 1.0)


def target_texture(rng: np.random.Generator, size: int = 64, blocks: int = 8) -> np.ndarray:
    grid = rng.uniform(0.1, 0.9, (blocks, blocks))
    tex = np.kron(grid, np.ones((size // blocks, size // blocks)))
    return ndimage.gaussian_filter(tex, 1.0, mode="nearest")


def paste(frame: np.ndarray, texture: np.ndarray, box: BoundingBox) -> None:
    """Draw ``texture`` stretched over ``box`` (pixel centers inside the box)."""
    height, width = frame.shape
    x0 = max(int(math.ceil(box.x - 0.5)), 0)
    x1 = min(int(math.floor(box.x + box.w - 0.5)), width - 1)
    y0 = max(int(math.ceil(box.y - 0.5)), 0)
    y1 = min(int(math.floor(box.y + box.h - 0.5)), height - 1)
    if x1 < x0 or y1 < y0:
        return
    th, tw = texture.shape
    us = (np.arange(x0, x1 + 1) + 0.5 - box.x) * tw / box.w - 0.5
    vs = (np.arange(y0, y1 + 1) + 0.5 - box.y) * th / box.h - 0.5
    gv, gu = np.meshgrid(vs, us, indexing="ij")
    frame[y0:y1 + 1, x0:x1 + 1] = ndimage.map_coordinates(texture, [gv, gu], order=1, mode="nearest")


def _bounce(pos, vel, size, bounds, margin=8.0):
    pos, vel = list(pos), list(vel)
    for k in (0, 1):
        lo, hi = margin, bounds[k] - size[k] - margin
        if pos[k] < lo:
            pos[k], vel[k] = 2 * lo - pos[k], -vel[k]
        elif pos[k] > hi:
            pos[k], vel[k] = 2 * hi - pos[k], -vel[k]
    return pos, vel


def make_sequence(kind: str = "translate", frames: int = 100, seed: int = 0,
                  frame_size=(480, 360), target_size: int = 64, speed: float | None = None,
                  occlusion_start: int | None = None, occlusion_length: int = 20,
                  noise: float = 0.01) -> SyntheticSequence:
    if kind not in KINDS:
        raise InvalidInputError(f"unknown synthetic kind {kind!r}; choose from {KINDS}")
    if frames < 2:
        raise InvalidInputError("a sequence needs at least 2 frames")
    rng = np.random.default_rng(seed)
    width, height = frame_size
    background = background_texture(rng, (height, width))
    texture = target_texture(rng, target_size)
    speed = _DEFAULT_SPEED[kind] if speed is None else float(speed)
    angle = rng.uniform(0, 2 * math.pi)
    vel = [speed * math.cos(angle), speed * math.sin(angle)]
    pos = [(width - target_size) / 2.0, (height - target_size) / 2.0]

    if kind == "occlude" and occlusion_start is None:
        occlusion_start = int(0.4 * frames)
    hidden = range(occlusion_start, occlusion_start + occlusion_length) if kind == "occlude" else range(0)

    if kind == "distractor":
        other = target_texture(rng, target_size)
        other_pos = [pos[0] + 1.75 * target_size, pos[1]]
        other_vel = [-vel[0], vel[1]]

    seq_frames, truth, occluded = [], [], []
    for t in range(frames):
        size = float(target_size)
        if kind == "scale":
            size = target_size * (1.0 + 0.25 * math.sin(2 * math.pi * t / max(frames, 2)))
        box = BoundingBox(pos[0], pos[1], size, size)
        frame = background.copy()
        if kind == "distractor":
            paste(frame, other, BoundingBox(other_pos[0], other_pos[1], target_size, target_size))
        if t not in hidden:
            paste(frame, texture, box)
        if noise > 0:
            frame = np.clip(frame + noise * rng.standard_normal(frame.shape), 0.0, 1.0)
        seq_frames.append(frame)
        truth.append(box)
        occluded.append(t in hidden)

        pos = [pos[0] + vel[0], pos[1] + vel[1]]
        pos, vel = _bounce(pos, vel, (size, size), (width, height))
        if kind == "distractor":
            other_pos = [other_pos[0] + other_vel[0], other_pos[1] + other_vel[1]]
            other_pos, other_vel = _bounce(other_pos, other_vel, (target_size, target_size), (width, height))

    name = f"synth-{kind}-s{seed}"
    return SyntheticSequence(name, seq_frames, truth, _ATTRIBUTES[kind], occluded)
