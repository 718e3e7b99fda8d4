"""OTB-layout image sequences.

A sequence directory holds ``img/`` (frames named so that lexicographic order
is temporal order, ``.jpg`` or ``.png``) and ``groundtruth_rect.txt`` with one
1-based ``x,y,w,h`` row per frame.  An optional ``attributes.txt`` lists
challenge tags (``BC``, ``OCC``, ``SV``, ...) separated by commas or spaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from coarsefine.boxes import BoundingBox
from coarsefine.errors import FormatError

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
GROUND_TRUTH = "groundtruth_rect.txt"
ATTRIBUTES = "attributes.txt"
KNOWN_ATTRIBUTES = ("BC", "OCC", "OPR", "OV", "IV", "LR", "DEF", "SV")

_SEPARATORS = re.compile(r"[,\s]+")


@dataclass
class Sequence:
    """Frames (paths or in-memory arrays) with per-frame ground truth."""

    name: str
    frames: list
    ground_truth: list[BoundingBox]
    attributes: tuple[str, ...] = ()
    root: Path | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.frames) != len(self.ground_truth):
            raise FormatError(
                f"{self.name}: {len(self.frames)} frames but {len(self.ground_truth)} ground-truth boxes"
            )
        if len(self.frames) < 2:
            raise FormatError(f"{self.name}: a sequence needs at least 2 frames")

    def __len__(self) -> int:
        return len(self.frames)

    def frame(self, index: int) -> np.ndarray:
        item = self.frames[index]
        if isinstance(item, (str, Path)):
            return load_frame(item)
        return np.asarray(item)


def load_frame(path) -> np.ndarray:
    """Decode an image file to a uint8 array (HxW for grayscale, else HxWx3)."""
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            return np.asarray(img)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a readable image") from exc


def parse_ground_truth(text: str, source: str = GROUND_TRUTH) -> list[BoundingBox]:
    """Parse 1-based ``x,y,w,h`` rows into 0-based boxes."""
    boxes = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p for p in _SEPARATORS.split(line) if p]
        try:
            x, y, w, h = (float(p) for p in parts)
        except ValueError:
            raise FormatError(f"{source}:{lineno}: expected 4 numbers x,y,w,h, got {line!r}") from None
        if not (np.isfinite([x, y, w, h]).all() and w > 0 and h > 0):
            raise FormatError(f"{source}:{lineno}: box must be finite with positive size, got {line!r}")
        boxes.append(BoundingBox(x - 1.0, y - 1.0, w, h))
    return boxes


def parse_attributes(text: str) -> tuple[str, ...]:
    tags = [t.upper() for t in _SEPARATORS.split(text.strip()) if t]
    return tuple(dict.fromkeys(tags))


def is_sequence_dir(path) -> bool:
    path = Path(path)
    return (path / GROUND_TRUTH).is_file() and (path / "img").is_dir()


def load_sequence(path) -> Sequence:
    path = Path(path)
    img_dir = path / "img"
    gt_file = path / GROUND_TRUTH
    if not img_dir.is_dir():
        raise FormatError(f"{path}: missing image folder 'img/'")
    if not gt_file.is_file():
        raise FormatError(f"{path}: missing {GROUND_TRUTH}")
    frames = sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    boxes = parse_ground_truth(gt_file.read_text(), str(gt_file))
    if len(frames) != len(boxes):
        raise FormatError(f"{path}: {len(frames)} images but {len(boxes)} ground-truth rows")
    attrs = ()
    if (path / ATTRIBUTES).is_file():
        attrs = parse_attributes((path / ATTRIBUTES).read_text())
    return Sequence(path.name, frames, boxes, attrs, path)


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def write_sequence(seq: Sequence, path) -> Path:
    """Write ``seq`` in OTB layout with PNG frames; returns the directory."""
    path = Path(path)
    (path / "img").mkdir(parents=True, exist_ok=True)
    for i in range(len(seq)):
        frame = seq.frame(i)
        if frame.dtype != np.uint8:
            frame = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
        Image.fromarray(frame).save(path / "img" / f"{i + 1:04d}.png")
    rows = [",".join(_fmt(v) for v in (b.x + 1.0, b.y + 1.0, b.w, b.h)) for b in seq.ground_truth]
    (path / GROUND_TRUTH).write_text("\n".join(rows) + "\n")
    if seq.attributes:
        (path / ATTRIBUTES).write_text(",".join(seq.attributes) + "\n")
    return path
