"""Patch extraction, augmentation and pooled activation features.

The coarse stage describes an image region by one scalar per activation map:
the map's sum scaled by ``lam``.  Activation maps come from a pluggable
backend: ``synthetic`` (seeded random local projections, always available) or
``deep`` (an external CNN model file run through OpenCV's DNN module).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy import ndimage

from coarsefine.boxes import BoundingBox
from coarsefine.errors import BackendError, InvalidInputError, OutOfBoundsError

_LUMA = np.array([0.299, 0.587, 0.114])
_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406])
_IMAGENET_STD = np.array([0.229, 0.224, 0.225])


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    lam: float

    def __len__(self) -> int:
        return self.values.shape[0]


def as_image(pixels) -> np.ndarray:
    """Return ``pixels`` as a float64 image in [0, 1] (2-D or HxWx3)."""
    img = np.asarray(pixels)
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64, copy=False)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise InvalidInputError(f"expected HxW or HxWx3 image, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise InvalidInputError("image has zero size")
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("image contains non-finite values")
    return img


def to_gray(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3:
        return img @ _LUMA
    return img


def to_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    return img


# ---------------------------------------------------------------------------
# patch extraction
# ---------------------------------------------------------------------------

def _sample(frame: np.ndarray, ys: np.ndarray, xs: np.ndarray, sigma: float) -> np.ndarray:
    """Bilinear sampling at the grid ``ys x xs`` with edge replication."""
    height, width = frame.shape[:2]
    pad = int(math.ceil(3 * sigma)) + 2
    x0 = int(math.floor(xs[0])) - pad
    y0 = int(math.floor(ys[0])) - pad
    xi = np.clip(np.arange(x0, int(math.ceil(xs[-1])) + pad + 1), 0, width - 1)
    yi = np.clip(np.arange(y0, int(math.ceil(ys[-1])) + pad + 1), 0, height - 1)
    crop = frame[np.ix_(yi, xi)]
    if sigma > 0:
        spatial = (sigma, sigma) if crop.ndim == 2 else (sigma, sigma, 0)
        crop = ndimage.gaussian_filter(crop, spatial, mode="nearest")
    gy, gx = np.meshgrid(ys - y0, xs - x0, indexing="ij")
    if crop.ndim == 2:
        return ndimage.map_coordinates(crop, [gy, gx], order=1, mode="nearest")
    return np.stack(
        [ndimage.map_coordinates(crop[:, :, c], [gy, gx], order=1, mode="nearest")
         for c in range(crop.shape[2])],
        axis=2,
    )


def extract_patch(frame, box: BoundingBox, target_size: tuple[int, int]) -> np.ndarray:
    """Crop ``box`` from ``frame`` and resample it to ``target_size`` (w, h).

    Regions outside the frame are filled by replicating the nearest edge pixel.
    Downsampling by more than ~1.25x applies a Gaussian pre-filter so that
    small sub-pixel shifts of the box do not alias into the patch.
    """
    frame = as_image(frame)
    box.validate()
    tw, th = int(target_size[0]), int(target_size[1])
    if tw <= 0 or th <= 0:
        raise InvalidInputError(f"target size must be positive, got {target_size}")
    height, width = frame.shape[:2]
    if box.x >= width or box.y >= height or box.x + box.w <= 0 or box.y + box.h <= 0:
        raise OutOfBoundsError(f"box {box} lies entirely outside the {width}x{height} frame")
    sx, sy = box.w / tw, box.h / th
    xs = box.x + (np.arange(tw) + 0.5) * sx - 0.5
    ys = box.y + (np.arange(th) + 0.5) * sy - 0.5
    factor = max(sx, sy)
    sigma = 0.5 * math.sqrt(factor * factor - 1.0) if factor > 1.0 else 0.0
    if sigma < 0.3:
        sigma = 0.0
    return _sample(frame, ys, xs, sigma)


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentEntry:
    """One geometric perturbation; ``shift`` is a fraction of (width, height)."""

    rotation: float = 0.0
    scale: float = 1.0
    shift: tuple[float, float] = (0.0, 0.0)

    def is_identity(self) -> bool:
        return self.rotation == 0.0 and self.scale == 1.0 and self.shift == (0.0, 0.0)


def default_augment_spec() -> tuple[AugmentEntry, ...]:
    rotations = [AugmentEntry(rotation=a) for a in (-20.0, -10.0, 10.0, 20.0)]
    scales = [AugmentEntry(scale=s) for s in (0.95, 1.05)]
    shifts = [
        AugmentEntry(shift=s)
        for s in ((0.1, 0.0), (-0.1, 0.0), (0.0, 0.1), (0.0, -0.1), (0.1, 0.1), (0.1, -0.1))
    ]
    return tuple(rotations + scales + shifts)


def _transform(patch: np.ndarray, entry: AugmentEntry) -> np.ndarray:
    h, w = patch.shape[:2]
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    theta = math.radians(entry.rotation)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    # affine_transform maps output coords to input coords
    matrix = rot / entry.scale
    shift_px = np.array([entry.shift[1] * h, entry.shift[0] * w])
    offset = center - matrix @ (center + shift_px)
    if patch.ndim == 2:
        return ndimage.affine_transform(patch, matrix, offset, order=1, mode="nearest")
    return np.stack(
        [ndimage.affine_transform(patch[:, :, c], matrix, offset, order=1, mode="nearest")
         for c in range(patch.shape[2])],
        axis=2,
    )


def augment(patch: np.ndarray, spec: Sequence[AugmentEntry] = ()) -> list[np.ndarray]:
    """Return ``[patch]`` followed by one transformed copy per spec entry."""
    patch = as_image(patch)
    out = [patch]
    for entry in spec:
        out.append(patch.copy() if entry.is_identity() else np.clip(_transform(patch, entry), 0.0, 1.0))
    return out


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------

class FeatureBackend(Protocol):
    name: str
    input_size: tuple[int, int]
    num_maps: int
    map_shape: tuple[int, int]

    def activations(self, patch: np.ndarray) -> np.ndarray: ...


@dataclass
class SyntheticBackend:
    """Deterministic stand-in for a CNN layer.

    The grayscale patch is cut into a ``grid x grid`` lattice of
    ``cell x cell`` blocks; every block is projected onto ``num_maps`` seeded,
    zero-mean random filters and rectified, giving ``num_maps`` maps of
    ``grid x grid``.
    """

    seed: int = 0
    num_maps: int = 32
    grid: int = 7
    cell: int = 4
    name: str = field(default="synthetic", init=False)
    _weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        weights = rng.standard_normal((self.num_maps, self.cell * self.cell))
        weights -= weights.mean(axis=1, keepdims=True)
        weights /= np.linalg.norm(weights, axis=1, keepdims=True)
        self._weights = weights

    @property
    def input_size(self) -> tuple[int, int]:
        side = self.grid * self.cell
        return (side, side)

    @property
    def map_shape(self) -> tuple[int, int]:
        return (self.grid, self.grid)

    def activations(self, patch: np.ndarray) -> np.ndarray:
        gray = to_gray(patch)
        g, c = self.grid, self.cell
        blocks = gray.reshape(g, c, g, c).transpose(0, 2, 1, 3).reshape(g * g, c * c)
        maps = np.maximum(blocks @ self._weights.T, 0.0)
        return maps.T.reshape(self.num_maps, g, g)


class DeepBackend:
    """Activations of a pretrained CNN loaded from a model file (ONNX etc.).

    The network must take a 1x3x224x224 ImageNet-normalized RGB tensor and
    return the chosen convolutional layer, e.g. VGG16 conv5-3 (512x14x14).
    Inference is serialized with a lock so one instance can be shared by
    concurrent sequence runs.
    """

    name = "deep"
    input_size = (224, 224)

    def __init__(self, model_path, output_name: str | None = None):
        path = Path(model_path) if model_path else None
        if path is None or not path.is_file():
            raise BackendError(f"deep backend unavailable: model file {model_path!r} not found")
        try:
            import cv2
        except ImportError as exc:
            raise BackendError("deep backend requires opencv-python (cv2.dnn)") from exc
        try:
            self._net = cv2.dnn.readNet(str(path))
        except cv2.error as exc:
            raise BackendError(f"failed to load model {path}: {exc}") from exc
        self.model_path = path
        self.output_name = output_name
        self._lock = threading.Lock()
        probe = self.activations(np.zeros((224, 224, 3)))
        self.num_maps = probe.shape[0]
        self.map_shape = probe.shape[1:]

    def activations(self, patch: np.ndarray) -> np.ndarray:
        rgb = (to_rgb(patch) - _IMAGENET_MEAN) / _IMAGENET_STD
        blob = rgb.transpose(2, 0, 1)[None].astype(np.float32)
        with self._lock:
            try:
                self._net.setInput(blob)
                out = self._net.forward(self.output_name) if self.output_name else self._net.forward()
            except Exception as exc:  # cv2.error carries the diagnostic
                raise BackendError(f"inference failed for {self.model_path}: {exc}") from exc
        out = np.asarray(out, dtype=np.float64)
        if out.ndim == 4:
            out = out[0]
        if out.ndim != 3:
            raise BackendError(f"expected a KxMxN activation stack, model returned shape {out.shape}")
        return out


def make_backend(name: str = "synthetic", model_path=None, seed: int = 0) -> FeatureBackend:
    if name == "synthetic":
        return SyntheticBackend(seed=seed)
    if name == "deep":
        return DeepBackend(model_path)
    raise InvalidInputError(f"unknown backend {name!r}")


def available_backends(model_path=None) -> list[str]:
    names = ["synthetic"]
    try:
        DeepBackend(model_path)
    except BackendError:
        return names
    return names + ["deep"]


# ---------------------------------------------------------------------------
# activations and pooling
# ---------------------------------------------------------------------------

def compute_activations(backend: FeatureBackend, patch: np.ndarray) -> np.ndarray:
    """Run ``backend`` on a patch already resized to ``backend.input_size``."""
    patch = as_image(patch)
    w, h = backend.input_size
    if patch.shape[:2] != (h, w):
        raise InvalidInputError(
            f"{backend.name} backend expects a {w}x{h} patch, got {patch.shape[1]}x{patch.shape[0]}"
        )
    stack = backend.activations(patch)
    if stack.ndim != 3 or stack.shape[0] < 1 or not np.all(np.isfinite(stack)):
        raise BackendError(f"{backend.name} backend produced an invalid activation stack")
    return stack


def pool_features(stack, lam: float) -> FeatureVector:
    """Sum every activation map and scale by ``lam``: one value per map."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.size == 0:
        raise InvalidInputError(f"expected a non-empty KxMxN stack, got shape {stack.shape}")
    if not lam > 0:
        raise InvalidInputError(f"lam must be positive, got {lam}")
    return FeatureVector(stack.sum(axis=(1, 2)) * lam, float(lam))


def extract_features(frame, box: BoundingBox, backend: FeatureBackend, lam: float) -> FeatureVector:
    patch = extract_patch(frame, box, backend.input_size)
    return pool_features(compute_activations(backend, patch), lam)
