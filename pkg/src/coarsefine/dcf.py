"""Discriminative correlation filter for fine localization.

Filters are trained in closed form (per-frequency ridge regression onto a
Gaussian label) and applied by point-wise products in the Fourier domain,
which is circular cross-correlation of a spatial template with the search
window.  Arrays are ``(rows, cols)``; sizes passed as tuples are ``(w, h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from coarsefine.boxes import BoundingBox
from coarsefine.errors import InvalidInputError
from coarsefine.features import as_image, extract_patch, to_gray

FEATURE_MODES = ("gray_grad", "raw")


@dataclass(frozen=True)
class DcfParams:
    reg: float = 1e-2
    sigma_factor: float = 0.1
    features: str = "gray_grad"
    cosine_window: bool = True

    def __post_init__(self):
        if self.features not in FEATURE_MODES:
            raise InvalidInputError(f"unknown filter feature mode {self.features!r}")
        if self.reg < 0 or self.sigma_factor <= 0:
            raise InvalidInputError("reg must be >= 0 and sigma_factor > 0")


@dataclass(frozen=True)
class CorrelationFilter:
    coeffs: np.ndarray  # (channels, rows, cols), complex
    window: np.ndarray | None
    label_sigma: float
    features: str = "gray_grad"

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:]

    @property
    def spatial_size(self) -> tuple[int, int]:
        rows, cols = self.shape
        return (cols, rows)

    @property
    def channels(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class ResponseMap:
    values: np.ndarray
    peak: tuple[int, int]  # (x, y) = (col, row)
    score: float
    origin: tuple[float, float] = (0.0, 0.0)

    def displacement(self) -> tuple[int, int]:
        """Peak offset from the label center, in window pixels."""
        rows, cols = self.values.shape
        return (self.peak[0] - cols // 2, self.peak[1] - rows // 2)


@dataclass(frozen=True)
class ScaleSpec:
    factors: tuple[float, ...] = (0.95, 1.0, 1.05)
    damping: float = 0.6
    penalty: float = 1.0  # multiplies peaks found at factors other than 1.0

    def __post_init__(self):
        if 1.0 not in self.factors or any(f <= 0 for f in self.factors):
            raise InvalidInputError(f"scale factors must be positive and include 1.0, got {self.factors}")
        if not 0.0 <= self.damping <= 1.0:
            raise InvalidInputError(f"damping must lie in [0, 1], got {self.damping}")
        if not 0.0 < self.penalty <= 1.0:
            raise InvalidInputError(f"penalty must lie in (0, 1], got {self.penalty}")

    def damped(self, factor: float) -> float:
        return 1.0 + self.damping * (factor - 1.0)


@dataclass(frozen=True)
class SearchResult:
    box: BoundingBox
    peak_score: float
    scale: float
    window: BoundingBox
    response: ResponseMap


def gaussian_labels(size, sigma: float) -> np.ndarray:
    """Gaussian of std ``sigma`` peaking at 1 on grid cell ``(h//2, w//2)``."""
    w, h = int(size[0]), int(size[1])
    if w <= 0 or h <= 0 or sigma <= 0:
        raise InvalidInputError(f"need positive size and sigma, got {size}, {sigma}")
    rows = np.arange(h) - h // 2
    cols = np.arange(w) - w // 2
    dist2 = rows[:, None] ** 2 + cols[None, :] ** 2
    return np.exp(-dist2 / (2.0 * sigma * sigma))


def cosine_window(shape) -> np.ndarray:
    rows, cols = shape
    return np.outer(np.hanning(rows), np.hanning(cols))


def search_window_shape(box: BoundingBox, search_factor: float) -> tuple[int, int]:
    """(rows, cols) of the search window, rounded to even integers."""
    rows = max(2, 2 * int(round(search_factor * box.h / 2.0)))
    cols = max(2, 2 * int(round(search_factor * box.w / 2.0)))
    return rows, cols


def feature_channels(region: np.ndarray, mode: str, window: np.ndarray | None) -> np.ndarray:
    """Stack of filter input channels for a search-window patch.

    ``gray_grad`` is mean-free intensity plus horizontal and vertical central
    differences (circular, so the stack commutes with circular shifts), all
    scaled by ``1/sqrt(area)`` so that the ridge term is relative to per-pixel
    power.  ``raw`` is the intensity itself, one channel, unscaled.
    """
    gray = to_gray(as_image(region))
    if mode == "raw":
        chans = gray[None]
    else:
        g = gray - gray.mean()
        std = g.std()
        g = g / std if std > 1e-8 else np.zeros_like(g)
        gx = 0.5 * (np.roll(g, -1, axis=1) - np.roll(g, 1, axis=1))
        gy = 0.5 * (np.roll(g, -1, axis=0) - np.roll(g, 1, axis=0))
        chans = np.stack([g, gx, gy]) / math.sqrt(g.size)
    if window is not None:
        chans = chans * window
    return chans


def train_filter(region, target_size, params: DcfParams = DcfParams()) -> CorrelationFilter:
    """Closed-form multi-channel filter for ``region`` (the whole search window).

    ``target_size`` is the target's (w, h) in window pixels and sets the label
    width.  A constant region yields an all-zero filter, not an error.
    """
    region = as_image(region)
    rows, cols = region.shape[:2]
    window = cosine_window((rows, cols)) if params.cosine_window else None
    feats = feature_channels(region, params.features, window)
    sigma = params.sigma_factor * math.sqrt(target_size[0] * target_size[1])
    labels = gaussian_labels((cols, rows), sigma)
    spectra = np.fft.fft2(feats, axes=(-2, -1))
    energy = np.sum(spectra.real ** 2 + spectra.imag ** 2, axis=0) + params.reg
    coeffs = np.conj(spectra) * np.fft.fft2(labels) / energy
    return CorrelationFilter(coeffs, window, sigma, params.features)


def response_map(filt: CorrelationFilter, region, origin=(0.0, 0.0)) -> ResponseMap:
    """Correlation scores of ``filt`` at every circular shift of ``region``."""
    region = as_image(region)
    if region.shape[:2] != filt.shape:
        raise InvalidInputError(f"region shape {region.shape[:2]} does not match filter {filt.shape}")
    feats = feature_channels(region, filt.features, filt.window)
    if feats.shape[0] != filt.channels:
        raise InvalidInputError("region channel count does not match filter")
    spectra = np.fft.fft2(feats, axes=(-2, -1))
    values = np.real(np.fft.ifft2(np.sum(filt.coeffs * spectra, axis=0)))
    row, col = np.unravel_index(int(np.argmax(values)), values.shape)
    return ResponseMap(values, (int(col), int(row)), float(values[row, col]), tuple(origin))


def spatial_template(filt: CorrelationFilter) -> np.ndarray:
    """Real spatial filter ``g`` with ``response[t] = sum_x g[x] r[x + t]``."""
    return np.real(np.fft.ifft2(np.conj(filt.coeffs), axes=(-2, -1)))


def filter_from_template(template: np.ndarray, features: str = "raw",
                         window: np.ndarray | None = None) -> CorrelationFilter:
    """Wrap a spatial template ``(channels, rows, cols)`` as a filter."""
    template = np.asarray(template, dtype=np.float64)
    if template.ndim == 2:
        template = template[None]
    coeffs = np.conj(np.fft.fft2(template, axes=(-2, -1)))
    return CorrelationFilter(coeffs, window, 1.0, features)


def window_box(center, box: BoundingBox, search_factor: float, scale: float = 1.0) -> BoundingBox:
    return BoundingBox.from_center(center[0], center[1],
                                   scale * search_factor * box.w, scale * search_factor * box.h)


def multi_scale_search(filt: CorrelationFilter, frame, center, current_box: BoundingBox,
                       scales: ScaleSpec = ScaleSpec(), search_factor: float = 4.0) -> SearchResult:
    """Search windows around ``center`` at every scale factor; keep the global peak.

    Each window is ``factor * search_factor`` times the current box, resampled
    to the filter size.  Peaks at factors other than 1 are weighted by
    ``scales.penalty`` before comparison (1.0 = plain global maximum).  Ties
    go to the earlier factor, then to the first peak in row-major order.
    """
    gray = to_gray(as_image(frame))
    rows, cols = filt.shape
    best = None
    for factor in scales.factors:
        win = window_box(center, current_box, search_factor, factor)
        patch = extract_patch(gray, win, (cols, rows))
        resp = response_map(filt, patch, (win.x, win.y))
        weighted = resp.score * (1.0 if factor == 1.0 else scales.penalty)
        if best is None or weighted > best[0]:
            best = (weighted, factor, resp, win)
    _, factor, resp, win = best
    dx, dy = resp.displacement()
    cx = center[0] + dx * win.w / cols
    cy = center[1] + dy * win.h / rows
    grow = scales.damped(factor)
    box = BoundingBox.from_center(cx, cy, current_box.w * grow, current_box.h * grow)
    return SearchResult(box, resp.score, factor, win, resp)


def train_at(frame, box: BoundingBox, shape, search_factor: float,
             params: DcfParams = DcfParams()) -> CorrelationFilter:
    """Train a filter of array ``shape`` on the search window around ``box``."""
    rows, cols = shape
    win = window_box(box.center, box, search_factor)
    patch = extract_patch(to_gray(as_image(frame)), win, (cols, rows))
    target = (cols / search_factor, rows / search_factor)
    return train_filter(patch, target, params)


def interpolate_filter(new: CorrelationFilter, old: CorrelationFilter, beta: float) -> CorrelationFilter:
    """Running average of filter coefficients with learning rate ``beta``."""
    if new.coeffs.shape != old.coeffs.shape:
        raise InvalidInputError(f"filter shapes differ: {new.coeffs.shape} vs {old.coeffs.shape}")
    if not 0.0 <= beta <= 1.0:
        raise InvalidInputError(f"beta must lie in [0, 1], got {beta}")
    return replace(old, coeffs=beta * new.coeffs + (1.0 - beta) * old.coeffs)
