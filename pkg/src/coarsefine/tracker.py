"""Coarse-to-fine tracking loop with quality-gated model updates.

Per frame: score polar candidates around the last position with the one-class
SVM, take their likelihood-weighted center as the coarse estimate, refine it
with the correlation filter over a multi-scale search window, then score the
prediction with the SVM.  That score gates the SVM update (threshold ``mu``)
and the filter update (threshold ``gamma``) independently.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from coarsefine.boxes import BoundingBox
from coarsefine.coarse import (
    CandidateGenSpec,
    OneClassSvmModel,
    best_candidate,
    coarse_center,
    generate_candidates,
    score_candidates,
    svm_init,
    svm_score,
    svm_update,
)
from coarsefine.dcf import (
    CorrelationFilter,
    DcfParams,
    ScaleSpec,
    interpolate_filter,
    multi_scale_search,
    search_window_shape,
    train_at,
)
from coarsefine.errors import FormatError, InvalidInputError, TrackerError
from coarsefine.features import (
    FeatureBackend,
    FeatureVector,
    as_image,
    augment,
    compute_activations,
    default_augment_spec,
    extract_features,
    extract_patch,
    make_backend,
    pool_features,
)

VARIANTS = ("complete", "no-fine-prediction", "no-update", "aggressive-update")


@dataclass(frozen=True)
class TrackerConfig:
    lam: float = 0.1
    nu: float = 0.1
    mu: float = 0.4
    gamma: float = 0.0
    beta: float = 0.025
    search_factor: float = 4.0
    q: int = 5
    budget: int = 50
    radius_factors: tuple[float, ...] = (0.25, 0.5)
    angle_step: float = 30.0
    include_center: bool = True
    scale_factors: tuple[float, ...] = (0.95, 1.0, 1.05)
    scale_damping: float = 0.6
    scale_penalty: float = 0.95
    dcf_reg: float = 1e-2
    label_sigma_factor: float = 0.1
    filter_features: str = "gray_grad"
    augment: bool = True
    backend: str = "synthetic"
    model_path: str | None = None
    seed: int = 0
    variant: str = "complete"

    def __post_init__(self):
        if not -1.0 <= self.mu <= 1.0 or not -1.0 <= self.gamma <= 1.0:
            raise InvalidInputError("mu and gamma must lie in [-1, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidInputError("beta must lie in [0, 1]")
        if self.search_factor < 1:
            raise InvalidInputError("search_factor must be >= 1")
        if not self.lam > 0:
            raise InvalidInputError("lambda must be positive")
        if not 0 < self.nu <= 1:
            raise InvalidInputError("nu must lie in (0, 1]")
        if self.q < 1 or self.budget < 1:
            raise InvalidInputError("q and budget must be >= 1")
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        # normalize list-valued keys coming from JSON/TOML
        for name in ("radius_factors", "scale_factors"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def scales(self) -> ScaleSpec:
        return ScaleSpec(self.scale_factors, self.scale_damping, self.scale_penalty)

    @property
    def dcf_params(self) -> DcfParams:
        return DcfParams(self.dcf_reg, self.label_sigma_factor, self.filter_features)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


_ALIASES = {"lambda": "lam"}


def config_from_dict(data: dict) -> TrackerConfig:
    known = {f.name for f in fields(TrackerConfig)}
    kwargs = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key).replace("-", "_")
        if name not in known:
            raise FormatError(f"unknown config key {key!r}")
        kwargs[name] = value
    try:
        return TrackerConfig(**kwargs)
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid config: {exc}") from exc


def load_config(path=None, **overrides) -> TrackerConfig:
    """Read a JSON or TOML config; missing keys keep the published defaults."""
    data = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ImportError:  # python < 3.11
                import tomli as tomllib
            try:
                data = tomllib.loads(text)
            except tomllib.TOMLDecodeError as exc:
                raise FormatError(f"{path}: {exc}") from exc
        elif text.strip():
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise FormatError(f"{path}: config must be a key-value mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)


@dataclass
class Diagnostics:
    frame_index: int
    coarse_center: tuple[float, float]
    quality: float
    peak_score: float | None
    scale: float
    svm_updated: bool
    filter_updated: bool
    best_likelihood: float
    search_window: BoundingBox | None = None

    def to_row(self) -> dict:
        return {
            "frame": self.frame_index,
            "coarse_x": self.coarse_center[0],
            "coarse_y": self.coarse_center[1],
            "quality": self.quality,
            "peak_score": "" if self.peak_score is None else self.peak_score,
            "scale": self.scale,
            "svm_updated": int(self.svm_updated),
            "filter_updated": int(self.filter_updated),
            "best_likelihood": self.best_likelihood,
        }


@dataclass
class TrackerState:
    config: TrackerConfig
    backend: FeatureBackend = field(repr=False)
    position: BoundingBox
    svm: OneClassSvmModel = field(repr=False)
    filter: CorrelationFilter | None = field(repr=False)
    frame_shape: tuple[int, int]
    frame_index: int = 1
    last_quality: float = 1.0
    svm_updates: int = 0
    filter_updates: int = 0


def init(frame, box: BoundingBox, config: TrackerConfig = TrackerConfig(),
         backend: FeatureBackend | None = None) -> TrackerState:
    """Train both appearance models on the first frame."""
    frame = as_image(frame)
    height, width = frame.shape[:2]
    if not box.is_valid():
        raise InvalidInputError(f"initial box must have positive area, got {box}")
    if box.x >= width or box.y >= height or box.x + box.w <= 0 or box.y + box.h <= 0:
        raise InvalidInputError(f"initial box {box} lies outside the {width}x{height} frame")
    if backend is None:
        backend = make_backend(config.backend, config.model_path, config.seed)

    patch = extract_patch(frame, box, backend.input_size)
    spec = default_augment_spec() if config.augment else ()
    vectors = [pool_features(compute_activations(backend, p), config.lam) for p in augment(patch, spec)]
    svm = svm_init(vectors, config.nu, config.budget)

    filt = None
    if config.variant != "no-fine-prediction":
        shape = search_window_shape(box, config.search_factor)
        filt = train_at(frame, box, shape, config.search_factor, config.dcf_params)
    return TrackerState(config, backend, box, svm, filt, (height, width))


def quality_indicator(state: TrackerState, predicted_box: BoundingBox, frame) -> float:
    """SVM score of the predicted target patch, in [-1, 1]."""
    feat = extract_features(frame, predicted_box, state.backend, state.config.lam)
    return svm_score(state.svm, feat)


def update_decisions(config: TrackerConfig, quality: float) -> tuple[bool, bool]:
    """(update SVM?, update filter?) for a quality value under ``config.variant``."""
    if config.variant == "no-update":
        return False, False
    fine = config.variant != "no-fine-prediction"
    if config.variant == "aggressive-update":
        return True, fine
    return quality >= config.mu, fine and quality >= config.gamma


def gated_update(state: TrackerState, quality: float, new_filter: CorrelationFilter | None,
                 feature: FeatureVector) -> TrackerState:
    """Apply the SVM and filter updates that ``quality`` passes; returns a new state."""
    do_svm, do_filter = update_decisions(state.config, quality)
    svm, filt = state.svm, state.filter
    svm_updates, filter_updates = state.svm_updates, state.filter_updates
    if do_svm:
        svm = svm_update(svm, feature)
        svm_updates += 1
    if do_filter and new_filter is not None and filt is not None:
        filt = interpolate_filter(new_filter, filt, state.config.beta)
        filter_updates += 1
    return replace(state, svm=svm, filter=filt, last_quality=quality,
                   svm_updates=svm_updates, filter_updates=filter_updates)


def track(state: TrackerState, frame) -> tuple[BoundingBox, Diagnostics]:
    """Advance ``state`` by one frame (mutated in place); returns the box and diagnostics."""
    if not isinstance(state, TrackerState):
        raise TrackerError("track() called without an initialized TrackerState")
    frame = as_image(frame)
    height, width = frame.shape[:2]
    if (height, width) != state.frame_shape:
        raise InvalidInputError(
            f"frame size {width}x{height} differs from the initial "
            f"{state.frame_shape[1]}x{state.frame_shape[0]}"
        )
    cfg = state.config
    prev = state.position

    # coarse: candidate likelihoods and their weighted center
    spec = CandidateGenSpec.for_target(prev, cfg.radius_factors, cfg.angle_step, cfg.include_center)
    candidates = generate_candidates(prev.center, prev, spec, (width, height))
    for cand in candidates:
        cand.feature = extract_features(frame, cand.box, state.backend, cfg.lam)
    score_candidates(state.svm, candidates)
    coarse = coarse_center(candidates, cfg.q)
    best = best_candidate(candidates)

    # fine: correlation peak around the coarse center
    peak_score, scale, window = None, 1.0, None
    if cfg.variant == "no-fine-prediction" or state.filter is None:
        predicted = best.box
    else:
        found = multi_scale_search(state.filter, frame, coarse, prev, cfg.scales, cfg.search_factor)
        peak_score, scale, window = found.peak_score, found.scale, found.window
        cx = min(max(found.box.center[0], 0.0), float(width))
        cy = min(max(found.box.center[1], 0.0), float(height))
        predicted = found.box.recenter(cx, cy)

    feature = extract_features(frame, predicted, state.backend, cfg.lam)
    quality = svm_score(state.svm, feature)
    do_svm, do_filter = update_decisions(cfg, quality)
    new_filter = None
    if do_filter and state.filter is not None:
        new_filter = train_at(frame, predicted, state.filter.shape, cfg.search_factor, cfg.dcf_params)
    updated = gated_update(state, quality, new_filter, feature)

    state.svm, state.filter = updated.svm, updated.filter
    state.svm_updates, state.filter_updates = updated.svm_updates, updated.filter_updates
    state.last_quality = quality
    state.position = predicted
    state.frame_index += 1
    diag = Diagnostics(state.frame_index, coarse, quality, peak_score, scale,
                       do_svm, new_filter is not None,
                       float(best.likelihood), window)
    return predicted, diag


class Tracker:
    """Object wrapper around :func:`init` / :func:`track`."""

    def __init__(self, config: TrackerConfig | None = None, backend: FeatureBackend | None = None):
        self.config = config or TrackerConfig()
        self.backend = backend
        self.state: TrackerState | None = None

    def init(self, frame, box: BoundingBox) -> None:
        self.state = init(frame, box, self.config, self.backend)
        self.backend = self.state.backend

    def update(self, frame) -> tuple[BoundingBox, Diagnostics]:
        if self.state is None:
            raise TrackerError("Tracker.update() called before init()")
        return track(self.state, frame)


def models_identical(a: TrackerState, b: TrackerState) -> bool:
    """True when both appearance models are bit-identical."""
    same_svm = (np.array_equal(a.svm.weights, b.svm.weights) and a.svm.bias == b.svm.bias
                and a.svm.scale == b.svm.scale and len(a.svm.retained) == len(b.svm.retained))
    if a.filter is None or b.filter is None:
        return same_svm and a.filter is b.filter
    return same_svm and np.array_equal(a.filter.coeffs, b.filter.coeffs)
