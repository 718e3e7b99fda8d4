"""Coarse localization: polar candidates scored by a one-class SVM.

The SVM is linear and trained on target appearances only.  "Incremental"
updates append the new vector to a bounded window of retained vectors and
re-solve the dual on that window, so an updated model is always identical to
a batch model trained on the same window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from coarsefine.boxes import BoundingBox
from coarsefine.errors import InvalidInputError
from coarsefine.features import FeatureVector


@dataclass(frozen=True)
class CandidateGenSpec:
    radii: tuple[float, ...] = ()
    angle_step: float = 30.0
    include_center: bool = True

    def __post_init__(self):
        if any(r <= 0 for r in self.radii) or any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise InvalidInputError(f"radii must be positive and increasing, got {self.radii}")
        if not 0 < self.angle_step <= 360:
            raise InvalidInputError(f"angle_step must be in (0, 360], got {self.angle_step}")

    @classmethod
    def for_target(cls, box: BoundingBox, radius_factors=(0.25, 0.5), angle_step=30.0,
                   include_center=True) -> CandidateGenSpec:
        side = max(box.w, box.h)
        return cls(tuple(f * side for f in radius_factors), angle_step, include_center)


@dataclass
class CandidateRegion:
    center: tuple[float, float]
    box: BoundingBox
    feature: FeatureVector | None = None
    likelihood: float | None = None


def generate_candidates(last_center, last_box: BoundingBox, spec: CandidateGenSpec,
                        frame_bounds) -> list[CandidateRegion]:
    """Candidate centers on rings around ``last_center``, clamped to the frame."""
    last_box.validate()
    width, height = frame_bounds
    cx, cy = last_center
    offsets = [(0.0, 0.0)] if spec.include_center else []
    n_angles = int(round(360.0 / spec.angle_step))
    for radius in spec.radii:
        for k in range(n_angles):
            theta = math.radians(k * spec.angle_step)
            offsets.append((radius * math.cos(theta), radius * math.sin(theta)))
    out = []
    for dx, dy in offsets:
        x = min(max(cx + dx, 0.0), float(width))
        y = min(max(cy + dy, 0.0), float(height))
        out.append(CandidateRegion((x, y), last_box.recenter(x, y)))
    return out


# ---------------------------------------------------------------------------
# one-class SVM
# ---------------------------------------------------------------------------

def solve_ocsvm_dual(gram: np.ndarray, nu: float, tol: float = 1e-12,
                     max_iter: int = 200_000) -> tuple[np.ndarray, float]:
    """SMO for ``min 1/2 a'Qa  s.t. 0 <= a_i <= 1/(nu n), sum(a) = 1``.

    Returns the multipliers and the offset ``rho`` (the common value of
    ``(Qa)_i`` over free support vectors).  ``tol`` is relative to the
    largest diagonal entry of ``gram``.
    """
    n = gram.shape[0]
    upper = 1.0 / (nu * n)
    alpha = np.zeros(n)
    full = min(int(math.floor(1.0 / upper)), n)
    alpha[:full] = upper
    if full < n:
        alpha[full] = 1.0 - full * upper
    grad = gram @ alpha
    scale = max(float(np.max(np.diag(gram))), 1e-300)
    eps = tol * scale
    bound_eps = 1e-12 * upper

    for _ in range(max_iter):
        can_up = alpha < upper - bound_eps
        can_down = alpha > bound_eps
        if not can_up.any() or not can_down.any():
            break
        i = int(np.flatnonzero(can_up)[np.argmin(grad[can_up])])
        j = int(np.flatnonzero(can_down)[np.argmax(grad[can_down])])
        gap = grad[j] - grad[i]
        if gap <= eps:
            break
        curvature = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        step = gap / curvature if curvature > 1e-15 * scale else np.inf
        step = min(step, upper - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (gram[:, i] - gram[:, j])

    free = (alpha > bound_eps) & (alpha < upper - bound_eps)
    if free.any():
        rho = float(np.mean(grad[free]))
    else:
        # KKT: grad <= rho at the upper bound, grad >= rho at zero
        at_upper = alpha >= upper - bound_eps
        bounds = []
        if at_upper.any():
            bounds.append(float(np.max(grad[at_upper])))
        if (~at_upper).any():
            bounds.append(float(np.min(grad[~at_upper])))
        rho = float(np.mean(bounds))
    return alpha, rho


@dataclass(frozen=True)
class OneClassSvmModel:
    """Linear one-class SVM with a normalized score in [-1, 1].

    ``weights`` and ``rho`` solve the usual nu-formulation separating the
    retained vectors from the origin.  The decision bias is ``rho / 2``: the
    hyperplane halfway between the origin and the data margin, which is where
    a two-class max-margin SVM against the origin would put it.  Raw decision
    values are divided by ``scale``, the largest raw value over the retained
    vectors, so the retained vector furthest along ``weights`` scores 1.
    """

    weights: np.ndarray
    bias: float
    nu: float
    budget: int
    retained: tuple[np.ndarray, ...]
    scale: float
    alpha: np.ndarray = field(repr=False)

    def decision(self, values: np.ndarray) -> np.ndarray:
        """Raw (unnormalized) decision values ``W.T - b``."""
        return np.asarray(values) @ self.weights - self.bias


def _values(vec) -> np.ndarray:
    return np.asarray(vec.values if isinstance(vec, FeatureVector) else vec, dtype=np.float64)


def _fit(retained: tuple[np.ndarray, ...], nu: float, budget: int) -> OneClassSvmModel:
    data = np.stack(retained)
    alpha, rho = solve_ocsvm_dual(data @ data.T, nu)
    weights = alpha @ data
    bias = 0.5 * rho
    scale = float(np.max(data @ weights - bias))
    if not scale > 0:
        # degenerate window (e.g. all-zero features): flat zero score
        scale = 1.0
    return OneClassSvmModel(weights, bias, nu, budget, retained, scale, alpha)


def svm_init(vectors: Sequence, nu: float = 0.1, budget: int = 50) -> OneClassSvmModel:
    if len(vectors) == 0:
        raise InvalidInputError("one-class SVM needs at least one training vector")
    if not 0 < nu <= 1:
        raise InvalidInputError(f"nu must lie in (0, 1], got {nu}")
    if budget < 1:
        raise InvalidInputError(f"budget must be >= 1, got {budget}")
    retained = tuple(_values(v) for v in vectors)
    dims = {v.shape for v in retained}
    if len(dims) != 1 or retained[0].ndim != 1:
        raise InvalidInputError(f"training vectors must share one 1-D shape, got {dims}")
    return _fit(retained[-budget:], nu, budget)


def svm_score(model: OneClassSvmModel, vector) -> float:
    values = _values(vector)
    if values.shape != model.weights.shape:
        raise InvalidInputError(
            f"feature length {values.shape} does not match SVM weights {model.weights.shape}"
        )
    raw = float(values @ model.weights - model.bias)
    return float(np.clip(raw / model.scale, -1.0, 1.0))


def svm_update(model: OneClassSvmModel, vector) -> OneClassSvmModel:
    """Add one vector (evicting the oldest beyond budget) and re-solve."""
    values = _values(vector)
    if values.shape != model.weights.shape:
        raise InvalidInputError("update vector does not match SVM dimension")
    retained = (model.retained + (values,))[-model.budget:]
    return _fit(retained, model.nu, model.budget)


def score_candidates(model: OneClassSvmModel, candidates: list[CandidateRegion]) -> list[CandidateRegion]:
    for cand in candidates:
        cand.likelihood = svm_score(model, cand.feature)
    return candidates


def coarse_center(candidates: Sequence[CandidateRegion], q: int = 5) -> tuple[float, float]:
    """Likelihood-weighted mean center of the best ``q`` candidates.

    Members of the top ``q`` with non-positive likelihood are dropped; with no
    survivor the single best candidate's center is returned.
    """
    if not candidates:
        raise InvalidInputError("coarse_center needs at least one candidate")
    if q < 1:
        raise InvalidInputError(f"q must be >= 1, got {q}")
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].likelihood)
    top = [candidates[i] for i in order[:q]]
    survivors = [c for c in top if c.likelihood > 0]
    if not survivors:
        return top[0].center
    weights = np.array([c.likelihood for c in survivors])
    centers = np.array([c.center for c in survivors])
    cx, cy = weights @ centers / weights.sum()
    return (float(cx), float(cy))


def best_candidate(candidates: Sequence[CandidateRegion]) -> CandidateRegion:
    return max(candidates, key=lambda c: c.likelihood)

