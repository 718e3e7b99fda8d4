import math

import numpy as np
import pytest

from coarsefine.bench.synth import background_texture, paste, target_texture
from coarsefine.boxes import BoundingBox
from coarsefine.dcf import (
    CorrelationFilter,
    DcfParams,
    ScaleSpec,
    feature_channels,
    filter_from_template,
    gaussian_labels,
    interpolate_filter,
    multi_scale_search,
    response_map,
    search_window_shape,
    spatial_template,
    train_at,
    train_filter,
)
from coarsefine.errors import InvalidInputError
from coarsefine.features import extract_patch

from oracles import circular_xcorr, circular_xcorr_roll

RAW = DcfParams(features="raw", cosine_window=False)


@pytest.fixture
def rng():
    return np.random.default_rng(21)


def centered_pattern(rng, size=48, inner=12):
    region = np.full((size, size), 0.5)
    lo = size // 2 - inner // 2
    region[lo:lo + inner, lo:lo + inner] = rng.uniform(size=(inner, inner))
    return region


# -- labels -----------------------------------------------------------------

def test_label_values():
    lab = gaussian_labels((9, 7), 2.0)
    assert lab.shape == (7, 9)
    assert lab[3, 4] == 1.0 and lab.max() == 1.0
    assert lab[3, 6] == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert lab[1, 4] == pytest.approx(math.exp(-0.5), abs=1e-15)
    corner = gaussian_labels((5, 5), 1.0)[0, 0]
    assert corner == pytest.approx(math.exp(-4.0), abs=1e-15)
    assert corner == pytest.approx(0.0183, abs=1e-4)


def test_label_center_for_even_sizes():
    lab = gaussian_labels((8, 6), 1.5)
    assert np.unravel_index(np.argmax(lab), lab.shape) == (3, 4)


def test_label_validation():
    with pytest.raises(InvalidInputError):
        gaussian_labels((0, 5), 1.0)
    with pytest.raises(InvalidInputError):
        gaussian_labels((5, 5), 0.0)


def test_search_window_is_even():
    assert search_window_shape(BoundingBox(0, 0, 33, 21), 4.0) == (84, 132)
    assert search_window_shape(BoundingBox(0, 0, 10.6, 7.3), 4.0) == (30, 42)


# -- training ---------------------------------------------------------------

@pytest.mark.parametrize("params", [DcfParams(), RAW, DcfParams(features="raw")])
def test_self_response_peaks_at_center(rng, params):
    region = centered_pattern(rng)
    filt = train_filter(region, (12, 12), params)
    resp = response_map(filt, region)
    assert abs(resp.peak[0] - 24) <= 1 and abs(resp.peak[1] - 24) <= 1
    assert resp.score >= 0.9
    assert resp.displacement() == (resp.peak[0] - 24, resp.peak[1] - 24)


def test_constant_region_is_flat():
    region = np.full((40, 40), 0.6)
    filt = train_filter(region, (10, 10))
    values = response_map(filt, region).values
    assert values.max() - values.min() < 0.1
    assert np.isfinite(filt.coeffs).all()


def test_huge_regularization_kills_filter(rng):
    region = centered_pattern(rng)
    small = train_filter(region, (12, 12), DcfParams(reg=1e-2))
    huge = train_filter(region, (12, 12), DcfParams(reg=1e12))
    assert np.abs(huge.coeffs).max() < 1e-9 * np.abs(small.coeffs).max()


def test_filter_metadata(rng):
    filt = train_filter(rng.uniform(size=(30, 50)), (10, 6))
    assert filt.shape == (30, 50)
    assert filt.spatial_size == (50, 30)
    assert filt.channels == 3
    assert filt.label_sigma == pytest.approx(0.1 * math.sqrt(60))
    assert filt.window.shape == (30, 50)


def test_dcf_params_validation():
    with pytest.raises(InvalidInputError):
        DcfParams(features="hog")
    with pytest.raises(InvalidInputError):
        DcfParams(reg=-1)


# -- response map -----------------------------------------------------------

def test_oracles_agree(rng):
    t, r = rng.standard_normal((2, 9, 7))
    np.testing.assert_allclose(circular_xcorr(t, r), circular_xcorr_roll(t, r), atol=1e-12)


def test_response_matches_spatial_oracle(rng):
    for _ in range(5):
        template = rng.standard_normal((16, 16))
        region = rng.uniform(size=(16, 16))
        resp = response_map(filter_from_template(template), region)
        np.testing.assert_allclose(resp.values, circular_xcorr(template, region), atol=1e-9)


def test_trained_filter_matches_oracle_per_channel(rng):
    region = rng.uniform(size=(20, 24))
    filt = train_filter(region, (6, 5))
    probe = rng.uniform(size=(20, 24))
    feats = feature_channels(probe, filt.features, filt.window)
    expected = sum(circular_xcorr_roll(g, f) for g, f in zip(spatial_template(filt), feats))
    np.testing.assert_allclose(response_map(filt, probe).values, expected, atol=1e-9)


def test_template_round_trip(rng):
    template = rng.standard_normal((2, 8, 10))
    np.testing.assert_allclose(spatial_template(filter_from_template(template)), template, atol=1e-12)


def test_zero_region_gives_zero_map(rng):
    filt = filter_from_template(rng.standard_normal((12, 12)))
    assert not response_map(filt, np.zeros((12, 12))).values.any()
    trained = train_filter(rng.uniform(size=(12, 12)), (3, 3))
    np.testing.assert_allclose(response_map(trained, np.zeros((12, 12))).values, 0.0, atol=1e-15)


def test_shifted_pattern_peak_follows(rng):
    region = centered_pattern(rng)
    filt = train_filter(region, (12, 12), DcfParams(cosine_window=False))
    for dx, dy in [(3, 0), (0, -5), (7, 4), (-6, -2)]:
        resp = response_map(filt, np.roll(region, (dy, dx), axis=(0, 1)))
        assert resp.displacement() == (dx, dy)


def test_shift_equivariance_exact(rng):
    template = rng.standard_normal((20, 20))
    region = rng.uniform(size=(20, 20))
    filt = filter_from_template(template)
    base = response_map(filt, region)
    for dy, dx in rng.integers(-20, 20, size=(10, 2)):
        moved = response_map(filt, np.roll(region, (dy, dx), axis=(0, 1)))
        assert moved.peak == ((base.peak[0] + dx) % 20, (base.peak[1] + dy) % 20)


def test_response_is_linear_without_window(rng):
    filt = filter_from_template(rng.standard_normal((14, 14)))
    r1, r2 = rng.uniform(size=(2, 14, 14))
    a, b = 0.3, -1.7
    lhs = response_map(filt, a * r1 + b * r2).values
    rhs = a * response_map(filt, r1).values + b * response_map(filt, r2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_response_size_mismatch(rng):
    filt = train_filter(rng.uniform(size=(16, 16)), (4, 4))
    with pytest.raises(InvalidInputError):
        response_map(filt, rng.uniform(size=(16, 18)))


# -- scale search -----------------------------------------------------------

def scene(size, center=(160.0, 120.0), seed=4):
    rng = np.random.default_rng(seed)
    frame = background_texture(rng, (240, 320))
    tex = target_texture(rng, 64)
    box = BoundingBox.from_center(center[0], center[1], size, size)
    paste(frame, tex, box)
    return frame, box


def test_search_self_localizes():
    frame, box = scene(64)
    filt = train_at(frame, box, search_window_shape(box, 4.0), 4.0)
    found = multi_scale_search(filt, frame, (box.center[0] + 5, box.center[1] - 3), box,
                               ScaleSpec(factors=(1.0,)))
    assert math.dist(found.box.center, box.center) <= 1.0
    assert found.scale == 1.0 and found.box.size == box.size


def zoomed_view(seed, zoom):
    """320x240 camera view of a textured world, zoomed about the target."""
    rng = np.random.default_rng(seed)
    world = background_texture(rng, (480, 640))
    paste(world, target_texture(rng, 64), BoundingBox.from_center(320, 240, 64, 64))
    return extract_patch(world, BoundingBox.from_center(320, 240, 320 / zoom, 240 / zoom), (320, 240))


def zoom_filter(seed):
    box = BoundingBox.from_center(160, 120, 64, 64)
    return train_at(zoomed_view(seed, 1.0), box, search_window_shape(box, 4.0), 4.0), box


@pytest.mark.parametrize("zoom", [1.05, 0.95])
def test_search_picks_rescaled_target(zoom):
    filt, box = zoom_filter(0)
    found = multi_scale_search(filt, zoomed_view(0, zoom), box.center, box, ScaleSpec())
    assert found.scale == zoom
    assert found.box.w == pytest.approx(64 * (1 + 0.6 * (zoom - 1)))
    assert math.dist(found.box.center, box.center) <= 1.0


def test_zero_damping_keeps_size():
    filt, box = zoom_filter(0)
    found = multi_scale_search(filt, zoomed_view(0, 1.05), box.center, box, ScaleSpec(damping=0.0))
    assert found.scale == 1.05
    assert found.box.size == box.size


@pytest.mark.parametrize("seed", range(6))
def test_scale_penalty_holds_unscaled_target(seed):
    # raw peaks favor the smaller window by about one step; the penalty cancels that
    filt, box = zoom_filter(seed)
    found = multi_scale_search(filt, zoomed_view(seed, 1.0), box.center, box, ScaleSpec(penalty=0.95))
    assert found.scale == 1.0


def test_search_window_contains_result():
    frame, box = scene(64)
    filt = train_at(frame, box, search_window_shape(box, 4.0), 4.0)
    found = multi_scale_search(filt, frame, (30.0, 30.0), box, ScaleSpec())
    cx, cy = found.box.center
    win = found.window
    assert win.x <= cx <= win.x + win.w and win.y <= cy <= win.y + win.h


def test_scale_spec_validation():
    for bad in (dict(factors=(0.9, 1.1)), dict(factors=(1.0, -1.0)), dict(damping=1.5), dict(penalty=0.0)):
        with pytest.raises(InvalidInputError):
            ScaleSpec(**bad)
    assert ScaleSpec(damping=0.6).damped(1.05) == pytest.approx(1.03)


# -- interpolation ----------------------------------------------------------

def test_interpolation_endpoints_and_default_rate(rng):
    a = train_filter(rng.uniform(size=(16, 16)), (4, 4))
    b = train_filter(rng.uniform(size=(16, 16)), (4, 4))
    assert np.array_equal(interpolate_filter(a, b, 0.0).coeffs, b.coeffs)
    assert np.array_equal(interpolate_filter(a, b, 1.0).coeffs, a.coeffs)
    one = CorrelationFilter(np.ones((1, 4, 4), complex), None, 1.0, "raw")
    zero = CorrelationFilter(np.zeros((1, 4, 4), complex), None, 1.0, "raw")
    assert np.allclose(interpolate_filter(one, zero, 0.025).coeffs, 0.025)


def test_interpolation_is_convex(rng):
    a = train_filter(rng.uniform(size=(16, 16)), (4, 4))
    b = train_filter(rng.uniform(size=(16, 16)), (4, 4))
    mix = interpolate_filter(a, b, 0.3).coeffs
    for part in (np.real, np.imag):
        lo = np.minimum(part(a.coeffs), part(b.coeffs)) - 1e-15
        hi = np.maximum(part(a.coeffs), part(b.coeffs)) + 1e-15
        assert ((lo <= part(mix)) & (part(mix) <= hi)).all()


def test_interpolation_validation(rng):
    a = train_filter(rng.uniform(size=(16, 16)), (4, 4))
    b = train_filter(rng.uniform(size=(16, 18)), (4, 4))
    with pytest.raises(InvalidInputError):
        interpolate_filter(a, b, 0.5)
    with pytest.raises(InvalidInputError):
        interpolate_filter(a, a, 1.5)
