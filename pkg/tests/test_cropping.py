"""Crop samplers, two-view builder, and crop-scale statistics."""

import numpy as np
import pytest

from multiaug.cropping import (
    CropRect,
    crop_ratio_stats,
    full_crop,
    make_two_views,
    sample_inception_crop,
    sample_uniform_crop,
)
from multiaug.policy import PolicyOp, RandAugmentConfig, RandAugmentSource
from multiaug.rng import Rng
from multiaug.transforms import TransformKind, resize_bilinear


class _StubRng:
    """Fixed-value stand-in: uniform() returns `r`, range() returns 0."""

    def __init__(self, r):
        self.r = r

    def uniform(self, lo, hi):
        return self.r

    def range(self, bound):
        return 0


def _img(seed=0, h=24, w=24):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def test_uniform_crop_forced_ratios():
    rect = sample_uniform_crop(_StubRng(1.0), 40, 60)
    assert rect == CropRect(x0=0, y0=0, h=40, w=60)
    rect = sample_uniform_crop(_StubRng(0.5), 100, 100)
    assert (rect.h, rect.w) == (50, 50)


def test_uniform_crop_containment_fuzz():
    rng = Rng(3)
    sizes = Rng(4)
    for _ in range(10**4):
        h = 2 + sizes.range(120)
        w = 2 + sizes.range(120)
        rect = sample_uniform_crop(rng, h, w)
        assert rect.contained_in(h, w)


def test_uniform_crop_ratio_statistics():
    stats = crop_ratio_stats("uniform", 10**5, 64, 64, seed=7)
    assert stats["min"] >= 0.5
    assert stats["max"] <= 1.0
    assert 0.745 <= stats["mean"] <= 0.755
    assert 0.139 <= stats["std"] <= 0.150


def test_inception_crop_aspect_within_rounding():
    rng = Rng(11)
    for _ in range(5000):
        rect = sample_inception_crop(rng, 64, 64)
        # accepted rects honor the aspect band up to +-0.5px rounding per side
        assert (rect.w + 0.5) / (rect.h - 0.5) >= 3 / 4
        assert (rect.w - 0.5) / (rect.h + 0.5) <= 4 / 3


def test_inception_crop_containment_fuzz():
    rng = Rng(5)
    sizes = Rng(6)
    for _ in range(10**4):
        h = 2 + sizes.range(120)
        w = 2 + sizes.range(120)
        rect = sample_inception_crop(rng, h, w)
        assert rect.contained_in(h, w)


def test_inception_fallback_center_square():
    rect = sample_inception_crop(Rng(0), 2, 100)
    assert rect == CropRect(x0=49, y0=0, h=2, w=2)


def test_crop_rejects_tiny_images():
    with pytest.raises(ValueError):
        sample_uniform_crop(Rng(0), 1, 50)
    with pytest.raises(ValueError):
        sample_inception_crop(Rng(0), 50, 1)


def test_full_crop_is_whole_image():
    assert full_crop(Rng(0), 7, 9) == CropRect(x0=0, y0=0, h=7, w=9)


def test_two_views_deterministic():
    img = _img(1)
    src = RandAugmentSource(RandAugmentConfig(n_ops=2, magnitude=9.0))
    a1, a2 = make_two_views(img, "uniform", src, 16, Rng(42))
    b1, b2 = make_two_views(img, "uniform", src, 16, Rng(42))
    assert np.array_equal(a1, b1) and np.array_equal(a2, b2)
    c1, _ = make_two_views(img, "uniform", src, 16, Rng(43))
    assert not np.array_equal(a1, c1)


def test_two_views_passthrough_stub():
    img = _img(2)
    v1, v2 = make_two_views(img, "full", None, 16, Rng(0))
    want = resize_bilinear(img, 16, 16)
    assert np.array_equal(v1, want) and np.array_equal(v2, want)


def test_two_views_differ_on_real_seeds():
    src = RandAugmentSource(RandAugmentConfig(n_ops=2, magnitude=9.0))
    collisions = 0
    for i in range(100):
        v1, v2 = make_two_views(_img(i), "uniform", src, 16, Rng(1000 + i))
        if np.array_equal(v1, v2):
            collisions += 1
    assert collisions == 0


def test_two_views_validates_out_side():
    with pytest.raises(ValueError):
        make_two_views(_img(), "uniform", None, 7, Rng(0))
    with pytest.raises(ValueError):
        make_two_views(_img(), "diagonal", None, 16, Rng(0))


def test_view_shape_and_dtype():
    v1, v2 = make_two_views(_img(3, 31, 17), "inception", None, 20, Rng(9))
    assert v1.shape == (20, 20, 3) and v2.shape == (20, 20, 3)
    assert v1.dtype == np.uint8


def test_crop_stats_inception_reports_area():
    stats = crop_ratio_stats("inception", 2000, 64, 64, seed=3)
    assert stats["min"] >= 0.05  # area fraction floor 0.08 minus rounding slack
    assert stats["max"] <= 1.0
    with pytest.raises(ValueError):
        crop_ratio_stats("uniform", 0, 64, 64, seed=0)
