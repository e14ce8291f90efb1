"""Crop sampling and the two-view builder.

Two strategies: the uniform-ratio crop (a single linear scale drawn from
[0.5, 1], aspect preserved) and the classic area/aspect crop used as the
A/B baseline. Each training example becomes two independently cropped,
resized, and policy-augmented views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .policy import apply_policy
from .rng import Rng
from .transforms import resize_bilinear

__all__ = [
    "CropRect",
    "sample_uniform_crop",
    "sample_inception_crop",
    "full_crop",
    "make_two_views",
    "crop_ratio_stats",
]

INCEPTION_AREA_RANGE = (0.08, 1.0)
INCEPTION_LOG_ASPECT_RANGE = (math.log(3.0 / 4.0), math.log(4.0 / 3.0))


@dataclass(frozen=True)
class CropRect:
    x0: int
    y0: int
    h: int
    w: int

    def contained_in(self, height: int, width: int) -> bool:
        return (
            self.x0 >= 0
            and self.y0 >= 0
            and self.h >= 1
            and self.w >= 1
            and self.x0 + self.w <= width
            and self.y0 + self.h <= height
        )


def _check_size(height: int, width: int) -> None:
    if height < 2 or width < 2:
        raise ValueError(f"image too small to crop: {height}x{width}")


def sample_uniform_crop(rng: Rng, height: int, width: int) -> CropRect:
    """Aspect-preserving crop with linear scale r ~ Uniform[0.5, 1].

    Draw order: r, then x offset, then y offset.
    """
    _check_size(height, width)
    r = rng.uniform(0.5, 1.0)
    h = min(height, max(1, int(math.floor(r * height + 0.5))))
    w = min(width, max(1, int(math.floor(r * width + 0.5))))
    x0 = rng.range(width - w + 1)
    y0 = rng.range(height - h + 1)
    return CropRect(x0=x0, y0=y0, h=h, w=w)


def sample_inception_crop(rng: Rng, height: int, width: int, attempts: int = 10) -> CropRect:
    """Area-fraction [0.08, 1] and log-uniform aspect [3/4, 4/3] crop.

    Falls back to the centered largest square when no attempt fits.
    Draw order per attempt: area fraction, log-aspect, then offsets on accept.
    """
    _check_size(height, width)
    area = height * width
    for _ in range(attempts):
        a = rng.uniform(*INCEPTION_AREA_RANGE)
        aspect = math.exp(rng.uniform(*INCEPTION_LOG_ASPECT_RANGE))
        w = int(math.floor(math.sqrt(a * area * aspect) + 0.5))
        h = int(math.floor(math.sqrt(a * area / aspect) + 0.5))
        if 1 <= w <= width and 1 <= h <= height:
            x0 = rng.range(width - w + 1)
            y0 = rng.range(height - h + 1)
            return CropRect(x0=x0, y0=y0, h=h, w=w)
    side = min(height, width)
    return CropRect(x0=(width - side) // 2, y0=(height - side) // 2, h=side, w=side)


def full_crop(rng: Rng, height: int, width: int) -> CropRect:
    """Stub strategy: the whole image. Used for pass-through pipelines."""
    return CropRect(x0=0, y0=0, h=height, w=width)


_STRATEGIES: dict[str, Callable[[Rng, int, int], CropRect]] = {
    "uniform": sample_uniform_crop,
    "inception": sample_inception_crop,
    "full": full_crop,
}

CropStrategy = Callable[[Rng, int, int], CropRect]


def resolve_strategy(strategy: str | CropStrategy) -> CropStrategy:
    if callable(strategy):
        return strategy
    try:
        return _STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown crop strategy {strategy!r}") from None


def make_two_views(
    img: np.ndarray,
    strategy: str | CropStrategy,
    policy_source,
    out_side: int,
    rng: Rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Crop, resize, and augment the image twice, independently per view.

    `policy_source` provides `.sample(rng) -> list[PolicyOp]`; pass None to
    skip augmentation. Each view samples its own crop and its own policy.
    """
    if out_side < 8:
        raise ValueError(f"out_side must be >= 8, got {out_side}")
    sampler = resolve_strategy(strategy)
    h, w = img.shape[:2]
    views = []
    for _ in range(2):
        rect = sampler(rng, h, w)
        crop = img[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
        view = resize_bilinear(crop, out_side, out_side)
        if policy_source is not None:
            ops = policy_source.sample(rng)
            view = apply_policy(view, ops, rng)
        views.append(view)
    return views[0], views[1]


def crop_ratio_stats(strategy: str, samples: int, height: int, width: int, seed: int) -> dict:
    """Summary stats of the sampled crop scale.

    Uniform strategy reports the linear ratio h/H; inception reports the
    area fraction (h*w)/(H*W).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    sampler = resolve_strategy(strategy)
    rng = Rng(seed)
    vals = np.empty(samples, dtype=np.float64)
    for i in range(samples):
        rect = sampler(rng, height, width)
        if strategy == "inception":
            vals[i] = (rect.h * rect.w) / (height * width)
        else:
            vals[i] = rect.h / height
    return {
        "min": float(vals.min()),
        "max": float(vals.max()),
        "mean": float(vals.mean()),
        "std": float(vals.std()),
    }
