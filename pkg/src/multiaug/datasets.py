"""Labeled image sources: synthetic shapes, directory loader, label splits.

The synthetic set puts class identity in geometry (circle, square,
triangle, plus-cross) while color, position, and size are random, so the
color-heavy augmentations are label-preserving by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ppm import decode_ppm
from .rng import Rng, derive_seed

__all__ = [
    "LabeledDataset",
    "EmptyDirectory",
    "DecodeFailure",
    "generate_shapes",
    "load_labeled_dir",
    "label_fraction_split",
]

SHAPE_CLASS_NAMES = ("circle", "square", "triangle", "plus")


class EmptyDirectory(ValueError):
    pass


class DecodeFailure(ValueError):
    def __init__(self, path, cause: str):
        super().__init__(f"failed to decode {path}: {cause}")
        self.path = path


@dataclass
class LabeledDataset:
    items: list[tuple[np.ndarray, int]]
    class_names: list[str]

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class _ShapeParams:
    cx: int
    cy: int
    size: float
    color: tuple[int, int, int]
    background: tuple[int, int, int]


def _draw_shape_params(rng: Rng, image_side: int) -> _ShapeParams:
    # size first, then center (within margins), then background, then color
    size = rng.uniform(image_side / 6.0, image_side / 3.0)
    margin = int(math.ceil(size))
    cx = margin + rng.range(image_side - 2 * margin)
    cy = margin + rng.range(image_side - 2 * margin)
    background = tuple(rng.range(61) for _ in range(3))
    while True:
        color = tuple(rng.range(256) for _ in range(3))
        if max(color) >= 200:
            break
    return _ShapeParams(cx=cx, cy=cy, size=size, color=color, background=background)


def _render_shape(class_idx: int, p: _ShapeParams, image_side: int) -> np.ndarray:
    img = np.empty((image_side, image_side, 3), dtype=np.uint8)
    img[:, :] = p.background
    ys, xs = np.meshgrid(np.arange(image_side), np.arange(image_side), indexing="ij")
    dx = xs - p.cx
    dy = ys - p.cy
    s = p.size
    if class_idx == 0:  # circle
        mask = dx * dx + dy * dy <= s * s
    elif class_idx == 1:  # square
        mask = (np.abs(dx) <= s) & (np.abs(dy) <= s)
    elif class_idx == 2:  # upward triangle: width grows linearly from apex
        t = (dy + s) / (2.0 * s)
        mask = (t >= 0.0) & (t <= 1.0) & (np.abs(dx) <= t * s)
    else:  # plus-cross: two 2s x (2s/3) bars
        bar = s / 3.0
        mask = ((np.abs(dx) <= bar) & (np.abs(dy) <= s)) | ((np.abs(dy) <= bar) & (np.abs(dx) <= s))
    img[mask] = p.color
    return img


def generate_shapes(seed: int, n_per_class: int, image_side: int) -> LabeledDataset:
    """Deterministic 4-class synthetic dataset on dark backgrounds."""
    if image_side < 16:
        raise ValueError(f"image_side must be >= 16, got {image_side}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = Rng(seed)
    items = []
    for class_idx in range(len(SHAPE_CLASS_NAMES)):
        for _ in range(n_per_class):
            params = _draw_shape_params(rng, image_side)
            items.append((_render_shape(class_idx, params, image_side), class_idx))
    return LabeledDataset(items=items, class_names=list(SHAPE_CLASS_NAMES))


def load_labeled_dir(root) -> LabeledDataset:
    """Load `<root>/<class_name>/*.ppm`, class index = lexicographic rank."""
    root = Path(root)
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir()) if root.is_dir() else []
    if not class_dirs:
        raise EmptyDirectory(f"no class subdirectories under {root}")
    items = []
    for idx, d in enumerate(class_dirs):
        for f in sorted(d.glob("*.ppm")):
            try:
                img = decode_ppm(f.read_bytes())
            except ValueError as e:
                raise DecodeFailure(f, str(e)) from e
            items.append((img, idx))
    if not items:
        raise EmptyDirectory(f"no .ppm files under {root}")
    return LabeledDataset(items=items, class_names=[d.name for d in class_dirs])


def label_fraction_split(
    ds: LabeledDataset, fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified labeled subset: ceil(fraction * class_count) per class.

    Selection is a seeded per-class shuffle; both halves preserve the
    original item order. subset + remainder partition the dataset.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    by_class: dict[int, list[int]] = {}
    for i, (_, label) in enumerate(ds.items):
        by_class.setdefault(label, []).append(i)
    chosen: set[int] = set()
    for label in sorted(by_class):
        idxs = list(by_class[label])
        Rng(derive_seed(seed, label)).shuffle(idxs)
        take = math.ceil(fraction * len(idxs))
        chosen.update(idxs[:take])
    subset = [ds.items[i] for i in range(len(ds.items)) if i in chosen]
    rest = [ds.items[i] for i in range(len(ds.items)) if i not in chosen]
    return (
        LabeledDataset(items=subset, class_names=list(ds.class_names)),
        LabeledDataset(items=rest, class_names=list(ds.class_names)),
    )
