"""Augmentation policy engine: magnitude calibration, random sampling, files.

A policy is an ordered list of (transform kind, magnitude, probability)
triples applied sequentially to one image. The default sampler draws N
kinds uniformly (with replacement) from the 18-transform search space at a
shared magnitude M on a 0..10 scale; pre-searched policies load from JSON
files instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import transforms as tr
from .rng import Rng
from .transforms import TransformKind

__all__ = [
    "PolicyOp",
    "RandAugmentConfig",
    "RandAugmentSource",
    "FixedPolicySource",
    "ParseError",
    "UnknownKind",
    "OutOfRange",
    "magnitude_to_params",
    "sample_randaugment",
    "apply_policy",
    "load_policy_file",
]

FULL_SEARCH_SPACE: tuple[TransformKind, ...] = tuple(TransformKind)

# Kinds whose zero-magnitude parameters resolve to exact identities. The
# parameterless kinds (AutoContrast, Equalize, Invert, ColorDrop) and
# RandBlur (sigma floor 0.1) act at full strength regardless of magnitude.
ZERO_MAGNITUDE_IDENTITY_KINDS: tuple[TransformKind, ...] = (
    TransformKind.Posterize,
    TransformKind.Solarize,
    TransformKind.SolarizeAdd,
    TransformKind.Sharpness,
    TransformKind.Color,
    TransformKind.ShearX,
    TransformKind.ShearY,
    TransformKind.TranslateX,
    TransformKind.TranslateY,
    TransformKind.RandBrightness,
    TransformKind.RandContrast,
    TransformKind.RandSaturation,
    TransformKind.RandHue,
)


class ParseError(ValueError):
    pass


class UnknownKind(ValueError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class PolicyOp:
    kind: TransformKind
    magnitude: float
    probability: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.magnitude <= 10.0:
            raise OutOfRange(f"magnitude must be in [0, 10], got {self.magnitude}")
        if not 0.0 <= self.probability <= 1.0:
            raise OutOfRange(f"probability must be in [0, 1], got {self.probability}")


@dataclass
class RandAugmentConfig:
    n_ops: int = 2
    magnitude: float = 9.0
    search_space: tuple[TransformKind, ...] = field(default=FULL_SEARCH_SPACE)

    def __post_init__(self):
        if self.n_ops < 1:
            raise ValueError(f"n_ops must be >= 1, got {self.n_ops}")
        self.search_space = tuple(self.search_space)
        if not self.search_space:
            raise ValueError("search space must be non-empty")
        if len(set(self.search_space)) != len(self.search_space):
            raise ValueError("search space must be duplicate-free")
        if not 0.0 <= self.magnitude <= 10.0:
            raise OutOfRange(f"magnitude must be in [0, 10], got {self.magnitude}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def magnitude_to_params(kind: TransformKind, magnitude: float, rng: Rng) -> dict:
    """Resolve a 0..10 magnitude into concrete transform parameters.

    Signed parameters flip on a fair coin from `rng`; the Rand* family draws
    its factor uniformly from a magnitude-scaled interval. Parameterless
    kinds consume no randomness.
    """
    if not 0.0 <= magnitude <= 10.0:
        raise OutOfRange(f"magnitude must be in [0, 10], got {magnitude}")
    lam = magnitude / 10.0
    if kind in (TransformKind.AutoContrast, TransformKind.Equalize, TransformKind.Invert, TransformKind.ColorDrop):
        return {}
    if kind is TransformKind.Posterize:
        return {"bits": 8 - _round_half_up(4.0 * lam)}
    if kind is TransformKind.Solarize:
        return {"threshold": 256 - _round_half_up(256.0 * lam)}
    if kind is TransformKind.SolarizeAdd:
        return {"add": _round_half_up(110.0 * lam)}
    if kind in (TransformKind.Sharpness, TransformKind.Color):
        sign = 1.0 if rng.next_f64() < 0.5 else -1.0
        return {"factor": 1.0 + sign * 0.9 * lam}
    if kind in (TransformKind.RandBrightness, TransformKind.RandContrast, TransformKind.RandSaturation):
        return {"factor": max(0.0, rng.uniform(1.0 - 0.8 * lam, 1.0 + 0.8 * lam))}
    if kind is TransformKind.RandHue:
        return {"delta": rng.uniform(-0.1 * lam, 0.1 * lam)}
    if kind in (TransformKind.ShearX, TransformKind.ShearY, TransformKind.TranslateX, TransformKind.TranslateY):
        sign = 1.0 if rng.next_f64() < 0.5 else -1.0
        return {"amount": sign * 0.3 * lam}
    if kind is TransformKind.RandBlur:
        return {"sigma": rng.uniform(0.1, 0.1 + 1.9 * lam)}
    raise UnknownKind(f"no parameter mapping for {kind}")


def _apply_kind(img: np.ndarray, kind: TransformKind, params: dict) -> np.ndarray:
    if kind is TransformKind.AutoContrast:
        return tr.autocontrast(img)
    if kind is TransformKind.Equalize:
        return tr.equalize(img)
    if kind is TransformKind.Invert:
        return tr.invert(img)
    if kind is TransformKind.ColorDrop:
        return tr.color_drop(img)
    if kind is TransformKind.Posterize:
        return tr.posterize(img, params["bits"])
    if kind is TransformKind.Solarize:
        return tr.solarize(img, params["threshold"])
    if kind is TransformKind.SolarizeAdd:
        return tr.solarize_add(img, params["add"])
    if kind is TransformKind.Sharpness:
        return tr.adjust(tr.VARIANT_SHARPNESS, img, params["factor"])
    if kind in (TransformKind.Color, TransformKind.RandSaturation):
        return tr.adjust(tr.VARIANT_SATURATION, img, params["factor"])
    if kind is TransformKind.RandBrightness:
        return tr.adjust(tr.VARIANT_BRIGHTNESS, img, params["factor"])
    if kind is TransformKind.RandContrast:
        return tr.adjust(tr.VARIANT_CONTRAST, img, params["factor"])
    if kind is TransformKind.RandHue:
        return tr.hue_shift(img, params["delta"])
    if kind is TransformKind.RandBlur:
        return tr.gaussian_blur(img, params["sigma"])
    return tr.affine_sample(img, kind.name, params["amount"])


def sample_randaugment(cfg: RandAugmentConfig, rng: Rng) -> list[PolicyOp]:
    """N uniform draws with replacement from the search space, probability 1."""
    return [
        PolicyOp(cfg.search_space[rng.range(len(cfg.search_space))], cfg.magnitude, 1.0)
        for _ in range(cfg.n_ops)
    ]


def apply_policy(img: np.ndarray, ops: list[PolicyOp], rng: Rng) -> np.ndarray:
    """Apply ops in order; each op costs exactly one skip-draw, applied or not.

    Parameter draws happen only for ops that fire, so streams stay
    predictable under probability changes.
    """
    for op in ops:
        u = rng.next_f64()
        if u < op.probability:
            params = magnitude_to_params(op.kind, op.magnitude, rng)
            img = _apply_kind(img, op.kind, params)
    return img


class RandAugmentSource:
    """Per-view policy source that samples fresh (N, M) ops each call."""

    def __init__(self, cfg: RandAugmentConfig):
        self.cfg = cfg

    def sample(self, rng: Rng) -> list[PolicyOp]:
        return sample_randaugment(self.cfg, rng)


class FixedPolicySource:
    """Pre-searched sub-policies; each call picks one uniformly."""

    def __init__(self, subpolicies: list[list[PolicyOp]]):
        if not subpolicies:
            raise ValueError("need at least one sub-policy")
        self.subpolicies = subpolicies

    def sample(self, rng: Rng) -> list[PolicyOp]:
        return self.subpolicies[rng.range(len(self.subpolicies))]


_KIND_BY_NAME = {k.name: k for k in TransformKind}


def load_policy_file(path) -> list[list[PolicyOp]]:
    """Parse a policy JSON document.

    Schema: {"subpolicies": [[{"kind": str, "prob": num, "magnitude": num}, ...], ...]}
    Kind names must match the TransformKind spelling exactly.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict) or "subpolicies" not in doc:
        raise ParseError('expected a top-level object with a "subpolicies" key')
    subs = doc["subpolicies"]
    if not isinstance(subs, list):
        raise ParseError('"subpolicies" must be a list')
    out: list[list[PolicyOp]] = []
    for si, sub in enumerate(subs):
        if not isinstance(sub, list):
            raise ParseError(f"subpolicy {si} must be a list of ops")
        ops = []
        for oi, op in enumerate(sub):
            if not isinstance(op, dict):
                raise ParseError(f"op {si}/{oi} must be an object")
            try:
                name = op["kind"]
                prob = float(op["prob"])
                mag = float(op["magnitude"])
            except KeyError as e:
                raise ParseError(f"op {si}/{oi} missing field {e.args[0]!r}") from None
            if name not in _KIND_BY_NAME:
                raise UnknownKind(f"op {si}/{oi}: unknown transform kind {name!r}")
            if not 0.0 <= prob <= 1.0:
                raise OutOfRange(f"op {si}/{oi}: prob {prob} outside [0, 1]")
            if not 0.0 <= mag <= 10.0:
                raise OutOfRange(f"op {si}/{oi}: magnitude {mag} outside [0, 10]")
            ops.append(PolicyOp(_KIND_BY_NAME[name], mag, prob))
        out.append(ops)
    return out
