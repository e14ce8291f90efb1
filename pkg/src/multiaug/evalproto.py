"""Evaluation protocols: linear probe, label-fraction fine-tuning, top-k.

Both protocols consume a pre-trained model's online encoder. The linear
probe trains a single classifier layer on frozen features; fine-tuning
unfreezes a copy of the encoder and trains it end to end on a stratified
labeled subset. Heads train with plain SGD (momentum 0.9) on a cosine
schedule; trust-ratio scaling buys nothing at these batch sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import math

import numpy as np

from .cropping import full_crop
from .datasets import LabeledDataset, label_fraction_split
from .net import (
    Linear,
    ModelParams,
    backward_net,
    forward_net,
    init_params,
)
from .objective import softmax_cross_entropy
from .rng import Rng, derive_seed
from .transforms import resize_bilinear

__all__ = [
    "EvalReport",
    "extract_features",
    "train_linear_head",
    "linear_eval",
    "finetune_fraction",
    "topk_accuracy",
]


@dataclass(frozen=True)
class EvalReport:
    """Classification accuracy summary for one protocol run."""

    protocol: str
    top1: float
    top5: float | None
    per_class: list[float]
    config: dict

    def __post_init__(self) -> None:
        if not 0.0 <= self.top1 <= 1.0:
            raise ValueError("top1 must lie in [0, 1]")
        if self.top5 is not None and not self.top1 <= self.top5 <= 1.0:
            raise ValueError("need top1 <= top5 <= 1")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "top1": self.top1,
            "top5": self.top5,
            "per_class": self.per_class,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _encoder_side(mp: ModelParams) -> int:
    in_dim = mp.specs.encoder[0].in_dim
    side = int(round(math.sqrt(in_dim / 3)))
    if side * side * 3 != in_dim:
        raise ValueError(f"encoder input dim {in_dim} is not 3 * side^2")
    return side


def _dataset_tensor(ds: LabeledDataset, side: int) -> np.ndarray:
    """Full-frame crop, resize to the encoder's input side, scale to [0,1]."""
    rows = np.empty((len(ds.items), side * side * 3), dtype=np.float32)
    for i, (img, _) in enumerate(ds.items):
        rect = full_crop(None, img.shape[0], img.shape[1])
        view = img[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
        view = resize_bilinear(view, side, side)
        rows[i] = view.reshape(-1).astype(np.float32) / 255.0
    return rows


def _labels(ds: LabeledDataset) -> np.ndarray:
    return np.array([label for _, label in ds.items], dtype=np.int64)


def extract_features(mp: ModelParams, ds: LabeledDataset, batch_size: int = 256) -> np.ndarray:
    """Frozen eval-mode encoder features, one row per dataset item."""
    side = _encoder_side(mp)
    x = _dataset_tensor(ds, side)
    outs = []
    for start in range(0, x.shape[0], batch_size):
        h, _ = forward_net(mp.specs.encoder, mp.online["encoder"], x[start : start + batch_size], mode="eval")
        outs.append(h)
    return np.concatenate(outs, axis=0)


def _cosine(step: int, total: int, lr: float) -> float:
    return lr * 0.5 * (1.0 + math.cos(math.pi * step / total))


def _sgd_step(params: dict, grads: dict, bufs: dict, lr: float, momentum: float) -> None:
    for name in sorted(grads):
        buf = bufs.get(name)
        if buf is None:
            buf = bufs[name] = np.zeros_like(params[name])
        buf *= momentum
        buf += grads[name]
        params[name] -= lr * buf


def train_linear_head(
    features: np.ndarray,
    labels: np.ndarray,
    n_classes: int,
    epochs: int,
    lr: float,
    seed: int,
    batch_size: int = 256,
    momentum: float = 0.9,
) -> list[dict[str, np.ndarray]]:
    """SGD-momentum training of one Linear layer on fixed features.

    Returns the head as single-layer net params usable with forward_net.
    """
    n, dim = features.shape
    spec = (Linear(dim, n_classes),)
    head = init_params(spec, derive_seed(seed, 0))
    bufs: dict[str, np.ndarray] = {}
    batch_size = min(batch_size, n)
    steps_per_epoch = max(1, n // batch_size)
    total = epochs * steps_per_epoch
    rng = Rng(derive_seed(seed, 1))
    step = 0
    for _ in range(epochs):
        order = list(range(n))
        rng.shuffle(order)
        for b in range(steps_per_epoch):
            idx = order[b * batch_size : (b + 1) * batch_size]
            logits, trace = forward_net(spec, head, features[idx], mode="train")
            _, d_logits = softmax_cross_entropy(logits, labels[idx])
            _, grads = backward_net(spec, head, trace, d_logits)
            flat_p = {k: head[0][k] for k in grads[0]}
            flat_g = {k: grads[0][k] for k in grads[0]}
            _sgd_step(flat_p, flat_g, bufs, _cosine(step, total, lr), momentum)
            step += 1
    return head


def topk_accuracy(logits: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose label ranks in the top k logits.

    Equal logits rank by lower class index (stable order), so a fully
    tied row counts correct exactly when the label is among the first k
    class indices.
    """
    n_classes = logits.shape[1]
    if not 1 <= k <= n_classes:
        raise ValueError(f"k must lie in [1, {n_classes}], got {k}")
    ranked = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    labels = np.asarray(labels).reshape(-1, 1)
    return float((ranked == labels).any(axis=1).mean())


def _per_class_accuracy(logits: np.ndarray, labels: np.ndarray, n_classes: int) -> list[float]:
    pred = np.argmax(logits, axis=1)
    out = []
    for c in range(n_classes):
        mask = labels == c
        out.append(float((pred[mask] == c).mean()) if mask.any() else 0.0)
    return out


def _report(protocol: str, logits: np.ndarray, labels: np.ndarray, n_classes: int, config: dict) -> EvalReport:
    top1 = topk_accuracy(logits, labels, 1)
    top5 = topk_accuracy(logits, labels, 5) if n_classes > 5 else None
    return EvalReport(
        protocol=protocol,
        top1=top1,
        top5=top5,
        per_class=_per_class_accuracy(logits, labels, n_classes),
        config=config,
    )


def linear_eval(
    mp: ModelParams,
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
    epochs: int = 50,
    lr: float = 0.5,
    seed: int = 0,
    batch_size: int = 256,
) -> EvalReport:
    """Linear probe on frozen encoder features; never touches the encoder."""
    n_classes = train_ds.n_classes
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    feats = extract_features(mp, train_ds)
    head = train_linear_head(
        feats, _labels(train_ds), n_classes, epochs, lr, seed, batch_size=batch_size
    )
    spec = (Linear(feats.shape[1], n_classes),)
    test_feats = extract_features(mp, test_ds)
    logits, _ = forward_net(spec, head, test_feats, mode="eval")
    config = {"protocol": "linear", "epochs": epochs, "lr": lr, "seed": seed, "batch_size": batch_size}
    return _report("linear", logits, _labels(test_ds), n_classes, config)


def _copy_net_params(params: list[dict[str, np.ndarray]]) -> list[dict[str, np.ndarray]]:
    return [{k: v.copy() for k, v in layer.items()} for layer in params]


def finetune_fraction(
    mp: ModelParams,
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
    fraction: float,
    epochs: int = 30,
    lr: float = 0.02,
    seed: int = 0,
    batch_size: int = 256,
    momentum: float = 0.9,
) -> EvalReport:
    """Fine-tune an encoder copy plus a fresh head on a labeled fraction.

    The subset is the stratified label_fraction_split of train_ds; the
    input params are left untouched. fraction=1.0 trains on everything.
    """
    n_classes = train_ds.n_classes
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    subset, _ = label_fraction_split(train_ds, fraction, seed)
    side = _encoder_side(mp)
    x = _dataset_tensor(subset, side)
    y = _labels(subset)
    n = x.shape[0]

    enc_spec = mp.specs.encoder
    encoder = _copy_net_params(mp.online["encoder"])
    feat_dim = enc_spec[-1].out_dim
    head_spec = (Linear(feat_dim, n_classes),)
    head = init_params(head_spec, derive_seed(seed, 2))

    batch_size = max(2, min(batch_size, n))
    steps_per_epoch = max(1, n // batch_size)
    total = epochs * steps_per_epoch
    rng = Rng(derive_seed(seed, 3))
    bufs: dict[str, np.ndarray] = {}
    step = 0
    for _ in range(epochs):
        order = list(range(n))
        rng.shuffle(order)
        for b in range(steps_per_epoch):
            idx = order[b * batch_size : (b + 1) * batch_size]
            h, tr_enc = forward_net(enc_spec, encoder, x[idx], mode="train")
            logits, tr_head = forward_net(head_spec, head, h, mode="train")
            _, d_logits = softmax_cross_entropy(logits, y[idx])
            d_h, g_head = backward_net(head_spec, head, tr_head, d_logits)
            _, g_enc = backward_net(enc_spec, encoder, tr_enc, d_h)
            params: dict[str, np.ndarray] = {}
            grads: dict[str, np.ndarray] = {}
            for i, layer in enumerate(g_enc):
                for kind, g in layer.items():
                    params[f"encoder.{i}.{kind}"] = encoder[i][kind]
                    grads[f"encoder.{i}.{kind}"] = g
            for kind, g in g_head[0].items():
                params[f"head.0.{kind}"] = head[0][kind]
                grads[f"head.0.{kind}"] = g
            _sgd_step(params, grads, bufs, _cosine(step, total, lr), momentum)
            step += 1

    test_x = _dataset_tensor(test_ds, side)
    h, _ = forward_net(enc_spec, encoder, test_x, mode="eval")
    logits, _ = forward_net(head_spec, head, h, mode="eval")
    config = {
        "protocol": "finetune",
        "fraction": fraction,
        "labeled_items": n,
        "epochs": epochs,
        "lr": lr,
        "seed": seed,
        "batch_size": batch_size,
    }
    return _report("finetune", logits, _labels(test_ds), n_classes, config)
