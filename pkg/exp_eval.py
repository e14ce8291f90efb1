"""Scratch: probe linear-eval protocol variants on saved checkpoints."""

import json
import sys

import numpy as np

from multiaug.datasets import generate_shapes
from multiaug.evalproto import (
    _dataset_tensor,
    _labels,
    extract_features,
    linear_eval,
    topk_accuracy,
    train_linear_head,
)
from multiaug.net import Linear, forward_net
from multiaug.trainer import load_pretrained

train = generate_shapes(seed=100, n_per_class=500, image_side=32)
test = generate_shapes(seed=200, n_per_class=125, image_side=32)


def head_probe(feats, tfeats, tag, epochs, lr, batch):
    head = train_linear_head(feats, _labels(train), 4, epochs, lr, seed=0, batch_size=batch)
    spec = (Linear(feats.shape[1], 4),)
    logits, _ = forward_net(spec, head, tfeats, mode="eval")
    top1 = topk_accuracy(logits, _labels(test), 1)
    print(json.dumps({"tag": tag, "epochs": epochs, "lr": lr, "batch": batch, "top1": round(top1, 4)}), flush=True)
    return top1


which = sys.argv[1] if len(sys.argv) > 1 else "all"

if which in ("raw", "all"):
    raw_tr = _dataset_tensor(train, 32)
    raw_te = _dataset_tensor(test, 32)
    for ep, lr, b in [(100, 1.0, 256), (300, 1.0, 256), (300, 0.1, 64)]:
        head_probe(raw_tr, raw_te, "rawpixel", ep, lr, b)

for tag in ("d", "e"):
    if which not in (tag, "all"):
        continue
    mp = load_pretrained(f"/tmp/ckpt_{tag}.mass")
    feats = extract_features(mp, train)
    tfeats = extract_features(mp, test)
    print(json.dumps({"tag": tag, "feat_std": round(float(feats.std()), 4)}), flush=True)
    for ep, lr, b in [(100, 1.0, 256), (300, 1.0, 256), (100, 2.0, 256), (200, 0.5, 64), (300, 2.0, 128)]:
        head_probe(feats, tfeats, tag, ep, lr, b)
