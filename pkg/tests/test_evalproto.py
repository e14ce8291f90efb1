"""Linear probe, fine-tuning, and top-k ranking behavior."""

import json

import numpy as np
import pytest

from multiaug.datasets import LabeledDataset, generate_shapes
from multiaug.evalproto import (
    EvalReport,
    extract_features,
    finetune_fraction,
    linear_eval,
    topk_accuracy,
    train_linear_head,
)
from multiaug.net import (
    BatchNorm,
    Linear,
    NetSpecs,
    ReLU,
    flatten_params,
    forward_net,
    init_model_params,
)



def _tiny_model(side=16, feat=6, seed=7):
    in_dim = side * side * 3
    specs = NetSpecs(
        encoder=(Linear(in_dim, 16), BatchNorm(16), ReLU(), Linear(16, feat)),
        projector=(Linear(feat, 8), BatchNorm(8), ReLU(), Linear(8, 4)),
        predictor=(Linear(4, 8), BatchNorm(8), ReLU(), Linear(8, 4)),
    )
    return init_model_params(specs, seed=seed)


def _random_ds(n, n_classes, side=16, seed=0):
    rng = np.random.default_rng(seed)
    items = [
        (rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8), i % n_classes)
        for i in range(n)
    ]
    names = tuple(f"c{i}" for i in range(n_classes))
    return LabeledDataset(items=items, class_names=names)


def test_separable_features_reach_perfect_top1():
    rng = np.random.default_rng(3)
    labels = np.arange(200) % 4
    feats = np.eye(4, dtype=np.float32)[labels] * 2.0
    feats += rng.normal(0, 0.05, feats.shape).astype(np.float32)
    head = train_linear_head(feats, labels, 4, epochs=20, lr=0.5, seed=0)
    logits, _ = forward_net((Linear(4, 4),), head, feats, mode="eval")
    assert topk_accuracy(logits, labels, 1) == 1.0


def test_uninformative_features_sit_near_chance():
    rng = np.random.default_rng(5)
    feats = rng.normal(size=(400, 8)).astype(np.float32)
    labels = rng.integers(0, 4, size=400)
    head = train_linear_head(feats, labels, 4, epochs=10, lr=0.5, seed=0)
    fresh = rng.normal(size=(400, 8)).astype(np.float32)
    fresh_labels = rng.integers(0, 4, size=400)
    logits, _ = forward_net((Linear(8, 4),), head, fresh, mode="eval")
    assert abs(topk_accuracy(logits, fresh_labels, 1) - 0.25) < 0.10


def test_topk_full_k_is_always_one():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(50, 6))
    labels = rng.integers(0, 6, size=50)
    assert topk_accuracy(logits, labels, 6) == 1.0


def test_topk_monotone_in_k():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(200, 6))
    labels = rng.integers(0, 6, size=200)
    accs = [topk_accuracy(logits, labels, k) for k in range(1, 7)]
    assert all(a <= b for a, b in zip(accs, accs[1:]))


def test_topk_ties_rank_by_class_index():
    logits = np.zeros((2, 4))
    labels = np.array([0, 1])
    # fully tied rows: top-1 is class 0, top-2 is classes {0, 1}
    assert topk_accuracy(logits, labels, 1) == 0.5
    assert topk_accuracy(logits, labels, 2) == 1.0


def test_topk_rejects_bad_k():
    logits = np.zeros((2, 4))
    labels = np.array([0, 1])
    for k in (0, 5, -1):
        with pytest.raises(ValueError):
            topk_accuracy(logits, labels, k)


def test_linear_eval_reports_top5_only_beyond_five_classes():
    mp = _tiny_model()
    four = _random_ds(40, 4)
    rep4 = linear_eval(mp, four, four, epochs=2, lr=0.1)
    assert rep4.top5 is None
    six = _random_ds(60, 6)
    rep6 = linear_eval(mp, six, six, epochs=2, lr=0.1)
    assert rep6.top5 is not None and rep6.top1 <= rep6.top5 <= 1.0


def test_linear_eval_never_mutates_model():
    mp = _tiny_model()
    before = {k: v.copy() for k, v in flatten_params(mp).items()}
    linear_eval(mp, _random_ds(40, 4), _random_ds(20, 4, seed=1), epochs=3, lr=0.2)
    after = flatten_params(mp)
    assert before.keys() == after.keys()
    for k in before:
        assert np.array_equal(before[k], after[k]), k


def test_finetune_never_mutates_model():
    mp = _tiny_model()
    before = {k: v.copy() for k, v in flatten_params(mp).items()}
    finetune_fraction(mp, _random_ds(40, 4), _random_ds(20, 4, seed=1), 0.5, epochs=2, lr=0.01)
    after = flatten_params(mp)
    for k in before:
        assert np.array_equal(before[k], after[k]), k


def test_finetune_counts_stratified_labeled_items():
    mp = _tiny_model()
    train = generate_shapes(seed=11, n_per_class=50, image_side=16)
    test = generate_shapes(seed=12, n_per_class=5, image_side=16)
    rep = finetune_fraction(mp, train, test, 0.1, epochs=1, lr=0.01)
    assert rep.config["labeled_items"] == 20
    assert rep.config["fraction"] == 0.1
    full = finetune_fraction(mp, train, test, 1.0, epochs=1, lr=0.01)
    assert full.config["labeled_items"] == 200


def test_linear_eval_deterministic():
    mp = _tiny_model()
    train = _random_ds(40, 4)
    test = _random_ds(20, 4, seed=1)
    a = linear_eval(mp, train, test, epochs=3, lr=0.2, seed=9)
    b = linear_eval(mp, train, test, epochs=3, lr=0.2, seed=9)
    assert a.top1 == b.top1 and a.per_class == b.per_class


def test_finetune_deterministic():
    mp = _tiny_model()
    train = _random_ds(40, 4)
    test = _random_ds(20, 4, seed=1)
    a = finetune_fraction(mp, train, test, 0.5, epochs=2, lr=0.01, seed=9)
    b = finetune_fraction(mp, train, test, 0.5, epochs=2, lr=0.01, seed=9)
    assert a.top1 == b.top1 and a.per_class == b.per_class


def test_linear_eval_balanced_top1_matches_per_class_mean():
    mp = _tiny_model()
    train = generate_shapes(seed=21, n_per_class=30, image_side=16)
    test = generate_shapes(seed=22, n_per_class=10, image_side=16)
    rep = linear_eval(mp, train, test, epochs=3, lr=0.2)
    assert len(rep.per_class) == 4
    assert all(0.0 <= a <= 1.0 for a in rep.per_class)
    assert rep.top1 == pytest.approx(float(np.mean(rep.per_class)))


def test_extract_features_resizes_to_encoder_side():
    mp = _tiny_model(side=16)
    ds = _random_ds(10, 2, side=24)
    feats = extract_features(mp, ds)
    assert feats.shape == (10, 6)
    assert np.isfinite(feats).all()


def test_extract_features_rejects_non_image_input_dim():
    specs = NetSpecs(
        encoder=(Linear(100, 8),),
        projector=(Linear(8, 4),),
        predictor=(Linear(4, 4),),
    )
    mp = init_model_params(specs, seed=0)
    with pytest.raises(ValueError):
        extract_features(mp, _random_ds(4, 2))


def test_eval_protocols_require_two_classes():
    mp = _tiny_model()
    rng = np.random.default_rng(0)
    items = [(rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8), 0) for _ in range(8)]
    one = LabeledDataset(items=items, class_names=("only",))
    with pytest.raises(ValueError):
        linear_eval(mp, one, one, epochs=1, lr=0.1)
    with pytest.raises(ValueError):
        finetune_fraction(mp, one, one, 0.5, epochs=1, lr=0.1)


def test_eval_report_validation_and_serialization():
    with pytest.raises(ValueError):
        EvalReport(protocol="linear", top1=1.2, top5=None, per_class=[], config={})
    with pytest.raises(ValueError):
        EvalReport(protocol="linear", top1=0.8, top5=0.5, per_class=[], config={})
    rep = EvalReport(protocol="linear", top1=0.5, top5=None, per_class=[0.5, 0.5], config={"lr": 0.1})
    loaded = json.loads(rep.to_json())
    assert loaded == rep.to_dict()
    assert loaded["top1"] == 0.5 and loaded["config"]["lr"] == 0.1


def test_head_training_shuffles_with_own_stream():
    # seed feeds both init and batch order: distinct seeds, distinct heads
    rng = np.random.default_rng(8)
    feats = rng.normal(size=(64, 5)).astype(np.float32)
    labels = rng.integers(0, 3, size=64)
    a = train_linear_head(feats, labels, 3, epochs=2, lr=0.3, seed=0, batch_size=16)
    b = train_linear_head(feats, labels, 3, epochs=2, lr=0.3, seed=1, batch_size=16)
    assert not np.array_equal(a[0]["weight"], b[0]["weight"])
