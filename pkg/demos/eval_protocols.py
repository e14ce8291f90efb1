"""Score a pre-trained checkpoint under both evaluation protocols.

Loads the checkpoint written by tiny_pretrain.py, then compares: a linear
head on frozen features (the standard probe), the same probe on a
randomly initialized encoder (the floor any pre-training must beat), and
end-to-end fine-tuning with only 10% of the labels (the small-label
regime pre-training exists for).

Run from the repository root:

    python3 demos/tiny_pretrain.py demo.mass
    python3 demos/eval_protocols.py demo.mass
"""

import sys

from multiaug.datasets import generate_shapes
from multiaug.evalproto import extract_features, finetune_fraction, linear_eval
from multiaug.net import build_default_nets, init_model_params
from multiaug.rng import derive_seed
from multiaug.trainer import load_pretrained

if len(sys.argv) != 2:
    sys.exit("usage: python3 demos/eval_protocols.py <checkpoint.mass>")

mp = load_pretrained(sys.argv[1])
train = generate_shapes(seed=100, n_per_class=120, image_side=32)
test = generate_shapes(seed=200, n_per_class=40, image_side=32)

feats = extract_features(mp, test)
print(f"features: {feats.shape[0]} x {feats.shape[1]}, std {feats.std():.4f}")

probe = linear_eval(mp, train, test, epochs=100, lr=0.2, seed=0, batch_size=64)
print(f"linear probe, pre-trained encoder:  top-1 {probe.top1:.3f}")

random_mp = init_model_params(build_default_nets(32), derive_seed(1234, 0))
floor = linear_eval(random_mp, train, test, epochs=100, lr=0.2, seed=0, batch_size=64)
print(f"linear probe, random encoder:       top-1 {floor.top1:.3f}")

ft = finetune_fraction(
    mp, train, test, fraction=0.1, epochs=100, lr=0.05, seed=0, batch_size=32
)
print(f"fine-tune on 10% of labels:         top-1 {ft.top1:.3f}")
print(f"  ({ft.config['labeled_items']} labeled images used)")

print("\nper-class accuracy under the fine-tune protocol:")
for name, acc in zip(test.class_names, ft.per_class):
    print(f"  {name:<10} {acc:.3f}")
