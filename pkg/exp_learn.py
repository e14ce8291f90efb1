"""Scratch sweep harness for the desk-scale learning check. Not shipped."""

import json
import sys
import time

from multiaug.datasets import generate_shapes
from multiaug.evalproto import linear_eval
from multiaug.trainer import TrainConfig, run_pretraining


def main():
    seed = int(sys.argv[1])
    lr = float(sys.argv[2])
    tau = float(sys.argv[3])
    wd = float(sys.argv[4])
    warmup = int(sys.argv[5])
    strategy = sys.argv[6] if len(sys.argv) > 6 else "uniform"
    tag = sys.argv[7] if len(sys.argv) > 7 else "run"
    trust = float(sys.argv[8]) if len(sys.argv) > 8 else 1e-3
    momentum = float(sys.argv[9]) if len(sys.argv) > 9 else 0.9
    eps = float(sys.argv[10]) if len(sys.argv) > 10 else 1e-9

    train = generate_shapes(seed=100, n_per_class=500, image_side=32)
    test = generate_shapes(seed=200, n_per_class=125, image_side=32)

    cfg = TrainConfig(
        epochs=100,
        batch_size=256,
        view_side=32,
        crop_strategy=strategy,
        seed=seed,
        base_lr=lr,
        tau_base=tau,
        weight_decay=wd,
        warmup_steps=warmup,
        trust_coefficient=trust,
        momentum=momentum,
        optimizer_eps=eps,
        checkpoint_path=f"/tmp/ckpt_{tag}.mass",
    )
    t0 = time.time()
    mp, log = run_pretraining(train, cfg)
    train_secs = time.time() - t0

    rep = linear_eval(mp, train, test, epochs=200, lr=0.5, batch_size=64, seed=seed)

    print(
        json.dumps(
            {
                "tag": tag,
                "seed": seed,
                "lr": lr,
                "tau": tau,
                "wd": wd,
                "warmup": warmup,
                "trust": trust,
                "momentum": momentum,
                "eps": eps,
                "strategy": strategy,
                "train_secs": round(train_secs, 1),
                "loss_curve": [round(log[e]["loss"], 3) for e in range(0, 100, 10)],
                "emb_std_last": round(log[-1]["emb_std"], 4),
                "lineval_top1": rep.top1,
            }
        )
    )


if __name__ == "__main__":
    main()
