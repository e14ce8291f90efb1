"""Command-line surface: augment, cropstats, pretrain, lineval, finetune, bench.

Every command prints a JSON document to stdout and is deterministic in
its file outputs for a fixed --seed (timing fields excepted). Exit codes:
0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cropping import crop_ratio_stats, resolve_strategy, sample_uniform_crop
from .datasets import generate_shapes, load_labeled_dir
from .evalproto import finetune_fraction, linear_eval
from .policy import PolicyOp, RandAugmentConfig, RandAugmentSource, apply_policy
from .ppm import decode_ppm, encode_ppm
from .rng import Rng, derive_seed
from .trainer import TrainConfig, load_pretrained, run_pretraining
from .transforms import TransformKind, resize_bilinear

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fraction01(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction must lie in (0, 1], got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _print_json(doc: dict, path: str | None = None) -> None:
    text = json.dumps(doc, indent=2)
    print(text)
    if path:
        Path(path).write_text(text + "\n")


def _build_dataset(desc: dict):
    kind = desc.get("kind")
    if kind == "shapes":
        return generate_shapes(
            seed=desc.get("seed", 0),
            n_per_class=desc.get("n_per_class", 500),
            image_side=desc.get("side", 32),
        )
    if kind == "dir":
        return load_labeled_dir(desc["path"])
    raise ValueError(f"unknown data descriptor kind: {kind!r}")


def _eval_datasets(args):
    """Train/test dataset pair for the two evaluation commands."""
    if args.train_dir or args.test_dir:
        if not (args.train_dir and args.test_dir):
            raise ValueError("--train-dir and --test-dir must be given together")
        return load_labeled_dir(args.train_dir), load_labeled_dir(args.test_dir)
    train = generate_shapes(args.train_seed, args.train_per_class, args.side)
    test = generate_shapes(args.test_seed, args.test_per_class, args.side)
    return train, test


def _add_eval_data_flags(p: _Parser) -> None:
    p.add_argument("--train-dir", help="labeled train directory (class subdirs of .ppm)")
    p.add_argument("--test-dir", help="labeled test directory (class subdirs of .ppm)")
    p.add_argument("--train-per-class", type=_positive_int, default=500,
                   help="synthetic train images per class (default 500)")
    p.add_argument("--test-per-class", type=_positive_int, default=125,
                   help="synthetic test images per class (default 125)")
    p.add_argument("--side", type=_positive_int, default=32,
                   help="synthetic image side (default 32)")
    p.add_argument("--train-seed", type=int, default=100,
                   help="synthetic train dataset seed (default 100)")
    p.add_argument("--test-seed", type=int, default=200,
                   help="synthetic test dataset seed (default 200)")


# ---------------------------------------------------------------- augment


def cmd_augment(args) -> int:
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.input:
        paths = sorted(Path(args.input).glob("*.ppm"))
        if not paths:
            raise ValueError(f"no .ppm files in {args.input}")
        images = [(p.stem, decode_ppm(p.read_bytes())) for p in paths]
    else:
        per_class = math.ceil(args.synthetic / 4)
        ds = generate_shapes(args.seed, per_class, args.image_side)
        images = [
            (f"shape{i:04d}_{ds.class_names[label]}", img)
            for i, (img, label) in enumerate(ds.items[: args.synthetic])
        ]
    strategy = resolve_strategy("full" if args.full_crop else args.strategy)
    use_policy = args.n > 0 and args.m > 0
    source = RandAugmentSource(RandAugmentConfig(n_ops=args.n, magnitude=args.m)) if use_policy else None

    def augment_one(task):
        # each image index owns a derived seed: thread count cannot alter outputs
        i, stem, img = task
        rng = Rng(derive_seed(args.seed, i))
        for v in range(args.views):
            rect = strategy(rng, img.shape[0], img.shape[1])
            view = img[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
            view = resize_bilinear(view, args.view_side, args.view_side)
            if source is not None:
                view = apply_policy(view, source.sample(rng), rng)
            (out_dir / f"{stem}_view{v}.ppm").write_bytes(encode_ppm(view))
        return args.views

    tasks = [(i, stem, img) for i, (stem, img) in enumerate(images)]
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            count = sum(pool.map(augment_one, tasks))
    else:
        count = sum(augment_one(t) for t in tasks)
    policy = {"n": args.n, "m": args.m} if use_policy else None
    _print_json({"count": count, "seed": args.seed, "policy": policy})
    return 0


# -------------------------------------------------------------- cropstats


def cmd_cropstats(args) -> int:
    stats = crop_ratio_stats(args.strategy, args.samples, args.height, args.width, args.seed)
    _print_json(stats)
    return 0


# --------------------------------------------------------------- pretrain

# TrainConfig fields that have a dedicated override flag (flag dest == field).
_PRETRAIN_OVERRIDES = (
    "epochs",
    "batch_size",
    "view_side",
    "crop_strategy",
    "randaugment_n",
    "randaugment_m",
    "base_lr",
    "weight_decay",
    "momentum",
    "trust_coefficient",
    "warmup_steps",
    "tau_base",
    "seed",
    "checkpoint_every",
    "log_path",
    "checkpoint_path",
)


def cmd_pretrain(args) -> int:
    file_cfg: dict = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())
        if not isinstance(file_cfg, dict):
            raise ValueError(f"config root must be a JSON object: {args.config}")
    merged = dict(file_cfg)
    for name in _PRETRAIN_OVERRIDES:
        value = getattr(args, name)
        if value is not None:
            merged[name] = value
    if args.input is not None:
        merged["data"] = {"kind": "dir", "path": args.input}
    elif args.synthetic is not None:
        merged["data"] = {
            "kind": "shapes",
            "n_per_class": args.synthetic,
            "side": args.data_side,
            "seed": args.data_seed,
        }
    cfg = TrainConfig.from_dict(merged)
    if cfg.data is None:
        cfg = TrainConfig.from_dict(
            {**cfg.to_dict(), "data": {"kind": "shapes", "n_per_class": 500, "side": cfg.view_side, "seed": 0}}
        )
    dataset = _build_dataset(cfg.data)
    _, metrics = run_pretraining(dataset, cfg, resume_from=args.resume)
    _print_json(
        {
            "config": cfg.to_dict(),
            "dataset_size": len(dataset),
            "epochs_run": len(metrics),
            "final": metrics[-1] if metrics else None,
        },
        args.output,
    )
    return 0


# ---------------------------------------------------------- lineval / finetune


def cmd_lineval(args) -> int:
    mp = load_pretrained(args.checkpoint)
    train, test = _eval_datasets(args)
    report = linear_eval(
        mp, train, test, epochs=args.epochs, lr=args.lr, seed=args.seed, batch_size=args.batch_size
    )
    _print_json(report.to_dict(), args.output)
    return 0


def cmd_finetune(args) -> int:
    mp = load_pretrained(args.checkpoint)
    train, test = _eval_datasets(args)
    report = finetune_fraction(
        mp,
        train,
        test,
        fraction=args.fraction,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    _print_json(report.to_dict(), args.output)
    return 0


# ------------------------------------------------------------------ bench


def _bench_one(img: np.ndarray, index: int, seed: int, view_side: int) -> tuple[dict, bytes]:
    rng = Rng(derive_seed(seed, index))
    times: dict[str, int] = {}
    digest = hashlib.sha256()

    t0 = time.perf_counter_ns()
    rect = sample_uniform_crop(rng, img.shape[0], img.shape[1])
    crop = img[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w]
    times["crop"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    view = resize_bilinear(crop, view_side, view_side)
    times["resize"] = time.perf_counter_ns() - t0
    digest.update(view.tobytes())

    for kind in TransformKind:
        op = PolicyOp(kind, magnitude=9.0, probability=1.0)
        t0 = time.perf_counter_ns()
        out = apply_policy(view, [op], rng)
        times[kind.name] = time.perf_counter_ns() - t0
        digest.update(out.tobytes())
    return times, digest.digest()


def cmd_bench(args) -> int:
    per_class = math.ceil(args.iters / 4)
    ds = generate_shapes(args.seed, per_class, args.size)
    images = [img for img, _ in ds.items[: args.iters]]
    keys = ["crop", "resize"] + [k.name for k in TransformKind]
    totals = {k: 0 for k in keys}
    t_start = time.perf_counter()
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(
                pool.map(lambda i: _bench_one(images[i], i, args.seed, args.view_side), range(args.iters))
            )
    else:
        results = [_bench_one(images[i], i, args.seed, args.view_side) for i in range(args.iters)]
    wall = time.perf_counter() - t_start
    overall = hashlib.sha256()
    for times, piece in results:
        for k, v in times.items():
            totals[k] += v
        overall.update(piece)
    _print_json(
        {
            "images_per_sec": args.iters / wall if wall > 0 else None,
            "per_op_micros": {k: totals[k] / 1000.0 / args.iters for k in keys},
            "output_digest": overall.hexdigest(),
            "iters": args.iters,
            "threads": args.threads,
            "seed": args.seed,
        }
    )
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> _Parser:
    parser = _Parser(prog="multiaug", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", help="write augmented views of input images")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="directory of .ppm images")
    src.add_argument("--synthetic", type=_positive_int, metavar="N",
                     help="generate N synthetic shape images instead of reading --input")
    p.add_argument("--output", required=True, help="output directory (created if missing)")
    p.add_argument("--views", type=_positive_int, default=2, help="views per image (default 2)")
    p.add_argument("--n", type=int, default=2,
                   help="policy ops per view (default 2; 0 disables the policy)")
    p.add_argument("--m", type=float, default=9.0,
                   help="policy magnitude 0..10 (default 9; 0 disables the policy)")
    p.add_argument("--strategy", choices=["uniform", "inception"], default="uniform",
                   help="crop sampler (default uniform)")
    p.add_argument("--full-crop", action="store_true",
                   help="bypass crop sampling and use the whole image")
    p.add_argument("--view-side", type=_positive_int, default=32,
                   help="output view resolution (default 32)")
    p.add_argument("--image-side", type=_positive_int, default=64,
                   help="synthetic source image side (default 64)")
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads; outputs are thread-count independent (default 1)")
    p.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("cropstats", help="summary statistics of a crop sampler")
    p.add_argument("--strategy", choices=["uniform", "inception"], required=True,
                   help="crop sampler to measure")
    p.add_argument("--samples", type=_positive_int, default=100000,
                   help="number of sampled crops (default 100000)")
    p.add_argument("--height", type=_positive_int, default=64, help="source height (default 64)")
    p.add_argument("--width", type=_positive_int, default=64, help="source width (default 64)")
    p.add_argument("--seed", type=int, default=0, help="sampler seed (default 0)")
    p.set_defaults(func=cmd_cropstats)

    p = sub.add_parser("pretrain", help="run self-supervised pre-training")
    p.add_argument("--config", help="JSON config file (flags override file values)")
    p.add_argument("--epochs", type=_positive_int, default=None, help="training epochs (default 100)")
    p.add_argument("--batch-size", dest="batch_size", type=_positive_int, default=None,
                   help="images per step (default 256)")
    p.add_argument("--view-side", dest="view_side", type=_positive_int, default=None,
                   help="augmented view resolution (default 32)")
    p.add_argument("--strategy", dest="crop_strategy", choices=["uniform", "inception", "full"],
                   default=None, help="crop sampler (default uniform)")
    p.add_argument("--n", dest="randaugment_n", type=int, default=None,
                   help="policy ops per view (default 2)")
    p.add_argument("--m", dest="randaugment_m", type=float, default=None,
                   help="policy magnitude (default 9)")
    p.add_argument("--base-lr", dest="base_lr", type=float, default=None,
                   help="base learning rate before batch scaling (default 0.3)")
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None,
                   help="weight decay (default 1.5e-6)")
    p.add_argument("--momentum", type=float, default=None, help="optimizer momentum (default 0.9)")
    p.add_argument("--trust-coefficient", dest="trust_coefficient", type=float, default=None,
                   help="layer-adaptation trust coefficient (default 1e-3)")
    p.add_argument("--warmup-steps", dest="warmup_steps", type=int, default=None,
                   help="linear warmup steps (default 0)")
    p.add_argument("--tau-base", dest="tau_base", type=float, default=None,
                   help="target EMA base coefficient (default 0.996)")
    p.add_argument("--seed", type=int, default=None, help="run seed (default 0)")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=None,
                   help="checkpoint every k epochs (default 0: final only)")
    p.add_argument("--log", dest="log_path", default=None, help="metrics JSON-lines path")
    p.add_argument("--checkpoint", dest="checkpoint_path", default=None, help="checkpoint path")
    p.add_argument("--resume", default=None, help="resume from an epoch-boundary checkpoint")
    p.add_argument("--input", default=None, help="labeled image directory to train on")
    p.add_argument("--synthetic", type=_positive_int, default=None, metavar="PER_CLASS",
                   help="synthetic images per class (default data source, 500)")
    p.add_argument("--data-side", dest="data_side", type=_positive_int, default=64,
                   help="synthetic source image side (default 64)")
    p.add_argument("--data-seed", dest="data_seed", type=int, default=0,
                   help="synthetic dataset seed (default 0)")
    p.add_argument("--output", default=None, help="also write the JSON summary here")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("lineval", help="linear probe on frozen features")
    p.add_argument("--checkpoint", required=True, help="pre-training checkpoint")
    p.add_argument("--epochs", type=_positive_int, default=50, help="head epochs (default 50)")
    p.add_argument("--lr", type=float, default=0.5, help="head learning rate (default 0.5)")
    p.add_argument("--batch-size", dest="batch_size", type=_positive_int, default=256,
                   help="head batch size (default 256)")
    p.add_argument("--seed", type=int, default=0, help="head seed (default 0)")
    _add_eval_data_flags(p)
    p.add_argument("--output", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_lineval)

    p = sub.add_parser("finetune", help="fine-tune on a labeled fraction")
    p.add_argument("--checkpoint", required=True, help="pre-training checkpoint")
    p.add_argument("--fraction", type=_fraction01, required=True,
                   help="labeled fraction in (0, 1], e.g. 0.01 or 0.1")
    p.add_argument("--epochs", type=_positive_int, default=30, help="epochs (default 30)")
    p.add_argument("--lr", type=float, default=0.02, help="learning rate (default 0.02)")
    p.add_argument("--batch-size", dest="batch_size", type=_positive_int, default=256,
                   help="batch size (default 256)")
    p.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    _add_eval_data_flags(p)
    p.add_argument("--output", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("bench", help="augmentation pipeline throughput")
    p.add_argument("--pipeline", choices=["crop+augment"], default="crop+augment",
                   help="measured pipeline (default crop+augment)")
    p.add_argument("--iters", type=_positive_int, default=100, help="images to process (default 100)")
    p.add_argument("--size", type=_positive_int, default=64, help="source image side (default 64)")
    p.add_argument("--view-side", dest="view_side", type=_positive_int, default=32,
                   help="resized view side (default 32)")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads (default 1)")
    p.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
