"""Self-supervised pre-training loop.

Each step turns a batch of images into two augmented views per image,
runs both view sets through the online branch (encoder, projector,
predictor) in train mode and through the target branch (encoder,
projector) in eval mode, regresses predictions onto the swapped target
projections, and backpropagates through the online branch only. The
optimizer then applies a layer-adaptive update and the target tracks the
online weights (and BatchNorm running statistics) by EMA.

Determinism contract: every stream of randomness is derived from the run
seed. Weight init uses a dedicated stream id; epoch e uses stream e for
its shuffle and view seeds, so a run resumed from an epoch-boundary
checkpoint reproduces the uninterrupted run bit for bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
import json
import math
import time
from typing import Callable

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .cropping import make_two_views
from .net import (
    ModelParams,
    build_default_nets,
    backward_net,
    flatten_params,
    forward_net,
    init_model_params,
    param_flags,
    unflatten_params,
)
from .objective import l2_normalize, symmetrized_loss
from .optim import (
    EmaConfig,
    OptimConfig,
    OptimState,
    cosine_lr,
    ema_tau,
    ema_update,
    lars_step,
)
from .policy import RandAugmentConfig, RandAugmentSource
from .rng import Rng, derive_seed

__all__ = [
    "TrainConfig",
    "StepConfig",
    "PARAM_STREAM",
    "pretrain_step",
    "run_pretraining",
    "embedding_std",
    "load_pretrained",
]

# Seed stream for weight init; epoch e shuffles/augments from stream e,
# so the init stream sits far above any realistic epoch count.
PARAM_STREAM = 1 << 48


@dataclass(frozen=True)
class TrainConfig:
    """Pre-training run description; defaults are the desk-scale recipe."""

    epochs: int = 100
    batch_size: int = 256
    view_side: int = 32
    crop_strategy: str = "uniform"
    randaugment_n: int = 2
    randaugment_m: float = 9.0
    base_lr: float = 0.3
    weight_decay: float = 1.5e-6
    momentum: float = 0.9
    trust_coefficient: float = 1e-3
    optimizer_eps: float = 1e-9
    warmup_steps: int = 0
    tau_base: float = 0.996
    seed: int = 0
    checkpoint_every: int = 0
    log_path: str | None = None
    checkpoint_path: str | None = None
    data: dict | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.view_side < 8:
            raise ValueError("view_side must be >= 8")
        if self.randaugment_n < 0:
            raise ValueError("randaugment_n must be >= 0")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainConfig":
        """The reference large-scale recipe: 300 epochs at batch 2048."""
        base = dict(epochs=300, batch_size=2048, view_side=224)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**d)


@dataclass(frozen=True)
class StepConfig:
    """Everything pretrain_step needs beyond params and data."""

    opt: OptimConfig
    ema: EmaConfig
    view_side: int
    crop_strategy: str | Callable
    policy_source: object | None


def _to_tensor(views: list[np.ndarray]) -> np.ndarray:
    """Stack HxWx3 uint8 views into a (n, 3*H*W) float32 batch in [0, 1]."""
    return np.stack([v.reshape(-1) for v in views]).astype(np.float32) / 255.0


def _named_grads(component: str, net_name: str, layer_grads) -> dict[str, np.ndarray]:
    out = {}
    for i, layer in enumerate(layer_grads):
        for kind, g in layer.items():
            out[f"{component}.{net_name}.{i}.{kind}"] = g
    return out


def pretrain_step(
    images: list[np.ndarray],
    mp: ModelParams,
    opt_state: OptimState,
    step: int,
    ctx: StepConfig,
    rng: Rng,
    want_embedding_std: bool = False,
) -> dict:
    """One optimization step; updates mp and opt_state in place.

    Draws one view seed per image up front (so view construction could be
    farmed out in dataset order), builds both views, and runs the
    concatenated 2B-row batch through each branch once. Returns step
    metrics: loss, lr, tau, and optionally emb_std of the view-1 batch.
    """
    if len(images) < 2:
        raise ValueError("batch must hold at least 2 images")
    seeds = [rng.next_u64() for _ in images]
    pairs = [
        make_two_views(img, ctx.crop_strategy, ctx.policy_source, ctx.view_side, Rng(s))
        for img, s in zip(images, seeds)
    ]
    x1 = _to_tensor([p[0] for p in pairs])
    x2 = _to_tensor([p[1] for p in pairs])
    b = x1.shape[0]
    x = np.concatenate([x1, x2], axis=0)

    specs, online, target = mp.specs, mp.online, mp.target
    h, tr_enc = forward_net(specs.encoder, online["encoder"], x, mode="train")
    z, tr_proj = forward_net(specs.projector, online["projector"], h, mode="train")
    p, tr_pred = forward_net(specs.predictor, online["predictor"], z, mode="train")
    ht, _ = forward_net(specs.encoder, target["encoder"], x, mode="eval")
    zt, _ = forward_net(specs.projector, target["projector"], ht, mode="eval")

    loss, d_p1, d_p2 = symmetrized_loss(p[:b], zt[b:], p[b:], zt[:b])
    d_p = np.concatenate([d_p1, d_p2], axis=0)
    d_z, g_pred = backward_net(specs.predictor, online["predictor"], tr_pred, d_p)
    d_h, g_proj = backward_net(specs.projector, online["projector"], tr_proj, d_z)
    _, g_enc = backward_net(specs.encoder, online["encoder"], tr_enc, d_h)

    grads = {}
    grads.update(_named_grads("online", "encoder", g_enc))
    grads.update(_named_grads("online", "projector", g_proj))
    grads.update(_named_grads("online", "predictor", g_pred))

    flat = flatten_params(mp)
    lr = cosine_lr(step, ctx.opt)
    lars_step(flat, grads, opt_state, ctx.opt, lr, param_flags(mp))
    tau = ema_tau(step, ctx.ema)
    tgt = {n[len("target.") :]: a for n, a in flat.items() if n.startswith("target.")}
    onl = {n[len("online.") :]: a for n, a in flat.items() if n.startswith("online.")}
    ema_update(tgt, onl, tau)

    metrics = {"loss": loss, "lr": lr, "tau": tau}
    if want_embedding_std:
        metrics["emb_std"] = embedding_std(mp, x1)
    return metrics


def embedding_std(mp: ModelParams, batch: np.ndarray) -> float:
    """Collapse probe: mean over dimensions of the per-dimension standard
    deviation of l2-normalized online projections of the batch (eval mode).
    """
    if batch.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    h, _ = forward_net(mp.specs.encoder, mp.online["encoder"], batch, mode="eval")
    z, _ = forward_net(mp.specs.projector, mp.online["projector"], h, mode="eval")
    zn = l2_normalize(np.asarray(z, dtype=np.float64))
    return float(zn.std(axis=0).mean())


def _save_train_checkpoint(mp: ModelParams, opt_state: OptimState, epochs_done: int, path) -> None:
    tensors = dict(flatten_params(mp))
    for name, buf in opt_state.momentum.items():
        tensors[f"optim.momentum.{name}"] = buf
    tensors["meta.step"] = np.array([opt_state.step], dtype=np.float32)
    tensors["meta.epoch"] = np.array([epochs_done], dtype=np.float32)
    save_checkpoint(tensors, path)


def _load_train_checkpoint(mp: ModelParams, opt_state: OptimState, path) -> int:
    tensors = load_checkpoint(path)
    model = {k: v for k, v in tensors.items() if k.startswith(("online.", "target."))}
    unflatten_params(mp, model)
    opt_state.momentum.clear()
    prefix = "optim.momentum."
    for name, arr in tensors.items():
        if name.startswith(prefix):
            opt_state.momentum[name[len(prefix) :]] = arr.copy()
    opt_state.step = int(tensors["meta.step"][0])
    return int(tensors["meta.epoch"][0])


def load_pretrained(path) -> ModelParams:
    """Rebuild a ModelParams from a pre-training checkpoint.

    The view side is inferred from the encoder input width, so this only
    accepts checkpoints produced by the default architecture.
    """
    tensors = load_checkpoint(path)
    w0 = tensors.get("online.encoder.0.weight")
    if w0 is None:
        raise ValueError("not a pretraining checkpoint: missing online.encoder.0.weight")
    in_dim = w0.shape[1]
    side = int(round(math.sqrt(in_dim / 3)))
    if side * side * 3 != in_dim:
        raise ValueError(f"encoder input dim {in_dim} is not 3 * side^2")
    mp = init_model_params(build_default_nets(side), 0)
    model = {k: v for k, v in tensors.items() if k.startswith(("online.", "target."))}
    unflatten_params(mp, model)
    return mp


def run_pretraining(dataset, cfg: TrainConfig, resume_from=None) -> tuple[ModelParams, list[dict]]:
    """Full pre-training run; returns the final params and per-epoch metrics.

    Batching drops the final short batch of each epoch, so every epoch runs
    floor(n / batch_size) steps of exactly batch_size images. Writes one
    JSON object per epoch to cfg.log_path (appending when resuming) and
    checkpoints every cfg.checkpoint_every epochs plus once at the end.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    steps_per_epoch = n // cfg.batch_size
    if steps_per_epoch < 1:
        raise ValueError(f"dataset of {n} images is smaller than one batch of {cfg.batch_size}")
    total_steps = cfg.epochs * steps_per_epoch
    opt_cfg = OptimConfig(
        total_steps=total_steps,
        base_lr=cfg.base_lr,
        batch_size=cfg.batch_size,
        weight_decay=cfg.weight_decay,
        momentum=cfg.momentum,
        trust_coefficient=cfg.trust_coefficient,
        eps=cfg.optimizer_eps,
        warmup_steps=cfg.warmup_steps,
    )
    ema_cfg = EmaConfig(total_steps=total_steps, tau_base=cfg.tau_base)
    policy_source = None
    if cfg.randaugment_n > 0:
        policy_source = RandAugmentSource(
            RandAugmentConfig(n_ops=cfg.randaugment_n, magnitude=cfg.randaugment_m)
        )
    ctx = StepConfig(
        opt=opt_cfg,
        ema=ema_cfg,
        view_side=cfg.view_side,
        crop_strategy=cfg.crop_strategy,
        policy_source=policy_source,
    )
    mp = init_model_params(build_default_nets(cfg.view_side), derive_seed(cfg.seed, PARAM_STREAM))
    opt_state = OptimState()
    start_epoch = 0
    if resume_from is not None:
        start_epoch = _load_train_checkpoint(mp, opt_state, resume_from)

    log_file = open(cfg.log_path, "a" if resume_from else "w") if cfg.log_path else None
    metrics_log: list[dict] = []
    try:
        for epoch in range(start_epoch, cfg.epochs):
            t0 = time.perf_counter()
            erng = Rng(derive_seed(cfg.seed, epoch))
            order = list(range(n))
            erng.shuffle(order)
            losses = []
            last = None
            for b in range(steps_per_epoch):
                chunk = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
                batch = [dataset.items[i][0] for i in chunk]
                last = pretrain_step(
                    batch,
                    mp,
                    opt_state,
                    opt_state.step,
                    ctx,
                    erng,
                    want_embedding_std=(b == steps_per_epoch - 1),
                )
                losses.append(last["loss"])
            entry = {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "lr": last["lr"],
                "tau": last["tau"],
                "emb_std": last["emb_std"],
                "secs": round(time.perf_counter() - t0, 3),
            }
            metrics_log.append(entry)
            if log_file is not None:
                log_file.write(json.dumps(entry) + "\n")
                log_file.flush()
            done = epoch + 1
            if (
                cfg.checkpoint_path
                and cfg.checkpoint_every > 0
                and done % cfg.checkpoint_every == 0
                and done < cfg.epochs
            ):
                _save_train_checkpoint(mp, opt_state, done, cfg.checkpoint_path)
    finally:
        if log_file is not None:
            log_file.close()
    if cfg.checkpoint_path:
        _save_train_checkpoint(mp, opt_state, cfg.epochs, cfg.checkpoint_path)
    return mp, metrics_log
