"""Layer-wise adaptive optimizer, cosine schedules, and target averaging.

The pre-training optimizer scales each tensor's update by a local trust
ratio ||w|| / ||g + wd*w||. Bias and normalization parameters skip both
weight decay and the trust ratio. The target network follows the online
network through an exponential moving average whose coefficient anneals
from tau_base toward 1 on a cosine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "OptimConfig",
    "EmaConfig",
    "OptimState",
    "StepOutOfRange",
    "scaled_lr",
    "cosine_lr",
    "lars_step",
    "ema_tau",
    "ema_update",
]


class StepOutOfRange(ValueError):
    """Schedule evaluated outside [0, total_steps]."""


@dataclass(frozen=True)
class OptimConfig:
    """Hyperparameters for the schedule and the layer-adaptive update."""

    total_steps: int
    base_lr: float = 0.3
    batch_size: int = 256
    weight_decay: float = 1.5e-6
    momentum: float = 0.9
    trust_coefficient: float = 1e-3
    eps: float = 1e-9
    warmup_steps: int = 0

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ValueError("warmup_steps must lie in [0, total_steps)")
        for name in ("base_lr", "weight_decay", "momentum", "trust_coefficient", "eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def scaled_lr(cfg: OptimConfig) -> float:
    """Linear scaling rule: base_lr * batch_size / 256."""
    return cfg.base_lr * cfg.batch_size / 256


def cosine_lr(step: int, cfg: OptimConfig) -> float:
    """LR at a step: linear warmup, then a single cosine decay to 0.

    Warmup ramps as step / warmup_steps; the decay phase evaluates
    peak * (1 + cos(pi * (step - warmup) / (total - warmup))) / 2, which
    hits the peak at step == warmup_steps and 0 at step == total_steps.
    """
    if step < 0 or step > cfg.total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {cfg.total_steps}]")
    peak = scaled_lr(cfg)
    if step < cfg.warmup_steps:
        return peak * step / cfg.warmup_steps
    t = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return peak * 0.5 * (1.0 + math.cos(math.pi * t))


@dataclass
class OptimState:
    """Momentum buffers keyed by tensor name, created lazily at zero."""

    momentum: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def buffer_for(self, name: str, like: np.ndarray) -> np.ndarray:
        buf = self.momentum.get(name)
        if buf is None:
            buf = np.zeros_like(like)
            self.momentum[name] = buf
        return buf


def _tensor_norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.asarray(x, dtype=np.float64) ** 2)))


def _flags_from_name(name: str) -> tuple[bool, bool]:
    is_bias = name.endswith(".bias")
    is_norm = name.endswith(".gamma") or name.endswith(".beta")
    return is_bias, is_norm


def lars_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimState,
    cfg: OptimConfig,
    lr: float,
    flags: dict[str, tuple[bool, bool]] | None = None,
) -> None:
    """Apply one update in place, visiting tensors in sorted-name order.

    flags maps a name to (is_bias, is_norm); by default both are read off
    the name suffix (.bias / .gamma / .beta). Either flag exempts the
    tensor from weight decay and pins its local rate to 1. Otherwise
    local_lr = trust * ||w|| / (||g'|| + eps) when both norms are positive.
    """
    for name in sorted(grads):
        w = params[name]
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(f"shape mismatch for {name}: {w.shape} vs {g.shape}")
        is_bias, is_norm = flags[name] if flags is not None else _flags_from_name(name)
        if is_bias or is_norm:
            adjusted = g
            local_lr = 1.0
        else:
            adjusted = g + cfg.weight_decay * w
            w_norm = _tensor_norm(w)
            g_norm = _tensor_norm(adjusted)
            if w_norm > 0.0 and g_norm > 0.0:
                local_lr = cfg.trust_coefficient * w_norm / (g_norm + cfg.eps)
            else:
                local_lr = 1.0
        buf = state.buffer_for(name, w)
        buf *= cfg.momentum
        buf += adjusted
        w -= (lr * local_lr) * buf
    state.step += 1


@dataclass(frozen=True)
class EmaConfig:
    """Target-averaging coefficient schedule."""

    total_steps: int
    tau_base: float = 0.996

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 0.0 <= self.tau_base <= 1.0:
            raise ValueError("tau_base must lie in [0, 1]")


def ema_tau(step: int, cfg: EmaConfig) -> float:
    """tau(step) = 1 - (1 - tau_base) * (cos(pi * step / total) + 1) / 2."""
    if step < 0 or step > cfg.total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {cfg.total_steps}]")
    frac = step / cfg.total_steps
    return 1.0 - (1.0 - cfg.tau_base) * 0.5 * (math.cos(math.pi * frac) + 1.0)


def ema_update(
    target: dict[str, np.ndarray], online: dict[str, np.ndarray], tau: float
) -> None:
    """target <- tau * target + (1 - tau) * online, elementwise in place.

    Every tensor named in target must have an online counterpart of the
    same shape; running statistics are averaged the same way as weights.
    """
    for name, t in target.items():
        o = online[name]
        if o.shape != t.shape:
            raise ValueError(f"shape mismatch for {name}: {t.shape} vs {o.shape}")
        t *= tau
        t += (1.0 - tau) * o
