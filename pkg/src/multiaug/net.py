"""Minimal differentiable MLP stack: Linear, BatchNorm, ReLU.

Forward/backward are exact reverse-mode math on numpy arrays, float32 for
training and float64 for finite-difference verification. The module also
assembles the full model: an online branch (encoder, projector, predictor)
updated by gradients and a target branch (encoder, projector) updated only
by moving average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng, derive_seed

__all__ = [
    "Linear",
    "BatchNorm",
    "ReLU",
    "NetSpecs",
    "ModelParams",
    "validate_spec",
    "init_params",
    "forward_net",
    "backward_net",
    "build_default_nets",
    "init_model_params",
    "flatten_params",
    "unflatten_params",
    "trainable_names",
    "param_flags",
]


@dataclass(frozen=True)
class Linear:
    in_dim: int
    out_dim: int
    has_bias: bool = True


@dataclass(frozen=True)
class BatchNorm:
    features: int
    eps: float = 1e-5
    momentum: float = 0.1


@dataclass(frozen=True)
class ReLU:
    pass


NetSpec = tuple


def validate_spec(spec: NetSpec) -> tuple[int, int]:
    """Check adjacency; returns (input_dim, output_dim)."""
    if not spec:
        raise ValueError("net spec must have at least one layer")
    in_dim = None
    cur = None
    for layer in spec:
        if isinstance(layer, Linear):
            if cur is not None and cur != layer.in_dim:
                raise ValueError(f"layer dim mismatch: {cur} -> Linear({layer.in_dim}, ...)")
            if in_dim is None:
                in_dim = layer.in_dim
            cur = layer.out_dim
        elif isinstance(layer, BatchNorm):
            if cur is not None and cur != layer.features:
                raise ValueError(f"layer dim mismatch: {cur} -> BatchNorm({layer.features})")
            if in_dim is None:
                in_dim = layer.features
            cur = layer.features
        elif isinstance(layer, ReLU):
            pass
        else:
            raise ValueError(f"unknown layer spec {layer!r}")
    if in_dim is None or cur is None:
        raise ValueError("net spec needs at least one parametric layer")
    return in_dim, cur


def init_params(spec: NetSpec, seed: int, dtype=np.float32) -> list[dict[str, np.ndarray]]:
    """Deterministic init: Linear weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
    biases zero; BatchNorm gamma 1, beta 0, running stats (0, 1).

    Weights fill row-major (out, in) from one bulk draw per layer.
    """
    validate_spec(spec)
    rng = Rng(seed)
    params = []
    for layer in spec:
        if isinstance(layer, Linear):
            bound = math.sqrt(6.0 / layer.in_dim)
            flat = rng.uniform_array(-bound, bound, layer.out_dim * layer.in_dim)
            p = {"weight": flat.reshape(layer.out_dim, layer.in_dim).astype(dtype)}
            if layer.has_bias:
                p["bias"] = np.zeros(layer.out_dim, dtype=dtype)
            params.append(p)
        elif isinstance(layer, BatchNorm):
            params.append(
                {
                    "gamma": np.ones(layer.features, dtype=dtype),
                    "beta": np.zeros(layer.features, dtype=dtype),
                    "running_mean": np.zeros(layer.features, dtype=dtype),
                    "running_var": np.ones(layer.features, dtype=dtype),
                }
            )
        else:
            params.append({})
    return params


def forward_net(
    spec: NetSpec,
    params: list[dict[str, np.ndarray]],
    x: np.ndarray,
    mode: str = "train",
) -> tuple[np.ndarray, list]:
    """Run the net; returns (output, trace). Train mode uses batch statistics
    in BatchNorm and updates running stats in place; eval mode is pure.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode}")
    in_dim, _ = validate_spec(spec)
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ValueError(f"input shape {x.shape} incompatible with net input dim {in_dim}")
    if mode == "train" and x.shape[0] < 2 and any(isinstance(l, BatchNorm) for l in spec):
        raise ValueError(f"batch size {x.shape[0]} too small for train-mode BatchNorm")
    trace = []
    for layer, p in zip(spec, params):
        if isinstance(layer, Linear):
            trace.append(x)
            y = x @ p["weight"].T
            if layer.has_bias:
                y = y + p["bias"]
            x = y
        elif isinstance(layer, BatchNorm):
            if mode == "train":
                b = x.shape[0]
                mu = x.mean(axis=0)
                var = x.var(axis=0)  # population variance, divisor = batch
                inv = 1.0 / np.sqrt(var + layer.eps)
                xhat = (x - mu) * inv
                unbiased = var * (b / (b - 1))
                p["running_mean"] *= 1.0 - layer.momentum
                p["running_mean"] += (layer.momentum * mu).astype(p["running_mean"].dtype)
                p["running_var"] *= 1.0 - layer.momentum
                p["running_var"] += (layer.momentum * unbiased).astype(p["running_var"].dtype)
                trace.append((xhat, inv))
            else:
                inv = 1.0 / np.sqrt(p["running_var"] + layer.eps)
                xhat = (x - p["running_mean"]) * inv
                trace.append(None)
            x = p["gamma"] * xhat + p["beta"]
        else:  # ReLU
            trace.append(x)
            x = np.maximum(x, 0)
    return x, trace


def backward_net(
    spec: NetSpec,
    params: list[dict[str, np.ndarray]],
    trace: list,
    d_out: np.ndarray,
) -> tuple[np.ndarray, list[dict[str, np.ndarray]]]:
    """Exact gradients from a train-mode trace: returns (d_input, per-layer grads)."""
    if len(trace) != len(spec):
        raise ValueError(f"trace length {len(trace)} does not match spec length {len(spec)}")
    grads: list[dict[str, np.ndarray]] = [{} for _ in spec]
    dy = d_out
    for i in range(len(spec) - 1, -1, -1):
        layer = spec[i]
        if isinstance(layer, Linear):
            x = trace[i]
            grads[i]["weight"] = dy.T @ x
            if layer.has_bias:
                grads[i]["bias"] = dy.sum(axis=0)
            dy = dy @ params[i]["weight"]
        elif isinstance(layer, BatchNorm):
            if trace[i] is None:
                raise ValueError("backward through an eval-mode BatchNorm trace")
            xhat, inv = trace[i]
            grads[i]["beta"] = dy.sum(axis=0)
            grads[i]["gamma"] = (dy * xhat).sum(axis=0)
            gamma = params[i]["gamma"]
            dy = (gamma * inv) * (dy - dy.mean(axis=0) - xhat * (dy * xhat).mean(axis=0))
        else:  # ReLU
            dy = dy * (trace[i] > 0)
    return dy, grads


# trainable keys per layer kind; BatchNorm running stats are buffers
_TRAINABLE = {"weight", "bias", "gamma", "beta"}


@dataclass(frozen=True)
class NetSpecs:
    encoder: NetSpec
    projector: NetSpec
    predictor: NetSpec


def build_default_nets(view_side: int = 32) -> NetSpecs:
    """Desk-scale MLP: 3-layer encoder to a 128-d representation, 2-layer
    projector to 64-d, predictor with the projector's architecture (64-d in/out).
    """
    in_dim = view_side * view_side * 3
    encoder = (
        Linear(in_dim, 512),
        BatchNorm(512),
        ReLU(),
        Linear(512, 512),
        BatchNorm(512),
        ReLU(),
        Linear(512, 128),
    )
    projector = (Linear(128, 256), BatchNorm(256), ReLU(), Linear(256, 64))
    predictor = (Linear(64, 256), BatchNorm(256), ReLU(), Linear(256, 64))
    return NetSpecs(encoder=encoder, projector=projector, predictor=predictor)


@dataclass
class ModelParams:
    """Online branch (encoder, projector, predictor) and target branch
    (encoder, projector; no predictor), plus the specs they instantiate.
    """

    specs: NetSpecs
    online: dict[str, list[dict[str, np.ndarray]]] = field(default_factory=dict)
    target: dict[str, list[dict[str, np.ndarray]]] = field(default_factory=dict)

    def spec_for(self, net: str) -> NetSpec:
        return getattr(self.specs, net)


def _copy_net(params: list[dict[str, np.ndarray]]) -> list[dict[str, np.ndarray]]:
    return [{k: v.copy() for k, v in layer.items()} for layer in params]


def init_model_params(specs: NetSpecs, seed: int, dtype=np.float32) -> ModelParams:
    """Online nets from independent derived seeds; target starts as a copy
    of the online encoder and projector.
    """
    online = {
        "encoder": init_params(specs.encoder, derive_seed(seed, 0), dtype),
        "projector": init_params(specs.projector, derive_seed(seed, 1), dtype),
        "predictor": init_params(specs.predictor, derive_seed(seed, 2), dtype),
    }
    target = {
        "encoder": _copy_net(online["encoder"]),
        "projector": _copy_net(online["projector"]),
    }
    return ModelParams(specs=specs, online=online, target=target)


def flatten_params(mp: ModelParams) -> dict[str, np.ndarray]:
    """Name every tensor `component.net.layer_index.kind` for checkpoints."""
    out = {}
    for comp, nets in (("online", mp.online), ("target", mp.target)):
        for net, layers in nets.items():
            for i, layer in enumerate(layers):
                for kind, arr in layer.items():
                    out[f"{comp}.{net}.{i}.{kind}"] = arr
    return out


def unflatten_params(mp: ModelParams, tensors: dict[str, np.ndarray]) -> None:
    """Load flat tensors back into the model, in place, shape-checked."""
    flat = flatten_params(mp)
    for name, arr in flat.items():
        if name not in tensors:
            raise ValueError(f"checkpoint missing tensor {name}")
        src = tensors[name]
        if tuple(src.shape) != tuple(arr.shape):
            raise ValueError(f"shape mismatch for {name}: {src.shape} vs {arr.shape}")
        arr[...] = src.astype(arr.dtype)


def trainable_names(mp: ModelParams, component: str = "online") -> list[str]:
    """Lexicographically sorted names of gradient-updated tensors."""
    nets = mp.online if component == "online" else mp.target
    names = []
    for net, layers in nets.items():
        for i, layer in enumerate(layers):
            for kind in layer:
                if kind in _TRAINABLE:
                    names.append(f"{component}.{net}.{i}.{kind}")
    return sorted(names)


def param_flags(mp: ModelParams) -> dict[str, tuple[bool, bool]]:
    """(is_bias, is_norm_param) per flattened tensor name."""
    flags = {}
    for name in flatten_params(mp):
        kind = name.rsplit(".", 1)[1]
        flags[name] = (kind == "bias", kind in ("gamma", "beta"))
    return flags


def get_tensor(mp: ModelParams, name: str) -> np.ndarray:
    comp, net, idx, kind = name.split(".")
    nets = mp.online if comp == "online" else mp.target
    return nets[net][int(idx)][kind]
