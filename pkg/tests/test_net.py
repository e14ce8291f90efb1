"""Layer math: forward semantics, exact gradients, init, model assembly."""

import numpy as np
import pytest

from multiaug.net import (
    BatchNorm,
    Linear,
    ReLU,
    backward_net,
    build_default_nets,
    flatten_params,
    forward_net,
    init_model_params,
    init_params,
    param_flags,
    trainable_names,
    unflatten_params,
    validate_spec,
)


def _loss_and_grad(spec, params, x, w_out):
    # scalar probe: L = sum(out * w_out); dL/d_out = w_out
    out, trace = forward_net(spec, params, x, mode="train")
    d_in, grads = backward_net(spec, params, trace, np.broadcast_to(w_out, out.shape).copy())
    return float((out * w_out).sum()), d_in, grads


def _tensor_rel_error(num, ana, zero_floor=1e-6):
    """Norm-wise relative error; two near-zero tensors count as a match.

    A bias feeding BatchNorm has an exactly-zero true gradient (the mean
    subtraction absorbs any constant shift), where pointwise relative error
    is all finite-difference noise.
    """
    scale = max(np.linalg.norm(num), np.linalg.norm(ana))
    if scale < zero_floor:
        return 0.0
    return np.linalg.norm(num - ana) / scale


def _fd_check(spec, seed, in_dim, batch=6, eps=1e-5):
    """Central finite differences against analytic grads, float64."""
    rng = np.random.default_rng(seed)
    params = init_params(spec, seed, dtype=np.float64)
    # nonzero biases/betas and varied gammas so their gradients are probed
    for layer in params:
        for k, v in layer.items():
            if k in ("bias", "beta"):
                layer[k] = rng.normal(0.0, 0.1, v.shape)
            elif k == "gamma":
                layer[k] = 1.0 + rng.normal(0.0, 0.1, v.shape)
    x = rng.normal(0.0, 1.0, (batch, in_dim))
    w_out = rng.normal(0.0, 1.0, (batch, validate_spec(spec)[1]))

    def _fresh(p):
        # running stats mutate in train mode; keep the probe pure
        return [{k: v.copy() for k, v in layer.items()} for layer in p]

    def _loss():
        out, _ = forward_net(spec, _fresh(params), x, mode="train")
        return float((out * w_out).sum())

    def _sweep(arr):
        fd = np.empty(arr.size)
        for i in range(arr.size):
            base = arr.flat[i]
            arr.flat[i] = base + eps
            up = _loss()
            arr.flat[i] = base - eps
            dn = _loss()
            arr.flat[i] = base
            fd[i] = (up - dn) / (2 * eps)
        return fd

    _, d_in, grads = _loss_and_grad(spec, _fresh(params), x, w_out)
    worst = 0.0
    for li, layer in enumerate(params):
        for kind in layer:
            if kind.startswith("running_"):
                continue
            fd = _sweep(layer[kind])
            worst = max(worst, _tensor_rel_error(fd, grads[li][kind].ravel()))
    worst = max(worst, _tensor_rel_error(_sweep(x), d_in.ravel()))
    return worst


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(seed):
    spec = (
        Linear(5, 7),
        BatchNorm(7),
        ReLU(),
        Linear(7, 4, has_bias=False),
        BatchNorm(4),
        ReLU(),
        Linear(4, 3),
    )
    assert _fd_check(spec, seed, in_dim=5) <= 1e-6


def test_linear_forward_matches_matmul():
    spec = (Linear(3, 2),)
    params = init_params(spec, 0, dtype=np.float64)
    params[0]["bias"] = np.array([0.5, -0.25])
    x = np.arange(12, dtype=np.float64).reshape(4, 3)
    out, _ = forward_net(spec, params, x, mode="eval")
    assert np.allclose(out, x @ params[0]["weight"].T + params[0]["bias"])


def test_batchnorm_train_uses_batch_statistics():
    spec = (BatchNorm(2),)
    params = init_params(spec, 0, dtype=np.float64)
    x = np.array([[1.0, 10.0], [3.0, 30.0], [5.0, 20.0], [7.0, 40.0]])
    out, _ = forward_net(spec, params, x, mode="train")
    mu = x.mean(axis=0)
    inv = 1.0 / np.sqrt(x.var(axis=0) + 1e-5)
    assert np.allclose(out, (x - mu) * inv)
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-12)


def test_batchnorm_running_stats_update():
    spec = (BatchNorm(2),)
    params = init_params(spec, 0, dtype=np.float64)
    x = np.array([[1.0, 10.0], [3.0, 30.0], [5.0, 20.0], [7.0, 40.0]])
    forward_net(spec, params, x, mode="train")
    b = x.shape[0]
    unbiased = x.var(axis=0) * b / (b - 1)
    assert np.allclose(params[0]["running_mean"], 0.1 * x.mean(axis=0))
    assert np.allclose(params[0]["running_var"], 0.9 * 1.0 + 0.1 * unbiased)


def test_batchnorm_eval_uses_running_stats_and_is_pure():
    spec = (BatchNorm(2),)
    params = init_params(spec, 0, dtype=np.float64)
    params[0]["running_mean"] = np.array([1.0, 2.0])
    params[0]["running_var"] = np.array([4.0, 9.0])
    before = {k: v.copy() for k, v in params[0].items()}
    x = np.array([[3.0, 8.0]])
    out, _ = forward_net(spec, params, x, mode="eval")
    assert np.allclose(out, [(3 - 1) / np.sqrt(4 + 1e-5), (8 - 2) / np.sqrt(9 + 1e-5)])
    for k, v in before.items():
        assert np.array_equal(params[0][k], v)


def test_train_mode_rejects_singleton_batch_with_batchnorm():
    spec = (Linear(3, 2), BatchNorm(2))
    params = init_params(spec, 0)
    with pytest.raises(ValueError):
        forward_net(spec, params, np.zeros((1, 3), dtype=np.float32), mode="train")


def test_relu_masks_gradient():
    spec = (Linear(3, 3, has_bias=False), ReLU())
    params = [{"weight": np.eye(3)}, {}]
    x = np.array([[-1.0, 0.0, 2.0]])
    out, trace = forward_net(spec, params, x, mode="train")
    assert np.array_equal(out, [[0.0, 0.0, 2.0]])
    d_in, _ = backward_net(spec, params, trace, np.ones_like(x))
    assert np.array_equal(d_in, [[0.0, 0.0, 1.0]])


def test_validate_spec_rejects_dim_mismatch():
    with pytest.raises(ValueError):
        validate_spec((Linear(3, 4), Linear(5, 2)))
    with pytest.raises(ValueError):
        validate_spec((Linear(3, 4), BatchNorm(5)))
    with pytest.raises(ValueError):
        validate_spec(())
    with pytest.raises(ValueError):
        validate_spec((ReLU(),))


def test_init_is_deterministic_and_bounded():
    spec = (Linear(64, 32), BatchNorm(32))
    a = init_params(spec, 7)
    b = init_params(spec, 7)
    for la, lb in zip(a, b):
        for k in la:
            assert np.array_equal(la[k], lb[k])
    bound = np.sqrt(6.0 / 64)
    w = a[0]["weight"]
    assert w.shape == (32, 64)
    assert np.all(np.abs(w) <= bound)
    assert np.array_equal(a[0]["bias"], np.zeros(32, dtype=np.float32))
    assert np.array_equal(a[1]["gamma"], np.ones(32, dtype=np.float32))
    assert np.array_equal(a[1]["running_var"], np.ones(32, dtype=np.float32))
    c = init_params(spec, 8)
    assert not np.array_equal(a[0]["weight"], c[0]["weight"])


def test_default_nets_shapes():
    specs = build_default_nets(32)
    assert validate_spec(specs.encoder) == (3 * 32 * 32, 128)
    assert validate_spec(specs.projector) == (128, 64)
    assert validate_spec(specs.predictor) == (64, 64)


def test_model_assembly_and_target_copy():
    mp = init_model_params(build_default_nets(32), seed=3)
    assert set(mp.online) == {"encoder", "projector", "predictor"}
    assert set(mp.target) == {"encoder", "projector"}
    for net in ("encoder", "projector"):
        for lo, lt in zip(mp.online[net], mp.target[net]):
            for k in lo:
                assert np.array_equal(lo[k], lt[k])
                assert lo[k] is not lt[k]
    # branches use distinct derived seeds
    w_enc = mp.online["encoder"][0]["weight"]
    w_proj = mp.online["projector"][0]["weight"]
    assert w_enc.dtype == np.float32
    assert not np.array_equal(
        w_proj[: w_proj.shape[0] // 2, :1], w_enc[: w_proj.shape[0] // 2, :1]
    )


def test_flatten_unflatten_round_trip():
    mp = init_model_params(build_default_nets(32), seed=1)
    flat = flatten_params(mp)
    assert "online.encoder.0.weight" in flat
    assert "target.projector.3.bias" in flat
    assert "online.predictor.0.weight" in flat
    assert "target.predictor.0.weight" not in flat
    stash = {k: v.copy() for k, v in flat.items()}
    for v in flat.values():
        v += 1.0
    unflatten_params(mp, stash)
    now = flatten_params(mp)
    for k in stash:
        assert np.array_equal(now[k], stash[k])
    missing = dict(stash)
    del missing["online.encoder.0.weight"]
    with pytest.raises(ValueError):
        unflatten_params(mp, missing)


def test_trainable_names_exclude_running_stats():
    mp = init_model_params(build_default_nets(32), seed=0)
    names = trainable_names(mp)
    assert names == sorted(names)
    assert all(n.startswith("online.") for n in names)
    assert not any("running_" in n for n in names)
    kinds = {n.rsplit(".", 1)[1] for n in names}
    assert kinds == {"weight", "bias", "gamma", "beta"}


def test_param_flags():
    mp = init_model_params(build_default_nets(32), seed=0)
    flags = param_flags(mp)
    assert flags["online.encoder.0.weight"] == (False, False)
    assert flags["online.encoder.0.bias"] == (True, False)
    assert flags["online.encoder.1.gamma"] == (False, True)
    assert flags["online.encoder.1.beta"] == (False, True)


def test_batch_stats_not_running_stats_in_train_mode():
    # shifting running stats must not change train-mode output
    spec = (BatchNorm(3),)
    params = init_params(spec, 0, dtype=np.float64)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(8, 3))
    out1, _ = forward_net(spec, params, x.copy(), mode="train")
    params2 = init_params(spec, 0, dtype=np.float64)
    params2[0]["running_mean"] += 100.0
    out2, _ = forward_net(spec, params2, x.copy(), mode="train")
    assert np.array_equal(out1, out2)
