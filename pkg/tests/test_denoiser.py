import numpy as np
import pytest

from flowstream import denoiser as DN


@pytest.fixture
def cfg():
    return DN.DenoiserConfig(
        D=2, hidden=32, num_layers=2, num_heads=4, num_controls=4, max_context=16
    )


@pytest.fixture
def params(cfg):
    p = DN.init_params(cfg, 0)
    # wake the scaled output head so gradient and sensitivity checks cover it
    rng = np.random.default_rng(100)
    p.tensors["gain_w"] = rng.normal(0, 0.02, p.tensors["gain_w"].shape)
    p.tensors["gain_b"] = rng.normal(0, 0.02, p.tensors["gain_b"].shape)
    return p


def window(rng, n=6, D=2, V=4):
    return (
        rng.standard_normal((n, D)),
        rng.integers(0, V, n),
        rng.uniform(0.05, 0.95, n),
    )


def test_init_deterministic(cfg):
    a = DN.init_params(cfg, 3)
    b = DN.init_params(cfg, 3)
    assert DN.params_digest(a) == DN.params_digest(b)
    c = DN.init_params(cfg, 4)
    assert DN.params_digest(a) != DN.params_digest(c)


def test_param_count_closed_form():
    cfg = DN.DenoiserConfig(D=2, hidden=64, num_layers=2, num_heads=4, num_controls=4,
                            max_context=16)
    params = DN.init_params(cfg, 0)
    H, F, D, V = 64, 128, 2, 4
    embeds = V * H + D * H + H + H * H + H
    per_layer = 2 * H + (H * H + H) + H * H + (H * H + H) + (H * H + H) + 2 * H + (
        H * F + F) + (F * H + H)
    head = 2 * H + (H * D + D) + (H * D + D)
    assert params.param_count() == embeds + cfg.num_layers * per_layer + head


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        DN.DenoiserConfig(D=2, hidden=30, num_heads=4)
    with pytest.raises(ValueError):
        DN.DenoiserConfig(D=2, mask_kind="diagonal")
    with pytest.raises(ValueError):
        DN.DenoiserConfig(D=2, prediction_kind="waveform")


def test_forward_validates_inputs(params):
    rng = np.random.default_rng(0)
    x, c, a = window(rng)
    with pytest.raises(ValueError, match="vocabulary"):
        DN.forward(params, x, np.full(6, 9), a)
    with pytest.raises(ValueError, match="max_context"):
        DN.forward(params, np.zeros((17, 2)), np.zeros(17, dtype=int), np.full(17, 0.5))


def test_forward_deterministic(params):
    rng = np.random.default_rng(1)
    x, c, a = window(rng)
    o1, _ = DN.forward(params, x, c, a)
    o2, _ = DN.forward(params, x, c, a)
    assert np.array_equal(o1, o2)


def test_single_frame_masks_agree(params):
    rng = np.random.default_rng(2)
    x, c, a = window(rng, n=1)
    o_bi, _ = DN.forward(params, x, c, a, mask_kind="bidirectional")
    o_ca, _ = DN.forward(params, x, c, a, mask_kind="causal")
    assert np.array_equal(o_bi, o_ca)


def test_causal_mask_containment_exact(params):
    rng = np.random.default_rng(3)
    x, c, a = window(rng)
    base, _ = DN.forward(params, x, c, a, mask_kind="causal")
    x2 = x.copy()
    x2[4:] += 50.0
    c2 = c.copy()
    c2[4:] = (c2[4:] + 1) % 4
    pert, _ = DN.forward(params, x2, c2, a, mask_kind="causal")
    assert np.array_equal(base[:4], pert[:4])
    assert not np.array_equal(base[4:], pert[4:])


def test_bidirectional_future_sensitivity(params):
    rng = np.random.default_rng(4)
    x, c, a = window(rng)
    base, _ = DN.forward(params, x, c, a, mask_kind="bidirectional")
    x2 = x.copy()
    x2[5] += 1.0
    pert, _ = DN.forward(params, x2, c, a, mask_kind="bidirectional")
    assert np.abs(pert[:5] - base[:5]).max() > 0.0


def test_position_equivariance(params):
    rng = np.random.default_rng(5)
    x, c, a = window(rng)
    n = len(x)
    pos = np.arange(n - 1, -1, -1)
    base, _ = DN.forward(params, x, c, a, mask_kind="bidirectional")
    perm = rng.permutation(n)
    out, _ = DN.forward(
        params, x[perm], c[perm], a[perm], mask_kind="bidirectional", positions=pos[perm]
    )
    assert np.allclose(out, base[perm], rtol=0, atol=1e-12)


def test_null_control_changes_output(params):
    rng = np.random.default_rng(6)
    x, c, a = window(rng, V=3)  # keep the null id (3) unused
    base, _ = DN.forward(params, x, c, a)
    cn = c.copy()
    cn[2] = params.cfg.null_control_id
    out, _ = DN.forward(params, x, cn, a)
    assert not np.array_equal(base, out)


def test_single_frame_conditioning_isolated(params):
    # with a one-frame window the output cannot depend on other controls
    rng = np.random.default_rng(7)
    x, c, a = window(rng, n=1)
    o1, _ = DN.forward(params, x, np.array([0]), a)
    o2, _ = DN.forward(params, x, np.array([1]), a)
    assert not np.array_equal(o1, o2)


def test_backward_zero_and_linearity(params):
    rng = np.random.default_rng(8)
    x, c, a = window(rng)
    out, cache = DN.forward(params, x, c, a)
    gz = DN.backward(params, cache, np.zeros_like(out))
    assert all(np.all(v == 0.0) for v in gz.values())
    g = rng.standard_normal(out.shape)
    g1 = DN.backward(params, cache, g)
    g2 = DN.backward(params, cache, 2.0 * g)
    for k in g1:
        assert np.allclose(g2[k], 2.0 * g1[k], rtol=1e-12, atol=0)


def test_backward_shape_mismatch_rejected(params):
    rng = np.random.default_rng(9)
    x, c, a = window(rng)
    _, cache = DN.forward(params, x, c, a)
    with pytest.raises(ValueError, match="mismatch"):
        DN.backward(params, cache, np.zeros((3, 2)))


def test_gradients_match_finite_differences(params):
    rng = np.random.default_rng(10)
    x, c, a = window(rng)
    out, cache = DN.forward(params, x, c, a)
    g_out = rng.standard_normal(out.shape)
    grads = DN.backward(params, cache, g_out)

    def loss():
        o, _ = DN.forward(params, x, c, a)
        return float((o * g_out).sum())

    h = 1e-4
    checked = 0
    for name in sorted(params.tensors):
        t = params.tensors[name]
        for _ in range(2):
            idx = tuple(rng.integers(0, s) for s in t.shape)
            orig = t[idx]
            t[idx] = orig + h
            lp = loss()
            t[idx] = orig - h
            lm = loss()
            t[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            an = grads[name][idx]
            denom = max(abs(fd), abs(an))
            if denom > 0:
                assert abs(fd - an) / denom <= 1e-4, (name, idx, fd, an)
            checked += 1
    assert checked >= 10


def test_cfg_velocity_identities(params):
    rng = np.random.default_rng(11)
    x, c, a = window(rng, V=3)
    v1 = DN.cfg_velocity(params, x, c, a, scale=1.0)
    v0 = DN.cfg_velocity(params, x, c, a, scale=0.0)
    pred_c, _ = DN.forward(params, x, c, a)
    pred_n, _ = DN.forward(params, x, np.full(len(c), params.cfg.null_control_id), a)
    assert np.array_equal(v1, pred_c)  # velocity kind: conversion is identity
    assert np.array_equal(v0, pred_n)
    v6 = DN.cfg_velocity(params, x, c, a, scale=6.0)
    assert np.allclose(v6, v0 + 6.0 * (v1 - v0), rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        DN.cfg_velocity(params, x, c, a, scale=-1.0)


def test_cfg_velocity_converts_predictions(cfg):
    ncfg = DN.DenoiserConfig(**{**cfg.__dict__, "prediction_kind": "x0"})
    params = DN.init_params(ncfg, 1)
    rng = np.random.default_rng(12)
    x, c, a = window(rng, V=3)
    v = DN.cfg_velocity(params, x, c, a, scale=1.0)
    pred, _ = DN.forward(params, x, c, a)
    beta = 1.0 - a
    expect = (pred - x) / beta[:, None]
    assert np.allclose(v, expect, rtol=1e-12, atol=0)


def test_checkpoint_round_trip_bitwise(params, tmp_path):
    p1 = tmp_path / "a.npz"
    p2 = tmp_path / "b.npz"
    DN.save_params(params, p1)
    loaded = DN.load_params(p1)
    assert loaded.cfg == params.cfg
    assert DN.params_digest(loaded) == DN.params_digest(params)
    DN.save_params(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, foo=np.zeros(3))
    with pytest.raises(ValueError, match="__meta__"):
        DN.load_params(path)
