"""Toy windowed-attention network predicting per-frame targets, with exact
hand-written backpropagation.

Per-frame features are the sum of an input projection of the noisy frame,
a sinusoidal embedding of that frame's own noise level alpha (projected),
an additive control embedding, and a sinusoidal positional code indexed
from the window end, so a truncated context behaves identically to an
untruncated one near the active region.  Blocks are pre-LayerNorm
attention + feedforward with residuals; the attention mask is either
bidirectional (full) or causal (lower triangular including the diagonal).

The output head emits one D-vector per frame, interpreted according to
``prediction_kind`` and convertible to a velocity via the clamp-schedule
affine relations.  All arithmetic is float64 and bit-reproducible.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .gaussian_path import PREDICTION_KINDS, window_velocity_from_prediction

MASK_KINDS = ("bidirectional", "causal")
CHECKPOINT_VERSION = 1
# Cap on the 1/beta output basis, keeping the scaled head bounded at the
# saturated end of a frame's schedule.
BETA_FEATURE_FLOOR = 0.05


@dataclass(frozen=True)
class DenoiserConfig:
    D: int
    hidden: int = 64
    num_layers: int = 2
    num_heads: int = 4
    mask_kind: str = "bidirectional"
    num_controls: int = 2  # vocabulary size, including the reserved null id
    max_context: int = 64
    prediction_kind: str = "velocity"
    ffn: int | None = None

    def __post_init__(self):
        if self.hidden % self.num_heads != 0:
            raise ValueError("hidden must be divisible by num_heads")
        if self.hidden % 2 != 0:
            raise ValueError("hidden must be even (sinusoidal features pair sin/cos)")
        if self.mask_kind not in MASK_KINDS:
            raise ValueError(f"mask_kind must be one of {MASK_KINDS}")
        if self.prediction_kind not in PREDICTION_KINDS:
            raise ValueError(f"prediction_kind must be one of {PREDICTION_KINDS}")
        if self.num_controls < 2:
            raise ValueError("need at least one real control plus the null id")
        if self.max_context < 1:
            raise ValueError("max_context must be >= 1")

    @property
    def ffn_width(self) -> int:
        return self.ffn if self.ffn is not None else 2 * self.hidden

    @property
    def null_control_id(self) -> int:
        return self.num_controls - 1


@dataclass
class DenoiserParams:
    cfg: DenoiserConfig
    tensors: dict[str, np.ndarray] = field(repr=False)

    def param_count(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.cfg, {k: v.copy() for k, v in self.tensors.items()})


def param_shapes(cfg: DenoiserConfig) -> dict[str, tuple]:
    H, F = cfg.hidden, cfg.ffn_width
    shapes = {
        "ctrl_embed": (cfg.num_controls, H),
        "in_w": (cfg.D, H),
        "in_b": (H,),
        "noise_w": (H, H),
        "noise_b": (H,),
    }
    for i in range(cfg.num_layers):
        p = f"l{i}."
        shapes.update(
            {
                p + "ln1_g": (H,),
                p + "ln1_b": (H,),
                p + "wq": (H, H),
                p + "bq": (H,),
                p + "wk": (H, H),  # no key bias: softmax is invariant to it
                p + "wv": (H, H),
                p + "bv": (H,),
                p + "wo": (H, H),
                p + "bo": (H,),
                p + "ln2_g": (H,),
                p + "ln2_b": (H,),
                p + "w1": (H, F),
                p + "b1": (F,),
                p + "w2": (F, H),
                p + "b2": (H,),
            }
        )
    shapes.update(
        {
            "lnf_g": (H,),
            "lnf_b": (H,),
            "out_w": (H, cfg.D),
            "out_b": (cfg.D,),
            "gain_w": (H, cfg.D),
            "gain_b": (cfg.D,),
        }
    )
    return shapes


def init_params(cfg: DenoiserConfig, seed: int) -> DenoiserParams:
    """Seeded initialization: small normal weights, unit LayerNorm gains."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("_g"):
            tensors[name] = np.ones(shape)
        elif name.startswith("gain_") or name.endswith(("_b", "bq", "bv", "bo", "b1", "b2")):
            # The scaled head starts silent so early updates stay bounded.
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = rng.normal(0.0, 0.02, shape)
    return DenoiserParams(cfg, tensors)


def zero_grads(params: DenoiserParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


# --- feature encodings --------------------------------------------------------


def _sinusoid(values: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    ang = values[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _position_features(positions: np.ndarray, H: int) -> np.ndarray:
    half = H // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    return _sinusoid(positions.astype(float), freqs)


def _noise_features(alpha: np.ndarray, H: int) -> np.ndarray:
    half = H // 2
    freqs = np.exp(np.linspace(0.0, math.log(1000.0), half))
    return _sinusoid(alpha, freqs)


def _gelu(x):
    c = math.sqrt(2.0 / math.pi)
    inner = c * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner)), inner


def _gelu_grad(x, inner):
    c = math.sqrt(2.0 / math.pi)
    t = np.tanh(inner)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * c * (1.0 + 3.0 * 0.044715 * x**2)


def _layernorm(x, g, b, eps=1e-6):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_backward(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=0)
    db = dy.sum(axis=0)
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


# --- forward / backward -------------------------------------------------------


def forward(
    params: DenoiserParams,
    x_window: np.ndarray,
    c_window: np.ndarray,
    alpha_window: np.ndarray,
    mask_kind: str | None = None,
    positions: np.ndarray | None = None,
):
    """Run the network on a window of n frames.

    Returns (prediction (n, D), cache); the cache holds every activation the
    exact backward pass needs.  ``positions`` defaults to distance from the
    window end (n-1, ..., 0) and exists so tests can permute frames together
    with their positional indices.
    """
    cfg = params.cfg
    tp = params.tensors
    x = np.asarray(x_window, dtype=float)
    c = np.asarray(c_window, dtype=int)
    alpha = np.asarray(alpha_window, dtype=float)
    n = x.shape[0]
    if x.ndim != 2 or x.shape[1] != cfg.D:
        raise ValueError(f"x_window must be (n, {cfg.D})")
    if c.shape != (n,) or alpha.shape != (n,):
        raise ValueError("c_window and alpha_window must be length-n vectors")
    if n > cfg.max_context:
        raise ValueError(f"window length {n} exceeds max_context {cfg.max_context}")
    if np.any(c < 0) or np.any(c >= cfg.num_controls):
        raise ValueError(f"control id out of vocabulary [0, {cfg.num_controls})")
    mask_kind = mask_kind or cfg.mask_kind
    if mask_kind not in MASK_KINDS:
        raise ValueError(f"mask_kind must be one of {MASK_KINDS}")
    if positions is None:
        positions = np.arange(n - 1, -1, -1)

    nf = _noise_features(alpha, cfg.hidden)
    noise_emb = nf @ tp["noise_w"] + tp["noise_b"]
    h = x @ tp["in_w"] + tp["in_b"] + tp["ctrl_embed"][c] + noise_emb
    h = h + _position_features(positions, cfg.hidden)

    nh = cfg.num_heads
    dh = cfg.hidden // nh
    scale = 1.0 / math.sqrt(dh)
    if mask_kind == "causal":
        allowed = np.tril(np.ones((n, n), dtype=bool))
    else:
        allowed = np.ones((n, n), dtype=bool)

    cache = {"x": x, "c": c, "nf": nf, "h0": h.copy(), "allowed": allowed, "layers": [], "n": n}
    for i in range(cfg.num_layers):
        p = f"l{i}."
        a, ln1 = _layernorm(h, tp[p + "ln1_g"], tp[p + "ln1_b"])
        q = (a @ tp[p + "wq"] + tp[p + "bq"]).reshape(n, nh, dh).transpose(1, 0, 2)
        k = (a @ tp[p + "wk"]).reshape(n, nh, dh).transpose(1, 0, 2)
        v = (a @ tp[p + "wv"] + tp[p + "bv"]).reshape(n, nh, dh).transpose(1, 0, 2)
        scores = np.einsum("hid,hjd->hij", q, k) * scale
        scores = np.where(allowed[None], scores, -np.inf)
        scores -= scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        probs = e / e.sum(axis=-1, keepdims=True)
        mixed = np.einsum("hij,hjd->hid", probs, v)
        attn_flat = mixed.transpose(1, 0, 2).reshape(n, cfg.hidden)
        y = attn_flat @ tp[p + "wo"] + tp[p + "bo"]
        h1 = h + y

        a2, ln2 = _layernorm(h1, tp[p + "ln2_g"], tp[p + "ln2_b"])
        f1 = a2 @ tp[p + "w1"] + tp[p + "b1"]
        g, inner = _gelu(f1)
        f2 = g @ tp[p + "w2"] + tp[p + "b2"]
        h2 = h1 + f2

        cache["layers"].append(
            {"h_in": h, "a": a, "ln1": ln1, "q": q, "k": k, "v": v, "probs": probs,
             "attn_flat": attn_flat, "h1": h1, "a2": a2, "ln2": ln2, "f1": f1,
             "inner": inner, "g": g}
        )
        h = h2

    af, lnf = _layernorm(h, tp["lnf_g"], tp["lnf_b"])
    # Two-term head: a direct part plus a 1/beta-scaled part.  Exact clamp-path
    # targets are steep in x by a factor 1/beta near saturation (velocity is
    # (z - x)/beta); the scaled basis lets the trunk fit smooth functions only.
    inv_beta = 1.0 / np.maximum(1.0 - alpha, BETA_FEATURE_FLOOR)
    out = af @ tp["out_w"] + tp["out_b"] + (af @ tp["gain_w"] + tp["gain_b"]) * inv_beta[:, None]
    cache.update({"h_final": h, "af": af, "lnf": lnf, "inv_beta": inv_beta})
    return out, cache


def backward(params: DenoiserParams, cache, grad_output: np.ndarray) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients for the forward pass that built ``cache``."""
    cfg = params.cfg
    tp = params.tensors
    n = cache["n"]
    if grad_output.shape != (n, cfg.D):
        raise ValueError(f"grad_output must be ({n}, {cfg.D}); cache/params mismatch?")
    if len(cache["layers"]) != cfg.num_layers:
        raise ValueError("cache does not match params: layer count differs")
    grads = zero_grads(params)
    nh = cfg.num_heads
    dh = cfg.hidden // nh
    scale = 1.0 / math.sqrt(dh)

    scaled_grad = grad_output * cache["inv_beta"][:, None]
    grads["out_w"] = cache["af"].T @ grad_output
    grads["out_b"] = grad_output.sum(axis=0)
    grads["gain_w"] = cache["af"].T @ scaled_grad
    grads["gain_b"] = scaled_grad.sum(axis=0)
    daf = grad_output @ tp["out_w"].T + scaled_grad @ tp["gain_w"].T
    dh_, dg_, db_ = _layernorm_backward(daf, tp["lnf_g"], cache["lnf"])
    grads["lnf_g"], grads["lnf_b"] = dg_, db_

    for i in reversed(range(cfg.num_layers)):
        p = f"l{i}."
        lc = cache["layers"][i]

        # feedforward branch: h2 = h1 + f2
        dh1 = dh_.copy()
        df2 = dh_
        grads[p + "w2"] = lc["g"].T @ df2
        grads[p + "b2"] = df2.sum(axis=0)
        dg = df2 @ tp[p + "w2"].T
        df1 = dg * _gelu_grad(lc["f1"], lc["inner"])
        grads[p + "w1"] = lc["a2"].T @ df1
        grads[p + "b1"] = df1.sum(axis=0)
        da2 = df1 @ tp[p + "w1"].T
        dres, dg_, db_ = _layernorm_backward(da2, tp[p + "ln2_g"], lc["ln2"])
        grads[p + "ln2_g"], grads[p + "ln2_b"] = dg_, db_
        dh1 += dres

        # attention branch: h1 = h_in + attn(LN1(h_in))
        dh_in = dh1.copy()
        dy = dh1
        grads[p + "wo"] = lc["attn_flat"].T @ dy
        grads[p + "bo"] = dy.sum(axis=0)
        dmix = (dy @ tp[p + "wo"].T).reshape(n, nh, dh).transpose(1, 0, 2)
        dprobs = np.einsum("hid,hjd->hij", dmix, lc["v"])
        dv = np.einsum("hij,hid->hjd", lc["probs"], dmix)
        dscores = lc["probs"] * (dprobs - (dprobs * lc["probs"]).sum(axis=-1, keepdims=True))
        dq = np.einsum("hij,hjd->hid", dscores, lc["k"]) * scale
        dk = np.einsum("hij,hid->hjd", dscores, lc["q"]) * scale

        da = np.zeros_like(lc["a"])
        for name, dmat in (("wq", dq), ("wk", dk), ("wv", dv)):
            flat = dmat.transpose(1, 0, 2).reshape(n, cfg.hidden)
            grads[p + name] = lc["a"].T @ flat
            if name != "wk":
                grads[p + "b" + name[1]] = flat.sum(axis=0)
            da += flat @ tp[p + name].T
        dres, dg_, db_ = _layernorm_backward(da, tp[p + "ln1_g"], lc["ln1"])
        grads[p + "ln1_g"], grads[p + "ln1_b"] = dg_, db_
        dh_in += dres
        dh_ = dh_in

    # input encodings: h0 = x W_in + b_in + ctrl_embed[c] + noise_proj + pos
    grads["in_w"] = cache["x"].T @ dh_
    grads["in_b"] = dh_.sum(axis=0)
    np.add.at(grads["ctrl_embed"], cache["c"], dh_)
    grads["noise_w"] = cache["nf"].T @ dh_
    grads["noise_b"] = dh_.sum(axis=0)
    return grads


def cfg_velocity(
    params: DenoiserParams,
    x_window: np.ndarray,
    c_window: np.ndarray,
    alpha_window: np.ndarray,
    scale: float,
    mask_kind: str | None = None,
) -> np.ndarray:
    """Classifier-free-guided velocity on a window.

    Predictions are converted to velocities first, then combined as
    v_null + scale * (v_cond - v_null).  scale=1 returns exactly the
    conditioned velocity and scale=0 exactly the null-conditioned one
    (single forward pass each; the general formula cannot guarantee that
    bitwise).
    """
    if scale < 0:
        raise ValueError("cfg scale must be >= 0")
    cfg = params.cfg

    def run(controls):
        pred, _ = forward(params, x_window, controls, alpha_window, mask_kind)
        return window_velocity_from_prediction(
            cfg.prediction_kind, pred, np.asarray(x_window, dtype=float), np.asarray(alpha_window, dtype=float)
        )

    null = np.full(len(c_window), cfg.null_control_id, dtype=int)
    if scale == 1.0:
        return run(c_window)
    if scale == 0.0:
        return run(null)
    v_cond = run(c_window)
    v_null = run(null)
    return v_null + scale * (v_cond - v_null)


# --- checkpoint format --------------------------------------------------------
#
# A checkpoint is a .npz archive with a "__meta__" entry holding a UTF-8
# JSON document {"version", "config"} plus one float64 array per parameter
# tensor, keyed by the names in param_shapes().  Arrays round-trip bitwise.


def save_params(params: DenoiserParams, path):
    meta = json.dumps(
        {"version": CHECKPOINT_VERSION, "config": asdict(params.cfg)}, sort_keys=True
    )
    arrays = {"__meta__": np.frombuffer(meta.encode("utf-8"), dtype=np.uint8)}
    arrays.update(params.tensors)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_params(path) -> DenoiserParams:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise ValueError(f"{path}: not a parameter checkpoint (missing __meta__)")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        cfg = DenoiserConfig(**meta["config"])
        tensors = {}
        for name, shape in param_shapes(cfg).items():
            if name not in data:
                raise ValueError(f"{path}: checkpoint missing tensor {name!r}")
            arr = data[name]
            if arr.shape != shape:
                raise ValueError(f"{path}: tensor {name!r} has shape {arr.shape}, expected {shape}")
            tensors[name] = arr.astype(float, copy=True)
    return DenoiserParams(cfg, tensors)


def params_digest(params: DenoiserParams) -> bytes:
    """Canonical byte serialization, for bit-stability comparisons."""
    buf = io.BytesIO()
    for name in sorted(params.tensors):
        buf.write(name.encode())
        buf.write(params.tensors[name].tobytes())
    return buf.getvalue()
