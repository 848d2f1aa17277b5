"""Windowed flow-matching training on the active frame set.

Each step draws an atom (c, z) by weight, a time t ~ Unif(0, T) (resampled
while the active set is empty), and noise eps, forms x_t = alpha*z + beta*eps,
and regresses the network on the window 0..n(t) (truncated to the last
max_context frames) against the exact conditional target restricted to the
active set A.  The loss is the mean squared error over A x D only; frames
outside A contribute nothing.  Condition dropout replaces the whole
window's controls by the reserved null id with probability
cond_dropout_prob, enabling classifier-free guidance at sampling time.

With schedule_kind "random" a fresh random-ablation schedule is drawn per
step (per-frame noise levels in random order) and the window is the whole
sequence; this is the ablation baseline, not the streaming regime.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import schedule as S
from .corpus import ConditionedCorpus
from .denoiser import DenoiserConfig, DenoiserParams, backward, forward, init_params, zero_grads
from .gaussian_path import window_velocity_from_prediction

OPTIMIZERS = ("adam", "sgd")
SCHEDULE_KINDS = ("triangular", "random")


@dataclass
class TrainConfig:
    total_steps: int = 20000
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    batch_size: int = 1
    cond_dropout_prob: float = 0.0
    seed: int = 0
    n_s: float = 4.0
    K: int = 8
    schedule_kind: str = "triangular"
    lr_schedule: str = "constant"  # "constant" | "cosine" (anneal to 0 over the run)
    eval_every: int = 0  # 0 disables the oracle-MSE probe
    eval_probes: int = 64
    denoiser: DenoiserConfig = field(default_factory=lambda: DenoiserConfig(D=2))

    def __post_init__(self):
        if isinstance(self.denoiser, dict):
            self.denoiser = DenoiserConfig(**self.denoiser)
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.cond_dropout_prob < 1.0:
            raise ValueError("cond_dropout_prob must lie in [0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule_kind must be one of {SCHEDULE_KINDS}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError("lr_schedule must be 'constant' or 'cosine'")

    @property
    def prediction_kind(self) -> str:
        return self.denoiser.prediction_kind

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLogRecord:
    step: int
    loss: float
    velocity_mse_vs_oracle: float | None
    wall_time: float


class OptState:
    """Adam / SGD state over the parameter tree."""

    def __init__(self, params: DenoiserParams, cfg: TrainConfig):
        self.cfg = cfg
        self.step = 0
        self.lr_scale = 1.0
        if cfg.optimizer == "adam":
            self.m = zero_grads(params)
            self.v = zero_grads(params)

    def apply(self, params: DenoiserParams, grads: dict):
        self.step += 1
        lr = self.cfg.learning_rate * self.lr_scale
        if self.cfg.optimizer == "sgd":
            for k, g in grads.items():
                params.tensors[k] -= lr * g
            return
        b1, b2, eps = self.cfg.beta1, self.cfg.beta2, self.cfg.eps_opt
        c1 = 1.0 - b1**self.step
        c2 = 1.0 - b2**self.step
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            params.tensors[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + eps)


def conditional_target(kind: str, z, x, eps, alpha):
    """Exact conditional regression target on a window, per prediction kind.

    For the clamp schedules: velocity (z - x) / beta on the interior,
    epsilon the drawn noise, x0 the clean data, score -(x - alpha z)/beta^2.
    """
    beta = 1.0 - alpha
    interior = (alpha > 0.0) & (alpha < 1.0)
    safe_beta = np.where(interior, beta, 1.0)
    if kind == "velocity":
        return np.where(interior[:, None], (z - x) / safe_beta[:, None], 0.0)
    if kind == "epsilon":
        return eps
    if kind == "x0":
        return z
    return -(x - alpha[:, None] * z) / (safe_beta**2)[:, None]  # score


def _draw_training_point(corpus, sched_base, cfg, rng):
    """Sample (atom, t, schedule) with a non-empty active set.

    Returns (z, c, sched, t, window_lo, active_rows) where active_rows are
    window-relative indices of the frames whose loss is evaluated.
    """
    i = corpus.sample_atom(rng)
    z_full = corpus.frames[i]
    c_full = corpus.controls[i]
    for _ in range(1000):
        t = rng.uniform(0.0, sched_base.T)
        if cfg.schedule_kind == "random":
            sched = S.make_random_ablation(
                cfg.n_s, cfg.K, seed=int(rng.integers(0, 2**63 - 1))
            )
            alpha, _ = S.alpha_beta_at(sched, t)
            active = np.flatnonzero((alpha > 0.0) & (alpha < 1.0))
            if active.size == 0:
                continue
            return z_full, c_full, sched, t, 0, cfg.K, active
        win = S.active_window(sched_base, t)
        if win.is_empty:
            continue
        lo = max(0, win.n - cfg.denoiser.max_context)
        if win.m < lo:
            raise ValueError("max_context smaller than the active window width")
        active = np.arange(win.m - lo, win.n - lo)
        # Frames that saturated inside [m, n) carry no loss.
        return z_full, c_full, sched_base, t, lo, win.n, active
    raise RuntimeError("could not draw a time with a non-empty active set")


def train_step(
    params: DenoiserParams,
    corpus: ConditionedCorpus,
    sched: S.VectorizedSchedule,
    cfg: TrainConfig,
    rng: np.random.Generator,
    opt: OptState | None = None,
) -> tuple[DenoiserParams, float]:
    """One optimizer step (gradient averaged over cfg.batch_size draws)."""
    if corpus.num_atoms == 0:
        raise ValueError("corpus is empty")
    if opt is None:
        opt = OptState(params, cfg)
    total = zero_grads(params)
    loss_acc = 0.0
    kind = cfg.prediction_kind
    for _ in range(cfg.batch_size):
        z_full, c_full, sched_i, t, lo, hi, active = _draw_training_point(corpus, sched, cfg, rng)
        alpha_full, beta_full = S.alpha_beta_at(sched_i, t)
        eps_full = rng.standard_normal(z_full.shape)
        x_full = alpha_full[:, None] * z_full + beta_full[:, None] * eps_full

        zw, xw, ew = z_full[lo:hi], x_full[lo:hi], eps_full[lo:hi]
        aw = alpha_full[lo:hi]
        cw = c_full[lo:hi].copy()
        if cfg.cond_dropout_prob > 0.0 and rng.random() < cfg.cond_dropout_prob:
            cw[:] = cfg.denoiser.null_control_id

        target = conditional_target(kind, zw, xw, ew, aw)
        interior = (aw[active] > 0.0) & (aw[active] < 1.0)
        rows = active[interior] if kind == "velocity" else active
        if rows.size == 0:
            continue
        pred, cache = forward(params, xw, cw, aw)
        resid = pred[rows] - target[rows]
        loss = float((resid**2).mean())
        if not math.isfinite(loss):
            raise RuntimeError(f"non-finite training loss {loss} (t={t}, kind={kind})")
        loss_acc += loss
        grad_out = np.zeros_like(pred)
        grad_out[rows] = 2.0 * resid / resid.size
        g = backward(params, cache, grad_out)
        for k in total:
            total[k] += g[k]
    if cfg.batch_size > 1:
        for k in total:
            total[k] /= cfg.batch_size
    opt.apply(params, total)
    return params, loss_acc / cfg.batch_size


def train_loop(
    cfg: TrainConfig, corpus: ConditionedCorpus, progress: bool = False
) -> tuple[DenoiserParams, list[TrainLogRecord]]:
    """Run cfg.total_steps training steps; deterministic for a fixed seed.

    Every ``eval_every`` steps (if enabled) the exact-oracle velocity MSE is
    measured on a fixed probe set drawn once at the start.
    """
    if corpus.D != cfg.denoiser.D:
        raise ValueError(f"corpus D={corpus.D} does not match denoiser D={cfg.denoiser.D}")
    sched = S.make_triangular(cfg.n_s, cfg.K)
    if corpus.K != cfg.K:
        raise ValueError(f"corpus K={corpus.K} does not match train config K={cfg.K}")
    if cfg.denoiser.max_context < math.ceil(cfg.n_s):
        raise ValueError("max_context must cover the active window width ceil(n_s)")
    if cfg.schedule_kind == "random" and cfg.denoiser.max_context < cfg.K:
        raise ValueError("random-schedule training needs max_context >= K (no window exists)")
    params = init_params(cfg.denoiser, cfg.seed)
    opt = OptState(params, cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))

    probe = None
    if cfg.eval_every > 0:
        from .metrics import velocity_mse_vs_oracle

        def probe(p):
            return velocity_mse_vs_oracle(p, corpus, sched, cfg.eval_probes, seed=cfg.seed + 1)

    records: list[TrainLogRecord] = []
    t0 = time.perf_counter()
    for step in range(1, cfg.total_steps + 1):
        if cfg.lr_schedule == "cosine":
            opt.lr_scale = 0.5 * (1.0 + math.cos(math.pi * (step - 1) / cfg.total_steps))
        params, loss = train_step(params, corpus, sched, cfg, rng, opt)
        mse = None
        if probe is not None and (step % cfg.eval_every == 0 or step == cfg.total_steps):
            mse = probe(params)
        records.append(TrainLogRecord(step, loss, mse, time.perf_counter() - t0))
        if progress and step % max(1, cfg.total_steps // 20) == 0:
            tail = f" oracle_mse={mse:.5f}" if mse is not None else ""
            print(f"step {step:>7}/{cfg.total_steps} loss={loss:.5f}{tail}")
    return params, records


def save_train_log(records: list[TrainLogRecord], path):
    import json

    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(asdict(r), separators=(",", ":")) + "\n")
