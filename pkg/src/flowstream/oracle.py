"""Exact marginal dynamics over finite-mixture corpora.

For a finite mixture p(z | c) = sum_i w_i * delta(z - z_i), the posterior
mean given a noisy state x at time t is computable in closed form:

    log w_i(x) = log w_i - 1/2 * sum_{k,d} ((x - alpha_k z_i) / sigma_k)^2
    g(x, c)    = sum_i softmax(log w)_i * z_i

with sigma_k = max(beta_k, beta_floor) so the evaluation stays total off
the data manifold (the exact delta factor would only be defined on it).
Every marginal prediction is then the affine form a * g + b * x with the
coefficients of the requested parameterization, which makes this module
the ground truth for every learned or sampled quantity in the package.

Conditioning accepts a control prefix: the inputs (x, c) may cover only
frames 0..L-1, in which case atoms are matched by track prefix and the
likelihood runs over those frames alone.  Because tracks agreeing on a
control prefix induce the same frame-prefix law, prefix conditioning
agrees with full-sequence conditioning wherever both are defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import schedule as sched_mod
from .corpus import ConditionedCorpus
from .schedule import ActiveWindow, VectorizedSchedule, active_window


@dataclass(frozen=True)
class LocalityReport:
    """Largest absolute drift found outside the active window."""

    max_abs_drift_before_window: float
    max_abs_drift_after_window: float
    window: ActiveWindow


def _prefix_setup(x, c, t, sched, corpus):
    """Shared slicing: match atoms by prefix, slice schedule to the prefix."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=int)
    batched = x.ndim == 3
    L = x.shape[-2]
    if c.shape != (L,):
        raise ValueError(f"control prefix length {c.shape} does not match x frames {L}")
    idx = corpus.match_prefix(c)
    alpha, beta = sched_mod.alpha_beta_at(sched, t)
    return x if batched else x[None], idx, alpha[:L], beta[:L], batched


def posterior_mean(x, c, t, sched: VectorizedSchedule, corpus: ConditionedCorpus) -> np.ndarray:
    """Posterior expectation of the clean data given (x, c) at time t.

    ``x`` may be (L, D) or batched (B, L, D) with matching control prefix
    length L <= K; the result has the same leading shape.
    """
    xb, idx, alpha, beta, batched = _prefix_setup(x, c, t, sched, corpus)
    g = _posterior_mean_batch(xb, idx, alpha, beta, sched.beta_floor, corpus)
    return g if batched else g[0]


def _posterior_mean_batch(xb, idx, alpha, beta, beta_floor, corpus):
    L = xb.shape[-2]
    atoms = corpus.frames[idx][:, :L]  # (A, L, D)
    prior = corpus.weights[idx]
    prior = prior / prior.sum()
    sigma = np.maximum(beta, beta_floor)
    # (B, A): residuals of every state against every atom mean.
    resid = xb[:, None] - alpha[None, None, :, None] * atoms[None]
    logw = np.log(prior)[None, :] - 0.5 * np.sum((resid / sigma[None, None, :, None]) ** 2, axis=(2, 3))
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    return np.einsum("ba,ald->bld", w, atoms)


def _velocity_coeffs(t, sched, L):
    """Velocity affine coefficients on the first L frames, zero where static."""
    alpha, beta = sched_mod.alpha_beta_at(sched, t)
    alpha_dot, beta_dot = sched_mod.alpha_beta_dot_at(sched, t)
    alpha, beta = alpha[:L], beta[:L]
    alpha_dot, beta_dot = alpha_dot[:L], beta_dot[:L]
    active = (alpha_dot != 0.0) | (beta_dot != 0.0)
    if np.any(active & (beta == 0.0)):
        raise ValueError("velocity undefined: beta = 0 on a moving coordinate")
    safe_beta = np.where(active, beta, 1.0)
    b = np.where(active, beta_dot / safe_beta, 0.0)
    a = np.where(active, alpha_dot - b * alpha, 0.0)
    return a, b


def marginal_velocity(x, c, t, sched: VectorizedSchedule, corpus: ConditionedCorpus) -> np.ndarray:
    """Exact marginal velocity field u = a * g(x, c) + b * x.

    Exactly zero on coordinates whose schedule derivatives vanish, which
    for the triangular schedule means everything outside [m(t), n(t)).
    """
    xb, idx, alpha, beta, batched = _prefix_setup(x, c, t, sched, corpus)
    g = _posterior_mean_batch(xb, idx, alpha, beta, sched.beta_floor, corpus)
    a, b = _velocity_coeffs(t, sched, xb.shape[-2])
    u = a[None, :, None] * g + b[None, :, None] * xb
    return u if batched else u[0]


def marginal_score(x, c, t, sched: VectorizedSchedule, corpus: ConditionedCorpus) -> np.ndarray:
    """Exact marginal score field.

    Uses s = (alpha * g - x) / beta^2 wherever beta >= beta_floor (this
    reduces to -x in the pure-noise region where alpha = 0); finalized
    coordinates with beta < beta_floor return the saturation limit
    -x / beta_floor.
    """
    xb, idx, alpha, beta, batched = _prefix_setup(x, c, t, sched, corpus)
    g = _posterior_mean_batch(xb, idx, alpha, beta, sched.beta_floor, corpus)
    finalized = beta < sched.beta_floor
    safe_beta = np.where(finalized, 1.0, beta)
    s = (alpha[None, :, None] * g - xb) / (safe_beta**2)[None, :, None]
    s = np.where(finalized[None, :, None], -xb / sched.beta_floor, s)
    return s if batched else s[0]


def verify_locality(x, c, t, sched: VectorizedSchedule, corpus: ConditionedCorpus) -> LocalityReport:
    """Evaluate the full marginal velocity and measure drift outside [m, n).

    Requires the triangular schedule (the report is meaningless without a
    deterministic window).  Both maxima must be <= 1e-9 for the streaming
    locality property to hold; the caller asserts.
    """
    win = active_window(sched, t)  # rejects the random-ablation kind
    u = marginal_velocity(x, c, t, sched, corpus)
    u = u if u.ndim == 3 else u[None]
    L = u.shape[-2]
    before = float(np.abs(u[:, : min(win.m, L)]).max()) if min(win.m, L) > 0 else 0.0
    after = float(np.abs(u[:, win.n :]).max()) if L > win.n else 0.0
    return LocalityReport(before, after, win)


def oracle_sample(
    c, steps_per_unit: int, seed, sched: VectorizedSchedule, corpus: ConditionedCorpus
) -> np.ndarray:
    """Deterministic Euler flow of the exact marginal field from noise to data."""
    return oracle_sample_many(c, 1, steps_per_unit, seed, sched, corpus)[0]


def oracle_sample_many(
    c, count: int, steps_per_unit: int, seed, sched: VectorizedSchedule, corpus: ConditionedCorpus
) -> np.ndarray:
    """Vectorized oracle sampling: ``count`` independent Euler trajectories.

    Each trajectory starts from N(0, I) and integrates dx = u dt with
    dt = 1 / steps_per_unit across [0, T]; returns the (count, K, D) batch
    of endpoints.
    """
    if steps_per_unit < 1:
        raise ValueError("steps_per_unit must be >= 1")
    c = np.asarray(c, dtype=int)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.standard_normal((count, c.size, corpus.D))
    dt = 1.0 / steps_per_unit
    num_steps = int(np.ceil(sched.T * steps_per_unit - 1e-9))
    for i in range(num_steps):
        t = i * dt
        x = x + dt * marginal_velocity(x, c, t, sched, corpus)
    return x


def window_sensitivity(
    x,
    c,
    t,
    sched: VectorizedSchedule,
    corpus: ConditionedCorpus,
    k_src: int,
    k_dst: int,
    h: float = 1e-5,
) -> float:
    """Finite-difference magnitude of the dependence of u[k_dst] on x[k_src].

    Certifies that the exact field can depend on in-window *future* frames
    (k_src > k_dst), which a strictly causal attention mask cannot express.
    Returns the largest |d u[k_dst, :] / d x[k_src, d]| over features d.
    """
    x = np.asarray(x, dtype=float)
    best = 0.0
    for d in range(x.shape[1]):
        hi, lo = x.copy(), x.copy()
        hi[k_src, d] += h
        lo[k_src, d] -= h
        du = (
            marginal_velocity(hi, c, t, sched, corpus)[k_dst]
            - marginal_velocity(lo, c, t, sched, corpus)[k_dst]
        ) / (2.0 * h)
        best = max(best, float(np.abs(du).max()))
    return best
