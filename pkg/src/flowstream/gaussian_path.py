"""Conditional Gaussian probability paths and prediction parameterizations.

The forward corruption at time t mixes clean data z with white noise eps,
per frame:

    x = alpha_t * z + beta_t * eps        (alpha, beta broadcast over D)

All quantities a denoiser may regress (velocity, noise, clean data, score)
are affine in (z, x) with per-frame coefficients:

    velocity  u = (alpha' - beta'/beta * alpha) * z + (beta'/beta) * x
    epsilon   e = (-alpha/beta) * z + (1/beta) * x
    x0        z = 1 * z + 0 * x
    score     s = (alpha/beta^2) * z + (-1/beta^2) * x

For the clamp schedules used here (alpha + beta = 1, alpha' in {0, 1}) the
velocity collapses to (z - x) / beta on active coordinates and is exactly
zero elsewhere.  Conversions between the parameterizations recover the
implied clean data and re-apply the velocity coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import VectorizedSchedule, alpha_beta_at, alpha_beta_dot_at

PREDICTION_KINDS = ("velocity", "epsilon", "x0", "score")


@dataclass(frozen=True)
class PathPoint:
    """One draw from the corruption path: x = alpha_t * z + beta_t * eps."""

    x: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    t: float


def _check_kind(kind: str):
    if kind not in PREDICTION_KINDS:
        raise ValueError(f"unknown prediction kind {kind!r}; expected one of {PREDICTION_KINDS}")


def corrupt(z: np.ndarray, t: float, sched: VectorizedSchedule, noise_seed) -> PathPoint:
    """Draw eps ~ N(0, I) and form the noisy state at time t.

    ``noise_seed`` may be an int seed or a numpy Generator; a fixed seed
    gives a bit-reproducible draw.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("clean data must be finite")
    rng = noise_seed if isinstance(noise_seed, np.random.Generator) else np.random.default_rng(noise_seed)
    eps = rng.standard_normal(z.shape)
    alpha, beta = alpha_beta_at(sched, t)
    x = alpha[:, None] * z + beta[:, None] * eps
    return PathPoint(x=x, z=z, eps=eps, t=t)


def conditional_velocity(pp: PathPoint, sched: VectorizedSchedule) -> np.ndarray:
    """Exact velocity of the conditional path at pp, zero off the active set."""
    a, b = affine_coeffs("velocity", pp.t, sched)
    return a[:, None] * pp.z + b[:, None] * pp.x


def conditional_score(pp: PathPoint, sched: VectorizedSchedule) -> np.ndarray:
    """Score of the conditional Gaussian: -(x - alpha*z) / beta^2.

    Defined only where beta > 0; a finalized coordinate raises.
    """
    alpha, beta = alpha_beta_at(sched, pp.t)
    if np.any(beta == 0.0):
        raise ValueError("conditional score undefined on coordinates with beta = 0")
    return -(pp.x - alpha[:, None] * pp.z) / (beta**2)[:, None]


def affine_coeffs(
    kind: str, t: float, sched: VectorizedSchedule, frames: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (a, b) of the affine form  f = a * z + b * x  for ``kind``.

    ``frames`` restricts the result to a coordinate subset; kinds that
    divide by beta (epsilon, score) raise if any requested coordinate has
    beta = 0.  The velocity kind returns exact zeros wherever both
    schedule derivatives vanish.
    """
    _check_kind(kind)
    alpha, beta = alpha_beta_at(sched, t)
    if frames is not None:
        frames = np.asarray(frames)
        alpha, beta = alpha[frames], beta[frames]

    if kind == "x0":
        return np.ones_like(alpha), np.zeros_like(alpha)

    if kind == "velocity":
        alpha_dot, beta_dot = alpha_beta_dot_at(sched, t)
        if frames is not None:
            alpha_dot, beta_dot = alpha_dot[frames], beta_dot[frames]
        active = (alpha_dot != 0.0) | (beta_dot != 0.0)
        if np.any(active & (beta == 0.0)):
            raise ValueError("velocity coefficients undefined: beta = 0 on a moving coordinate")
        safe_beta = np.where(active, beta, 1.0)
        ratio = np.where(active, beta_dot / safe_beta, 0.0)
        a = np.where(active, alpha_dot - ratio * alpha, 0.0)
        return a, ratio

    if np.any(beta == 0.0):
        raise ValueError(f"{kind} coefficients undefined on coordinates with beta = 0")
    if kind == "epsilon":
        # The algebraically consistent inverse of x = alpha*z + beta*eps.
        return -alpha / beta, 1.0 / beta
    return alpha / beta**2, -1.0 / beta**2  # score


def velocity_from_score(
    s: np.ndarray, x: np.ndarray, t: float, sched: VectorizedSchedule
) -> np.ndarray:
    """Convert a score field into the corresponding velocity field.

        u = (beta^2 * alpha'/alpha - beta' * beta) * s + (alpha'/alpha) * x

    Coordinates with zero schedule derivatives return exactly 0 regardless
    of s; a moving coordinate with alpha = 0 raises (the conversion is
    undefined there).
    """
    alpha, beta = alpha_beta_at(sched, t)
    alpha_dot, beta_dot = alpha_beta_dot_at(sched, t)
    active = (alpha_dot != 0.0) | (beta_dot != 0.0)
    if np.any(active & (alpha == 0.0)):
        raise ValueError("velocity_from_score undefined: alpha = 0 on a moving coordinate")
    safe_alpha = np.where(active, alpha, 1.0)
    da = np.where(active, alpha_dot / safe_alpha, 0.0)
    coef = beta**2 * da - np.where(active, beta_dot * beta, 0.0)
    return coef[:, None] * s + da[:, None] * x


def to_velocity(
    kind: str, prediction: np.ndarray, x: np.ndarray, t: float, sched: VectorizedSchedule
) -> np.ndarray:
    """Convert a prediction of the given kind into a velocity field.

    The velocity kind passes through bitwise.  Other kinds recover the
    implied clean data on moving coordinates and re-apply the velocity
    coefficients; coordinates with zero derivatives map to exactly 0.
    """
    _check_kind(kind)
    if kind == "velocity":
        return prediction
    alpha, beta = alpha_beta_at(sched, t)
    alpha_dot, beta_dot = alpha_beta_dot_at(sched, t)
    active = (alpha_dot != 0.0) | (beta_dot != 0.0)
    if kind in ("epsilon", "score") and np.any(active & ((alpha == 0.0) | (beta == 0.0))):
        raise ValueError(f"{kind} prediction not convertible where alpha or beta is 0")
    if np.any(active & (beta == 0.0)):
        raise ValueError("velocity undefined: beta = 0 on a moving coordinate")

    safe_alpha = np.where(active, np.where(alpha == 0.0, 1.0, alpha), 1.0)
    safe_beta = np.where(active, beta, 1.0)
    if kind == "x0":
        z_hat = prediction
    elif kind == "epsilon":
        z_hat = (x - safe_beta[:, None] * prediction) / safe_alpha[:, None]
    else:  # score
        z_hat = ((safe_beta**2)[:, None] * prediction + x) / safe_alpha[:, None]

    a, b = affine_coeffs("velocity", t, sched)
    u = a[:, None] * z_hat + b[:, None] * x
    return np.where(active[:, None], u, 0.0)


def window_velocity_from_prediction(
    kind: str, prediction: np.ndarray, x: np.ndarray, alpha: np.ndarray
) -> np.ndarray:
    """Clamp-schedule conversion on a window, from alpha values alone.

    Under any clamp schedule a coordinate is in transit exactly when
    0 < alpha < 1 (with beta = 1 - alpha and unit slope), so the velocity
    on the window follows from the per-frame alpha the network was fed:

        velocity  u = prediction            (identity, bitwise)
        x0        u = (pred - x) / beta
        epsilon   u = (x - pred) / alpha
        score     u = (beta * pred + x) / alpha

    Saturated coordinates (alpha in {0, 1}) get exactly zero velocity for
    the non-identity kinds.
    """
    _check_kind(kind)
    if kind == "velocity":
        return prediction
    interior = (alpha > 0.0) & (alpha < 1.0)
    safe_alpha = np.where(interior, alpha, 1.0)
    safe_beta = np.where(interior, 1.0 - alpha, 1.0)
    if kind == "x0":
        u = (prediction - x) / safe_beta[:, None]
    elif kind == "epsilon":
        u = (x - prediction) / safe_alpha[:, None]
    else:  # score
        u = (safe_beta[:, None] * prediction + x) / safe_alpha[:, None]
    return np.where(interior[:, None], u, 0.0)
