"""Per-frame noise schedules and active-window arithmetic.

Every frame k of a length-K sequence carries its own noise level: a pair
(alpha_t^k, beta_t^k) with alpha + beta = 1, alpha rising from 0 (pure
noise) to 1 (clean data) as t runs over [0, T].  The triangular schedule

    alpha_t^k = clamp(t - k / n_s, 0, 1),      T = 1 + K / n_s

staggers the rise by k / n_s per frame, so denoising sweeps across the
sequence as a wave.  At any t the frames split into three exact regions:
finalized (alpha = 1), an active window of width <= ceil(n_s), and pure
noise (alpha = 0).  The window bounds are

    m(t) = ceil((t - 1) * n_s)     count of fully denoised frames
    n(t) = ceil(t * n_s)           count of activated frames

both clamped to [0, K].

A "random-ablation" schedule replaces the staggered offsets k / n_s with
i.i.d. uniform draws from [0, K / n_s]; it keeps the same total duration T
but has no deterministic active window, so the window operations reject it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TRIANGULAR = "triangular"
RANDOM_ABLATION = "random-ablation"

# Half-width of the snap band around the clamp kinks.  Solver grids place
# t at spacings >= 1e-6 while accumulated float error in t - k/n_s stays
# below ~1e-12, so snapping restores the exact saturation (alpha in {0,1})
# that real-valued arithmetic would give at lattice-aligned times.
KINK_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class ActiveWindow:
    """Frame index range [m, n) currently being denoised."""

    m: int
    n: int

    @property
    def is_empty(self) -> bool:
        return self.m == self.n

    @property
    def width(self) -> int:
        return self.n - self.m

    def indices(self) -> np.ndarray:
        return np.arange(self.m, self.n)


@dataclass(frozen=True)
class VectorizedSchedule:
    """Per-frame clamp schedule alpha_t^k = clamp(t - offset_k, 0, 1).

    ``offsets`` is k / n_s for the triangular kind and a seeded uniform
    draw from [0, K / n_s] for the random-ablation kind.  ``beta_floor``
    is the shared numerical floor used wherever a likelihood or score
    needs a strictly positive beta.
    """

    kind: str
    n_s: float
    K: int
    offsets: np.ndarray = field(repr=False)
    beta_floor: float = 1e-4
    seed: int | None = None

    @property
    def T(self) -> float:
        return 1.0 + self.K / self.n_s

    def __post_init__(self):
        if self.kind not in (TRIANGULAR, RANDOM_ABLATION):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.n_s > 0:
            raise ValueError(f"streaming slope n_s must be positive, got {self.n_s}")
        if self.K < 1:
            raise ValueError(f"sequence length K must be >= 1, got {self.K}")


def make_triangular(n_s: float, K: int, beta_floor: float = 1e-4) -> VectorizedSchedule:
    """Build the triangular schedule with slope ``n_s`` over ``K`` frames."""
    if not n_s > 0:
        raise ValueError(f"streaming slope n_s must be positive, got {n_s}")
    if K < 1:
        raise ValueError(f"sequence length K must be >= 1, got {K}")
    offsets = np.arange(K, dtype=float) / float(n_s)
    return VectorizedSchedule(TRIANGULAR, float(n_s), int(K), offsets, beta_floor)


def make_random_ablation(
    n_s: float, K: int, seed: int, beta_floor: float = 1e-4
) -> VectorizedSchedule:
    """Ablation schedule: per-frame offsets drawn uniformly from [0, K/n_s].

    Total denoising duration matches the triangular case so the two kinds
    are directly comparable, but frames activate in a random order and no
    contiguous active window exists.
    """
    if not n_s > 0:
        raise ValueError(f"streaming slope n_s must be positive, got {n_s}")
    if K < 1:
        raise ValueError(f"sequence length K must be >= 1, got {K}")
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(0.0, K / float(n_s), size=K)
    return VectorizedSchedule(RANDOM_ABLATION, float(n_s), int(K), offsets, beta_floor, seed)


def _snapped_ramp(t: float, offsets: np.ndarray) -> np.ndarray:
    """t - offsets with values within KINK_SNAP_TOL of a kink snapped onto it."""
    u = t - offsets
    u = np.where(np.abs(u - 1.0) <= KINK_SNAP_TOL, 1.0, u)
    u = np.where(np.abs(u) <= KINK_SNAP_TOL, 0.0, u)
    return u


def alpha_beta_at(sched: VectorizedSchedule, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (alpha, beta) at time t for all K frames.

    Raises ValueError when t lies outside [0, T].
    """
    if t < 0.0 or t > sched.T:
        raise ValueError(f"t={t} outside schedule range [0, {sched.T}]")
    alpha = np.clip(_snapped_ramp(t, sched.offsets), 0.0, 1.0)
    return alpha, 1.0 - alpha


def alpha_for_frames(sched: VectorizedSchedule, t: float, frames: np.ndarray) -> np.ndarray:
    """Alpha values for explicit frame indices, without the [0, T] range check.

    Streaming helpers use this to evaluate the clamp formula for arbitrary
    frame indices (triangular kind only, where offset_k = k / n_s extends
    past K naturally).
    """
    frames = np.asarray(frames)
    if sched.kind == TRIANGULAR:
        offs = frames / sched.n_s
    else:
        if np.any(frames >= sched.K):
            raise ValueError("random-ablation offsets are only defined for k < K")
        offs = sched.offsets[frames]
    return np.clip(_snapped_ramp(t, offs), 0.0, 1.0)


def alpha_beta_dot_at(sched: VectorizedSchedule, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of (alpha, beta) at t.

    The clamp ramp has slope 1 strictly inside (0, 1) and slope 0 outside;
    at the kinks the subgradient 0 is returned so finalized and pure-noise
    frames carry exactly zero drift.
    """
    if t < 0.0 or t > sched.T:
        raise ValueError(f"t={t} outside schedule range [0, {sched.T}]")
    u = _snapped_ramp(t, sched.offsets)
    alpha_dot = ((u > 0.0) & (u < 1.0)).astype(float)
    return alpha_dot, -alpha_dot


def active_window(sched: VectorizedSchedule, t: float) -> ActiveWindow:
    """Window [m(t), n(t)) of frames currently in transit from noise to data."""
    if sched.kind != TRIANGULAR:
        raise ValueError(
            "active_window requires the triangular schedule; the random-ablation "
            "kind has no deterministic window"
        )
    if t < 0.0 or t > sched.T:
        raise ValueError(f"t={t} outside schedule range [0, {sched.T}]")
    m = min(max(math.ceil((t - 1.0) * sched.n_s), 0), sched.K)
    n = min(max(math.ceil(t * sched.n_s), 0), sched.K)
    return ActiveWindow(m, n)


def check_saturation(sched: VectorizedSchedule, t: float) -> np.ndarray:
    """Indices violating exact saturation outside the active window.

    Evaluates the clamp formula coordinate-wise and verifies alpha = 1,
    beta = 0 strictly before m(t) and alpha = 0, beta = 1 from n(t) on.
    Returns the violating indices; an empty array means the saturation
    property holds exactly.
    """
    win = active_window(sched, t)
    alpha, beta = alpha_beta_at(sched, t)
    k = np.arange(sched.K)
    before_bad = (k < win.m) & ((alpha != 1.0) | (beta != 0.0))
    after_bad = (k >= win.n) & ((alpha != 0.0) | (beta != 1.0))
    return k[before_bad | after_bad]


def finalized_count(sched: VectorizedSchedule, t: float) -> int:
    """Number of frames whose alpha has saturated to exactly 1 at time t.

    Agrees with m(t) away from the lattice instants t = 1 + k / n_s; at a
    lattice instant the boundary frame is already saturated and counted,
    while the ceiling in m(t) only picks it up afterwards.
    """
    if sched.kind != TRIANGULAR:
        raise ValueError("finalized_count requires the triangular schedule")
    alpha = alpha_for_frames(sched, t, np.arange(sched.K))
    saturated = np.flatnonzero(alpha < 1.0)
    return int(saturated[0]) if saturated.size else sched.K
