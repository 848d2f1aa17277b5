"""Streaming windowed Euler / Euler-Maruyama inference with frame emission.

The stream advances t by 1/steps_per_unit per solver step.  At each step
the strictly interior frames of the active window [m(t), n(t)) receive an
Euler update from the guided velocity; frames activate lazily (their
initial noise comes from a per-frame counter-based generator, so unbounded
streams stay memory-bounded and bit-replayable) and are emitted exactly
once, in index order, at the step where their alpha saturates to 1.  A
frame's control id is fetched from the control provider at activation and
never rebound.

The stochastic variant adds window-masked noise: on interior coordinates
the score is recovered from the velocity via  s = (alpha * v - x) / beta
and the update becomes  x += [v + (sigma0^2/2) s] dt + sigma0 sqrt(dt) xi.
The noise and score terms additionally switch off where beta < sigma0 *
sqrt(dt): there the explicit Euler factor dt * sigma0^2 / (2 beta^2) of
the score pull exceeds 1 and the discretization oscillates, so a frame's
last few solver steps run deterministically (no diffusion where beta is
nearly 0).  With sigma0 = 0 the code path is identical to the
deterministic one.

``generate_full`` integrates the same dynamics over a preallocated K x D
buffer with no truncation or emission machinery; when max_context covers
the sequence, streaming reproduces it bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import schedule as S
from .denoiser import DenoiserParams, cfg_velocity
from .schedule import TRIANGULAR, VectorizedSchedule


@dataclass
class SampleConfig:
    steps_per_unit: int = 32
    cfg_scale: float = 1.0
    sigma0: float = 0.0  # 0 disables the stochastic term
    seed: int = 0
    unbounded: bool = False
    max_context: int | None = None  # None: the network's own limit

    def __post_init__(self):
        if self.steps_per_unit < 1:
            raise ValueError("steps_per_unit must be >= 1")
        if self.sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")


@dataclass(frozen=True)
class EmissionRecord:
    frame_index: int
    step_index: int
    values: np.ndarray
    alpha_snapshot: float


@dataclass
class StreamState:
    """Mutable sampler state: activated buffer, finalized prefix, controls."""

    t: float = 0.0
    step_index: int = 0
    buffer: dict = field(default_factory=dict)  # frame index -> (D,) array
    controls: dict = field(default_factory=dict)  # frame index -> control id
    finalized_count: int = 0
    activated_count: int = 0
    emitted_count: int = 0


def _frame_noise(seed: int, k: int, D: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, k)))
    return rng.standard_normal(D)


def _step_noise(seed: int, step: int, k: int, D: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, step, k)))
    return rng.standard_normal(D)


def _resolve_source(velocity_source, cfg: SampleConfig, D: int | None):
    """Normalize to (fn(x_win, c_win, alpha_win, t, lo), max_context, D)."""
    if isinstance(velocity_source, DenoiserParams):
        params = velocity_source

        def fn(xw, cw, aw, t, lo):
            return cfg_velocity(params, xw, cw, aw, cfg.cfg_scale)

        ctx = params.cfg.max_context
        if cfg.max_context is not None:
            ctx = min(ctx, cfg.max_context)
        return fn, ctx, params.cfg.D
    if not callable(velocity_source):
        raise TypeError("velocity source must be DenoiserParams or a callable")
    if D is None:
        raise ValueError("D must be given for a callable velocity source")
    ctx = cfg.max_context if cfg.max_context is not None else 1 << 30
    return velocity_source, ctx, int(D)


class StreamSession:
    """One live stream: step the solver, collect emissions, inspect state."""

    def __init__(self, velocity_source, control_provider, sched: VectorizedSchedule,
                 cfg: SampleConfig, D: int | None = None):
        if sched.kind != TRIANGULAR:
            raise ValueError("streaming requires the triangular schedule")
        self.sched = sched
        self.cfg = cfg
        self.control_provider = control_provider
        self.velocity_fn, self.max_context, self.D = _resolve_source(velocity_source, cfg, D)
        if self.max_context < math.ceil(sched.n_s):
            raise ValueError("max_context must cover the active window width ceil(n_s)")
        self.dt = 1.0 / cfg.steps_per_unit
        self.state = StreamState()
        self.K = None if cfg.unbounded else sched.K
        self.total_steps = (
            None if cfg.unbounded else int(math.ceil(sched.T * cfg.steps_per_unit - 1e-9))
        )

    @property
    def done(self) -> bool:
        return self.K is not None and self.state.emitted_count >= self.K

    def _bounds(self, t: float) -> tuple[int, int]:
        m = max(math.ceil((t - 1.0) * self.sched.n_s), 0)
        n = max(math.ceil(t * self.sched.n_s), 0)
        if self.K is not None:
            m, n = min(m, self.K), min(n, self.K)
        return m, n

    def window_state(self) -> dict:
        m, n = self._bounds(self.state.t)
        return {
            "t": self.state.t,
            "m": self.state.finalized_count,
            "n": self.state.activated_count,
            "window_m": m,
            "window_n": n,
            "pending": [
                {"frame": k, "control": int(self.state.controls[k])}
                for k in range(self.state.finalized_count, self.state.activated_count)
            ],
        }

    def step(self) -> list[EmissionRecord]:
        """Advance one solver step; return the frames it finalized."""
        st = self.state
        t = st.step_index * self.dt
        m, n = self._bounds(t)

        for k in range(st.activated_count, n):
            cid = self.control_provider(k)
            if cid is None or int(cid) < 0:
                raise RuntimeError(f"control provider failed for frame {k}")
            st.buffer[k] = _frame_noise(self.cfg.seed, k, self.D)
            st.controls[k] = int(cid)
        st.activated_count = max(st.activated_count, n)

        if n > m:
            lo = max(0, n - self.max_context)
            frames = np.arange(lo, n)
            xw = np.stack([st.buffer[k] for k in frames])
            cw = np.array([st.controls[k] for k in frames], dtype=int)
            aw = S.alpha_for_frames(self.sched, t, frames)
            v = self.velocity_fn(xw, cw, aw, t, lo)
            rows = np.flatnonzero((aw > 0.0) & (aw < 1.0) & (frames >= m))
            sig = self.cfg.sigma0
            stable = sig * math.sqrt(self.dt)
            for r in rows:
                kf = int(frames[r])
                beta_r = 1.0 - aw[r]
                if sig > 0.0 and beta_r >= stable:
                    score = (aw[r] * v[r] - xw[r]) / beta_r
                    st.buffer[kf] = (
                        xw[r]
                        + self.dt * (v[r] + 0.5 * sig * sig * score)
                        + sig * math.sqrt(self.dt) * _step_noise(self.cfg.seed, st.step_index, kf, self.D)
                    )
                else:
                    st.buffer[kf] = xw[r] + self.dt * v[r]

        st.step_index += 1
        st.t = st.step_index * self.dt
        return self._emit()

    def _emit(self) -> list[EmissionRecord]:
        st = self.state
        out = []
        while True:
            k = st.emitted_count
            if (self.K is not None and k >= self.K) or k >= st.activated_count:
                break
            alpha_k = float(S.alpha_for_frames(self.sched, st.t, np.array([k]))[0])
            if alpha_k < 1.0:
                break
            out.append(EmissionRecord(k, st.step_index, st.buffer[k].copy(), alpha_k))
            st.emitted_count += 1
            st.finalized_count = st.emitted_count
        self._prune()
        return out

    def _prune(self):
        # Drop emitted frames that can no longer appear in any context window.
        st = self.state
        keep_from = max(0, st.activated_count - self.max_context)
        for k in list(st.buffer):
            if k < min(keep_from, st.emitted_count):
                del st.buffer[k]
                st.controls.pop(k, None)


def open_stream(velocity_source, control_provider, sched, cfg, D=None) -> StreamSession:
    return StreamSession(velocity_source, control_provider, sched, cfg, D)


def stream_generate(
    velocity_source,
    control_provider,
    sched: VectorizedSchedule,
    cfg: SampleConfig,
    D: int | None = None,
):
    """Yield EmissionRecords for a bounded or unbounded stream.

    Bounded streams terminate once all K frames are emitted (T covered by
    ceil(T * steps_per_unit) solver steps); unbounded streams run forever.
    """
    session = open_stream(velocity_source, control_provider, sched, cfg, D)
    if cfg.unbounded:
        while True:
            yield from session.step()
        return
    budget = session.total_steps + 2 * cfg.steps_per_unit
    for _ in range(budget):
        yield from session.step()
        if session.done:
            return
    raise RuntimeError("stream failed to finalize every frame within the step budget")


def stream_generate_sde(velocity_source, control_provider, sched, cfg: SampleConfig, D=None):
    """Stochastic stream (sigma0 > 0); sigma0 = 0 degenerates to stream_generate."""
    return stream_generate(velocity_source, control_provider, sched, cfg, D)


def collect_stream(velocity_source, controls, sched, cfg, D=None) -> tuple[np.ndarray, list]:
    """Run a bounded stream on a fixed control track; return (K x D, records)."""
    controls = np.asarray(controls, dtype=int)
    records = list(
        stream_generate(velocity_source, lambda k: int(controls[k]), sched, cfg, D)
    )
    x = np.stack([r.values for r in sorted(records, key=lambda r: r.frame_index)])
    return x, records


def generate_full(
    velocity_source, controls, sched: VectorizedSchedule, cfg: SampleConfig, D: int | None = None
) -> np.ndarray:
    """Reference integrator over a preallocated K x D buffer, no truncation.

    For the triangular schedule the network context is the prefix 0..n(t);
    for the random-ablation schedule it is the whole sequence and the update
    mask is the set of strictly interior coordinates.
    """
    controls = np.asarray(controls, dtype=int)
    K = sched.K
    if controls.shape != (K,):
        raise ValueError(f"controls must have length K={K}")
    velocity_fn, _, D = _resolve_source(velocity_source, cfg, D)
    x = np.stack([_frame_noise(cfg.seed, k, D) for k in range(K)])
    dt = 1.0 / cfg.steps_per_unit
    num_steps = int(math.ceil(sched.T * cfg.steps_per_unit - 1e-9))
    all_frames = np.arange(K)
    sig = cfg.sigma0
    for i in range(num_steps):
        t = i * dt
        alpha = S.alpha_for_frames(sched, t, all_frames)
        if sched.kind == TRIANGULAR:
            m = min(max(math.ceil((t - 1.0) * sched.n_s), 0), K)
            n = min(max(math.ceil(t * sched.n_s), 0), K)
            if n == 0:
                continue
            win = np.arange(0, n)
            rows = np.flatnonzero((alpha[win] > 0) & (alpha[win] < 1) & (win >= m))
        else:
            win = all_frames
            rows = np.flatnonzero((alpha > 0) & (alpha < 1))
        if rows.size == 0:
            continue
        aw = alpha[win]
        v = velocity_fn(x[win], controls[win], aw, t, int(win[0]))
        stable = sig * math.sqrt(dt)
        for r in rows:
            kf = int(win[r])
            beta_r = 1.0 - aw[r]
            if sig > 0.0 and beta_r >= stable:
                score = (aw[r] * v[r] - x[kf]) / beta_r
                x[kf] = x[kf] + dt * (v[r] + 0.5 * sig * sig * score) + sig * math.sqrt(
                    dt
                ) * _step_noise(cfg.seed, i, kf, D)
            else:
                x[kf] = x[kf] + dt * v[r]
    return x


@dataclass(frozen=True)
class ReplayReport:
    first_divergent_frame: int | None
    switch_frame: int
    activation_step: int
    frames_before_activation_identical: bool


def replay_check(
    velocity_source, controls_a, controls_b, sched: VectorizedSchedule, cfg: SampleConfig,
    D: int | None = None,
) -> ReplayReport:
    """Replay two control tracks with the same seed and locate the divergence.

    The tracks must agree on a prefix.  The report carries the first frame
    whose emitted values differ (None if none), the first differing control
    index j, the solver step count at which frame j activated, and whether
    every frame emitted strictly before that step was bit-identical across
    the two runs.
    """
    a = np.asarray(controls_a, dtype=int)
    b = np.asarray(controls_b, dtype=int)
    if a.shape != b.shape:
        raise ValueError("control tracks must have equal length")
    diff = np.flatnonzero(a != b)
    j = int(diff[0]) if diff.size else a.size

    def run(track):
        rec = {}
        act_step = None
        session = open_stream(velocity_source, lambda k: int(track[k]), sched, cfg, D)
        for _ in range(session.total_steps + 2 * cfg.steps_per_unit):
            pre = session.state.activated_count
            for r in session.step():
                rec[r.frame_index] = (r.step_index, r.values)
            if act_step is None and j < a.size and pre <= j < session.state.activated_count:
                act_step = session.state.step_index
            if session.done:
                break
        return rec, act_step

    rec_a, act_a = run(a)
    rec_b, act_b = run(b)
    if set(rec_a) != set(rec_b):
        raise RuntimeError("replays emitted different frame sets")
    first = None
    for k in sorted(rec_a):
        if not np.array_equal(rec_a[k][1], rec_b[k][1]):
            first = k
            break
    act_step = act_a if act_a is not None else (act_b if act_b is not None else 0)
    pre_ok = all(
        np.array_equal(rec_a[k][1], rec_b[k][1])
        for k in rec_a
        if rec_a[k][0] < act_step
    )
    return ReplayReport(first, j, act_step, pre_ok)
