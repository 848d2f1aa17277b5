"""Distributional and smoothness metrics, oracle comparisons, ablation runner.

Quality at desk scale is measured against the exact mixture oracle rather
than pretrained encoders: nearest-atom assignment total variation for the
sampled distribution, and mean squared error of the model's velocity field
against the exact marginal field on the active set.  Smoothness uses peak
jerk and area-under-jerk from third-order finite differences.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import schedule as S
from .corpus import ConditionedCorpus
from .denoiser import DenoiserParams, cfg_velocity
from .oracle import marginal_velocity


@dataclass
class EvalReport:
    component_histogram_tv: float
    velocity_mse: float
    peak_jerk: float
    auj: float
    response_latency_frames: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.component_histogram_tv <= 1.0 + 1e-12:
            raise ValueError("total variation must lie in [0, 1]")
        if self.velocity_mse < 0:
            raise ValueError("mse must be >= 0")


def component_histogram_tv(samples, corpus: ConditionedCorpus, c) -> float:
    """Total variation between nearest-atom assignments and the mixture prior.

    Each sample is assigned to the nearest atom (Euclidean over K x D) among
    the atoms matching condition ``c``; the empirical histogram is compared
    to the conditional atom weights.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    idx = corpus.match_prefix(np.asarray(c, dtype=int))
    atoms = corpus.frames[idx]
    weights = corpus.weights[idx]
    weights = weights / weights.sum()
    d2 = ((samples[:, None] - atoms[None]) ** 2).sum(axis=(2, 3))
    assign = d2.argmin(axis=1)
    hist = np.bincount(assign, minlength=len(idx)).astype(float)
    hist /= hist.sum()
    return float(0.5 * np.abs(hist - weights).sum())


def velocity_mse_vs_oracle(
    model,
    corpus: ConditionedCorpus,
    sched: S.VectorizedSchedule,
    probe_count: int,
    seed: int,
    cfg_scale: float = 1.0,
) -> float:
    """Mean squared error of the model velocity against the exact marginal
    field, on active-set coordinates of probe states drawn like training
    points.

    ``model`` is either DenoiserParams or a callable
    fn(x_window, c_window, alpha_window, t, lo) -> velocity window.
    """
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    if isinstance(model, DenoiserParams):
        params = model
        max_context = params.cfg.max_context

        def fn(xw, cw, aw, t, lo):
            return cfg_velocity(params, xw, cw, aw, cfg_scale)

    else:
        fn = model
        max_context = 1 << 30

    rng = np.random.default_rng(seed)
    se_total, n_total = 0.0, 0
    for _ in range(probe_count):
        i = corpus.sample_atom(rng)
        z, c = corpus.frames[i], corpus.controls[i]
        win = None
        for _ in range(1000):
            t = rng.uniform(0.0, sched.T)
            win = S.active_window(sched, t)
            if not win.is_empty:
                break
        alpha, beta = S.alpha_beta_at(sched, t)
        x = alpha[:, None] * z + beta[:, None] * rng.standard_normal(z.shape)
        lo = max(0, win.n - max_context)
        pred = fn(x[lo : win.n], c[lo : win.n], alpha[lo : win.n], t, lo)
        exact = marginal_velocity(x[: win.n], c[: win.n], t, sched, corpus)
        rows = np.arange(win.m, win.n)
        se_total += float(((pred[rows - lo] - exact[rows]) ** 2).sum())
        n_total += rows.size * corpus.D
    return se_total / n_total


def jerk_profile(seq: np.ndarray, fps: float) -> np.ndarray:
    """Third-order forward differences scaled by fps^3, shape (K-3, D)."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.shape[0] < 4:
        raise ValueError("jerk needs at least 4 frames")
    return np.diff(seq, n=3, axis=0) * fps**3


def peak_jerk(seq: np.ndarray, fps: float) -> float:
    """Largest absolute jerk over all frames and feature channels."""
    return float(np.abs(jerk_profile(seq, fps)).max())


def auj(seq: np.ndarray, fps: float) -> float:
    """Area under the per-frame max-channel jerk magnitude (trapezoidal in time)."""
    prof = np.abs(jerk_profile(seq, fps)).max(axis=1)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(prof, dx=1.0 / fps))


# --- ablation runner ----------------------------------------------------------

ABLATION_AXES = ("mask_kind", "schedule_kind", "cfg_scale", "prediction_kind")


def run_ablation(
    grid: dict,
    base_cfg,
    corpus: ConditionedCorpus,
    sample_count: int = 300,
    steps_per_unit: int = 32,
    probe_count: int = 128,
    progress: bool = False,
) -> list[EvalReport]:
    """Train and evaluate every grid cell with identical seeds and budgets.

    ``grid`` maps a subset of {mask_kind, schedule_kind, cfg_scale,
    prediction_kind} to value lists.  Cell failures are recorded in the
    report metadata rather than aborting the sweep.
    """
    from dataclasses import replace

    from .sampler import SampleConfig, generate_full
    from .trainer import train_loop

    for key in grid:
        if key not in ABLATION_AXES:
            raise ValueError(f"unknown ablation axis {key!r}; expected {ABLATION_AXES}")
    if not grid:
        raise ValueError("ablation grid is empty")

    axes = sorted(grid)
    reports = []
    for combo in itertools.product(*(grid[a] for a in axes)):
        cell = dict(zip(axes, combo))
        label = ",".join(f"{k}={v}" for k, v in cell.items())
        if progress:
            print(f"[ablate] {label}")
        t0 = time.perf_counter()
        try:
            cfg = replace(base_cfg)
            den = cfg.denoiser
            if "mask_kind" in cell:
                den = replace(den, mask_kind=cell["mask_kind"])
            if "prediction_kind" in cell:
                den = replace(den, prediction_kind=cell["prediction_kind"])
            if "schedule_kind" in cell:
                cfg.schedule_kind = cell["schedule_kind"]
                if cell["schedule_kind"] == "random" and den.max_context < cfg.K:
                    den = replace(den, max_context=cfg.K)
            cfg.denoiser = den
            cfg_scale = float(cell.get("cfg_scale", 1.0))

            params, _ = train_loop(cfg, corpus)
            tri = S.make_triangular(cfg.n_s, cfg.K)
            mse = velocity_mse_vs_oracle(params, corpus, tri, probe_count, seed=base_cfg.seed + 7)

            scfg = SampleConfig(steps_per_unit=steps_per_unit, cfg_scale=cfg_scale)
            tracks = corpus.tracks()
            tv_vals, pj_vals, auj_vals = [], [], []
            for track in tracks:
                xs = []
                for s_i in range(sample_count // len(tracks)):
                    if cfg.schedule_kind == "random":
                        # no deterministic schedule exists; each draw uses a fresh one
                        sample_sched = S.make_random_ablation(
                            cfg.n_s, cfg.K, seed=base_cfg.seed + 40000 + s_i
                        )
                    else:
                        sample_sched = tri
                    xs.append(
                        generate_full(
                            params, track, sample_sched,
                            replace(scfg, seed=base_cfg.seed + 1000 + s_i),
                        )
                    )
                xs = np.stack(xs)
                tv_vals.append(component_histogram_tv(xs, corpus, track))
                pj_vals.extend(peak_jerk(x, fps=float(cfg.n_s)) for x in xs[:16])
                auj_vals.extend(auj(x, fps=float(cfg.n_s)) for x in xs[:16])
            reports.append(
                EvalReport(
                    component_histogram_tv=float(np.mean(tv_vals)),
                    velocity_mse=mse,
                    peak_jerk=float(np.mean(pj_vals)),
                    auj=float(np.mean(auj_vals)),
                    response_latency_frames=math.ceil(cfg.n_s),
                    metadata={"cell": cell, "seconds": time.perf_counter() - t0},
                )
            )
        except Exception as e:  # cell failures are data, not fatal
            reports.append(
                EvalReport(
                    component_histogram_tv=0.0,
                    velocity_mse=0.0,
                    peak_jerk=0.0,
                    auj=0.0,
                    response_latency_frames=0,
                    metadata={"cell": cell, "error": f"{type(e).__name__}: {e}"},
                )
            )
    return reports


def render_table(reports: list[EvalReport]) -> str:
    """Plain-text table of ablation results."""
    cells = [",".join(f"{k}={v}" for k, v in r.metadata.get("cell", {}).items()) or "-"
             for r in reports]
    w = max(10, *(len(c) for c in cells)) if cells else 10
    head = f"{'cell':<{w}} {'tv':>8} {'vel_mse':>10} {'pj':>10} {'auj':>10}"
    lines = [head, "-" * len(head)]
    for cell, r in zip(cells, reports):
        if "error" in r.metadata:
            lines.append(f"{cell:<{w}} FAILED: {r.metadata['error']}")
        else:
            lines.append(
                f"{cell:<{w}} {r.component_histogram_tv:>8.4f} {r.velocity_mse:>10.5f} "
                f"{r.peak_jerk:>10.3f} {r.auj:>10.3f}"
            )
    return "\n".join(lines)


def save_reports(reports: list[EvalReport], path):
    with open(path, "w") as f:
        for r in reports:
            f.write(json.dumps(asdict(r), separators=(",", ":")) + "\n")
