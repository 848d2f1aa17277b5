"""Streaming conditional sequence generation with per-frame noise schedules.

A sequence model where every frame carries its own noise level: the
triangular schedule sweeps denoising across the sequence as a bounded
window, flow-matching training regresses a windowed attention network on
the exact conditional velocity, and windowed Euler inference emits frames
one by one with bounded latency under live control switches.  An exact
finite-mixture oracle provides ground truth for every field and sample.
"""

from .corpus import (
    ConditionedCorpus,
    CorpusSpec,
    four_mode_corpus,
    generate_tree_corpus,
    load_corpus,
    save_corpus,
    sensitivity_corpus,
    two_point_corpus,
)
from .denoiser import (
    DenoiserConfig,
    DenoiserParams,
    cfg_velocity,
    init_params,
    load_params,
    save_params,
)
from .gaussian_path import (
    PathPoint,
    affine_coeffs,
    conditional_score,
    conditional_velocity,
    corrupt,
    to_velocity,
    velocity_from_score,
)
from .metrics import (
    EvalReport,
    auj,
    component_histogram_tv,
    peak_jerk,
    render_table,
    run_ablation,
    velocity_mse_vs_oracle,
)
from .oracle import (
    LocalityReport,
    marginal_score,
    marginal_velocity,
    oracle_sample,
    oracle_sample_many,
    posterior_mean,
    verify_locality,
    window_sensitivity,
)
from .sampler import (
    EmissionRecord,
    ReplayReport,
    SampleConfig,
    StreamSession,
    collect_stream,
    generate_full,
    open_stream,
    replay_check,
    stream_generate,
    stream_generate_sde,
)
from .schedule import (
    ActiveWindow,
    VectorizedSchedule,
    active_window,
    alpha_beta_at,
    alpha_beta_dot_at,
    check_saturation,
    make_random_ablation,
    make_triangular,
)
from .trainer import TrainConfig, TrainLogRecord, train_loop, train_step

__version__ = "0.1.0"
