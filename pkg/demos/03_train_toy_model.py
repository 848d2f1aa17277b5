"""Train the toy windowed-attention model on the four-mode corpus.

Run:  python3 demos/03_train_toy_model.py [steps]

A couple of thousand steps already shows the oracle-anchored velocity MSE
falling well below the untrained baseline; the full acceptance criterion
uses 20k steps.  Saves a loss curve to demos/out/ if matplotlib exists.
"""

import os
import sys

import numpy as np

from flowstream import corpus as C
from flowstream import denoiser as DN
from flowstream import metrics as M
from flowstream import sampler as SA
from flowstream import schedule as S
from flowstream import trainer as T

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 4000

corp = C.four_mode_corpus()
sched = S.make_triangular(4.0, corp.K)
dcfg = DN.DenoiserConfig(D=corp.D, hidden=64, num_layers=2, num_heads=4,
                         num_controls=2, max_context=16)
tcfg = T.TrainConfig(total_steps=steps, learning_rate=1e-3, batch_size=2,
                     n_s=4.0, K=corp.K, denoiser=dcfg, seed=0,
                     eval_every=max(200, steps // 10))

baseline = M.velocity_mse_vs_oracle(DN.init_params(dcfg, 0), corp, sched, 128, seed=99)
print(f"untrained velocity MSE vs oracle: {baseline:.4f}")
params, records = T.train_loop(tcfg, corp, progress=True)
trained = M.velocity_mse_vs_oracle(params, corp, sched, 128, seed=99)
print(f"trained velocity MSE vs oracle:   {trained:.4f}  (ratio {trained / baseline:.3f})")

xs = np.stack([
    SA.generate_full(params, corp.controls[0], sched,
                     SA.SampleConfig(steps_per_unit=32, seed=5000 + i))
    for i in range(200)
])
tv = M.component_histogram_tv(xs, corp, corp.controls[0])
print(f"sampled nearest-atom TV over 200 draws: {tv:.3f}")
print(f"peak jerk of one sample: {M.peak_jerk(xs[0], fps=4.0):.2f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    losses = np.array([r.loss for r in records])
    smooth = np.convolve(losses, np.ones(200) / 200, mode="valid")
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(losses, alpha=0.25, lw=0.5, label="per-step loss")
    ax.plot(np.arange(len(smooth)) + 100, smooth, lw=1.5, label="smoothed (200)")
    ax.set_xlabel("step")
    ax.set_ylabel("windowed flow-matching loss")
    ax.set_yscale("log")
    ax.legend()
    os.makedirs("demos/out", exist_ok=True)
    fig.savefig("demos/out/train_loss.png", dpi=120, bbox_inches="tight")
    print("saved demos/out/train_loss.png")
except ImportError:
    print("(matplotlib not installed; skipping the plot)")
