"""Walk through the per-frame noise schedule and its active window.

Run:  python3 demos/01_schedule_waves.py

Prints the alpha wave sweeping across frames and, if matplotlib is
available, saves a heat map of alpha over (t, frame) with the window
bounds overlaid to demos/out/schedule_waves.png.
"""

import math
import os

import numpy as np

from flowstream import schedule as S

n_s, K = 4.0, 16
sched = S.make_triangular(n_s, K)
print(f"triangular schedule: n_s={n_s}, K={K}, T={sched.T}")
print("each frame k ramps alpha from 0 to 1 over one time unit, starting at k/n_s\n")

for t in np.linspace(0.0, sched.T, 9):
    alpha, _ = S.alpha_beta_at(sched, t)
    win = S.active_window(sched, t)
    bar = "".join(
        "#" if a == 1.0 else ("." if a == 0.0 else str(int(a * 10)))
        for a in alpha
    )
    print(f"t={t:5.2f}  [{bar}]  window=[{win.m:2d},{win.n:2d})  width={win.width}")

print("\nlegend: '#'=finalized (alpha=1), digits=alpha in tenths, '.'=pure noise")
print(f"window width never exceeds ceil(n_s)={math.ceil(n_s)}")

violations = sum(
    S.check_saturation(sched, t).size for t in np.random.default_rng(0).uniform(0, sched.T, 500)
)
print(f"saturation check over 500 random times: {violations} violations")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ts = np.linspace(0, sched.T, 400)
    grid = np.stack([S.alpha_beta_at(sched, t)[0] for t in ts])
    fig, ax = plt.subplots(figsize=(8, 4))
    im = ax.imshow(grid.T, aspect="auto", origin="lower",
                   extent=[0, sched.T, -0.5, K - 0.5], cmap="viridis")
    ms = [S.active_window(sched, t).m - 0.5 for t in ts]
    ns = [S.active_window(sched, t).n - 0.5 for t in ts]
    ax.plot(ts, ms, "w--", lw=1, label="m(t)")
    ax.plot(ts, ns, "w-", lw=1, label="n(t)")
    ax.set_xlabel("t")
    ax.set_ylabel("frame k")
    ax.set_title("alpha_t^k with active window bounds")
    ax.legend(loc="upper left")
    fig.colorbar(im, label="alpha")
    os.makedirs("demos/out", exist_ok=True)
    fig.savefig("demos/out/schedule_waves.png", dpi=120, bbox_inches="tight")
    print("saved demos/out/schedule_waves.png")
except ImportError:
    print("(matplotlib not installed; skipping the plot)")
