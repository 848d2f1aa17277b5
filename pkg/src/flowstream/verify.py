"""Self-contained invariant suites behind the ``verify`` subcommand.

Each suite prints one line with its pass count; the runner returns False
if any check fails.  These are fast spot-checks of the core exactness
properties (saturation, locality, conversions, gradients, guidance
identities, streaming equivalence); the full acceptance suite lives in
the test tree.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import corpus as corpus_mod
from . import denoiser as dn
from . import gaussian_path as gp
from . import oracle
from . import sampler as sp
from . import schedule as sched_mod


def _suite(name):
    def deco(fn):
        fn.suite_name = name
        return fn

    return deco


@_suite("schedule saturation")
def check_saturation(quick=False):
    rng = np.random.default_rng(0)
    trials = 200 if quick else 1000
    bad = 0
    for _ in range(trials):
        n_s = float(rng.uniform(0.5, 12.0))
        K = int(rng.integers(1, 64))
        sched = sched_mod.make_triangular(n_s, K)
        t = float(rng.uniform(0.0, sched.T))
        if sched_mod.check_saturation(sched, t).size:
            bad += 1
    return trials - bad, trials


@_suite("streaming locality")
def check_locality(quick=False):
    rng = np.random.default_rng(1)
    corp = corpus_mod.four_mode_corpus()
    sched = sched_mod.make_triangular(4.0, corp.K)
    trials = 100 if quick else 1000
    ok = 0
    for _ in range(trials):
        t = float(rng.uniform(0.0, sched.T))
        x = rng.standard_normal((corp.K, corp.D)) * 2.0
        rep = oracle.verify_locality(x, corp.controls[0], t, sched, corp)
        if max(rep.max_abs_drift_before_window, rep.max_abs_drift_after_window) <= 1e-9:
            ok += 1
    return ok, trials


@_suite("field conversions")
def check_conversions(quick=False):
    rng = np.random.default_rng(2)
    sched = sched_mod.make_triangular(4.0, 8)
    trials = 20 if quick else 100
    ok = 0
    for _ in range(trials):
        z = rng.standard_normal((8, 2)) * 2.0
        t = float(rng.uniform(0.05, 0.95))  # all coordinates have beta > 0
        pp = gp.corrupt(z, t, sched, rng)
        u = gp.conditional_velocity(pp, sched)
        good = True
        s = gp.conditional_score(pp, sched)
        u2 = gp.velocity_from_score(s, pp.x, t, sched)
        scale = max(np.abs(u).max(), 1e-12)
        good &= np.abs(u2 - u).max() / scale <= 1e-9
        for kind in ("epsilon", "x0", "score"):
            a, b = gp.affine_coeffs(kind, t, sched)
            pred = a[:, None] * z + b[:, None] * pp.x
            u3 = gp.to_velocity(kind, pred, pp.x, t, sched)
            good &= np.abs(u3 - u).max() / scale <= 1e-9
        ok += bool(good)
    return ok, trials


@_suite("gradient check")
def check_gradients(quick=False):
    cfg = dn.DenoiserConfig(D=2, hidden=32, num_layers=2, num_heads=4, num_controls=4,
                            max_context=16)
    params = dn.init_params(cfg, 0)
    rng = np.random.default_rng(3)
    params.tensors["gain_w"] = rng.normal(0, 0.02, params.tensors["gain_w"].shape)
    n = 5
    x = rng.standard_normal((n, 2))
    c = rng.integers(0, 4, n)
    alpha = rng.uniform(0.05, 0.95, n)
    out, cache = dn.forward(params, x, c, alpha)
    g_out = rng.standard_normal(out.shape)
    grads = dn.backward(params, cache, g_out)

    def loss():
        o, _ = dn.forward(params, x, c, alpha)
        return float((o * g_out).sum())

    h = 1e-4
    per_tensor = 1 if quick else 2
    ok = trials = 0
    for name in sorted(params.tensors):
        t = params.tensors[name]
        for _ in range(per_tensor):
            idx = tuple(rng.integers(0, s) for s in t.shape)
            orig = t[idx]
            t[idx] = orig + h
            lp = loss()
            t[idx] = orig - h
            lm = loss()
            t[idx] = orig
            fd = (lp - lm) / (2 * h)
            an = grads[name][idx]
            denom = max(abs(fd), abs(an))
            trials += 1
            ok += bool(denom == 0.0 or abs(fd - an) / denom <= 1e-4)
    return ok, trials


@_suite("guidance identities")
def check_guidance(quick=False):
    cfg = dn.DenoiserConfig(D=2, hidden=32, num_layers=1, num_heads=4, num_controls=4,
                            max_context=16)
    params = dn.init_params(cfg, 1)
    rng = np.random.default_rng(4)
    n = 6
    x = rng.standard_normal((n, 2))
    c = rng.integers(0, 3, n)
    alpha = rng.uniform(0.05, 0.95, n)
    null = np.full(n, cfg.null_control_id)
    v_cond = dn.cfg_velocity(params, x, c, alpha, scale=1.0)
    v_null = dn.cfg_velocity(params, x, c, alpha, scale=0.0)
    pred_c, _ = dn.forward(params, x, c, alpha)
    pred_n, _ = dn.forward(params, x, null, alpha)
    ok = int(np.array_equal(v_cond, pred_c)) + int(np.array_equal(v_null, pred_n))
    v6 = dn.cfg_velocity(params, x, c, alpha, scale=6.0)
    ok += int(np.allclose(v6, v_null + 6.0 * (v_cond - v_null), rtol=0, atol=1e-12))
    return ok, 3


@_suite("windowed equivalence")
def check_windowed(quick=False):
    corp = corpus_mod.four_mode_corpus()
    sched = sched_mod.make_triangular(4.0, corp.K)
    cfg = dn.DenoiserConfig(D=corp.D, hidden=32, num_layers=1, num_heads=4,
                            num_controls=2, max_context=corp.K)
    params = dn.init_params(cfg, 2)
    scfg = sp.SampleConfig(steps_per_unit=8 if quick else 16, seed=5)
    x_stream, _ = sp.collect_stream(params, corp.controls[0], sched, scfg)
    x_full = sp.generate_full(params, corp.controls[0], sched, scfg)
    return int(np.array_equal(x_stream, x_full)), 1


SUITES = [check_saturation, check_locality, check_conversions, check_gradients,
          check_guidance, check_windowed]


def run_all(quick: bool = False) -> bool:
    all_ok = True
    for fn in SUITES:
        t0 = time.perf_counter()
        ok, total = fn(quick=quick)
        status = "ok" if ok == total else "FAIL"
        all_ok &= ok == total
        print(f"{fn.suite_name:<24} {ok}/{total} {status}  ({time.perf_counter() - t0:.2f}s)")
    print("verify:", "all suites passed" if all_ok else "FAILURES present")
    return all_ok
