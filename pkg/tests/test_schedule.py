import math

import numpy as np
import pytest

from flowstream import schedule as S


def test_make_triangular_time_range():
    sched = S.make_triangular(5.0, 20)
    assert sched.T == 5.0


def test_invalid_arguments():
    with pytest.raises(ValueError):
        S.make_triangular(0.0, 20)
    with pytest.raises(ValueError):
        S.make_triangular(-1.0, 20)
    with pytest.raises(ValueError):
        S.make_triangular(5.0, 0)
    with pytest.raises(ValueError):
        S.make_random_ablation(5.0, 0, seed=0)


def test_boundary_conditions_exact():
    sched = S.make_triangular(5.0, 20)
    a0, b0 = S.alpha_beta_at(sched, 0.0)
    assert np.all(a0 == 0.0) and np.all(b0 == 1.0)
    aT, bT = S.alpha_beta_at(sched, sched.T)
    assert np.all(aT == 1.0) and np.all(bT == 0.0)


def test_clamp_evaluation_examples():
    sched = S.make_triangular(5.0, 20)
    a, b = S.alpha_beta_at(sched, 1.2)
    assert a[0] == 1.0
    assert math.isclose(a[3], 0.6, rel_tol=0, abs_tol=1e-12)
    assert a[6] == 0.0
    assert np.allclose(a + b, 1.0, rtol=0, atol=0)


def test_out_of_range_time_rejected():
    sched = S.make_triangular(5.0, 20)
    with pytest.raises(ValueError):
        S.alpha_beta_at(sched, -0.1)
    with pytest.raises(ValueError):
        S.alpha_beta_at(sched, sched.T + 0.1)


def test_random_ablation_offsets():
    sched = S.make_random_ablation(5.0, 8, seed=3)
    assert sched.offsets.shape == (8,)
    assert np.all(sched.offsets >= 0.0) and np.all(sched.offsets <= 8 / 5.0)
    # same seed reproduces, different seed differs
    again = S.make_random_ablation(5.0, 8, seed=3)
    assert np.array_equal(sched.offsets, again.offsets)
    other = S.make_random_ablation(5.0, 8, seed=4)
    assert not np.array_equal(sched.offsets, other.offsets)
    # clamp arithmetic on explicit offsets
    manual = S.VectorizedSchedule(S.RANDOM_ABLATION, 1.0, 2, np.array([0.0, 0.9]))
    a, _ = S.alpha_beta_at(manual, 1.0)
    assert a[0] == 1.0
    assert math.isclose(a[1], 0.1, rel_tol=0, abs_tol=1e-12)


def test_derivative_interior_and_kinks():
    sched = S.make_triangular(5.0, 20)
    ad, bd = S.alpha_beta_dot_at(sched, 1.2)
    # k=1 sits exactly on the upper kink (1.2 - 0.2 = 1.0): subgradient 0.
    assert ad[0] == 0.0 and ad[1] == 0.0
    assert np.all(ad[2:6] == 1.0)
    assert ad[6] == 0.0 and ad[7] == 0.0
    assert np.array_equal(bd, -ad)
    ad0, _ = S.alpha_beta_dot_at(sched, 0.0)
    assert np.all(ad0 == 0.0)
    # interior coordinate
    ad5, bd5 = S.alpha_beta_dot_at(sched, 0.5)
    assert ad5[2] == 1.0 and bd5[2] == -1.0


def test_active_window_examples():
    sched = S.make_triangular(5.0, 20)
    w = S.active_window(sched, 1.2)
    assert (w.m, w.n) == (1, 6)
    w0 = S.active_window(sched, 0.0)
    assert (w0.m, w0.n) == (0, 0) and w0.is_empty
    wT = S.active_window(sched, 5.0)
    assert (wT.m, wT.n) == (20, 20) and wT.is_empty


def test_active_window_rejects_random_kind():
    sched = S.make_random_ablation(5.0, 20, seed=0)
    with pytest.raises(ValueError):
        S.active_window(sched, 1.0)
    with pytest.raises(ValueError):
        S.check_saturation(sched, 1.0)


def test_saturation_examples():
    sched = S.make_triangular(5.0, 20)
    assert S.check_saturation(sched, 1.2).size == 0


def test_saturation_property_sweep():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n_s = float(rng.uniform(0.5, 12.0))
        K = int(rng.integers(1, 64))
        sched = S.make_triangular(n_s, K)
        t = float(rng.uniform(0.0, sched.T))
        assert S.check_saturation(sched, t).size == 0


def test_monotonicity_and_window_width():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n_s = float(rng.uniform(0.5, 10.0))
        K = int(rng.integers(1, 40))
        sched = S.make_triangular(n_s, K)
        t1, t2 = sorted(rng.uniform(0.0, sched.T, size=2))
        a1, _ = S.alpha_beta_at(sched, t1)
        a2, _ = S.alpha_beta_at(sched, t2)
        assert np.all(a1 <= a2)
        w = S.active_window(sched, t1)
        assert 0 <= w.m <= w.n <= K
        assert w.n - w.m <= math.ceil(n_s)


def test_window_bounds_step_functions():
    sched = S.make_triangular(4.0, 8)
    ts = np.linspace(0.0, sched.T, 1000)
    ms = [S.active_window(sched, t).m for t in ts]
    ns = [S.active_window(sched, t).n for t in ts]
    assert all(a <= b for a, b in zip(ms, ms[1:]))
    assert all(a <= b for a, b in zip(ns, ns[1:]))
    # every frame enters and leaves the active set exactly once
    for k in range(8):
        inside = np.array([m <= k < n for m, n in zip(ms, ns)])
        changes = np.flatnonzero(np.diff(inside.astype(int)))
        assert inside.sum() > 0
        assert len(changes) == 2


def test_finalized_count_matches_saturation():
    sched = S.make_triangular(5.0, 20)
    rng = np.random.default_rng(2)
    for _ in range(200):
        t = float(rng.uniform(0.0, sched.T))
        alpha, _ = S.alpha_beta_at(sched, t)
        assert S.finalized_count(sched, t) == int((alpha == 1.0).sum())
    # at a lattice instant, the boundary frame counts as finalized
    assert S.finalized_count(sched, 1.0) == 1
    assert S.active_window(sched, 1.0).m == 0
