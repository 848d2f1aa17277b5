import numpy as np
import pytest

from flowstream import corpus as C


def test_tree_depth_one_base_case():
    spec = C.CorpusSpec(K=4, D=2, segment_length=4, num_controls=2, branching_depth=1, seed=0)
    corp = C.generate_tree_corpus(spec)
    assert corp.num_atoms == 2
    assert corp.K == 4 and corp.D == 2


def test_tree_depth_two_shared_prefixes():
    spec = C.CorpusSpec(K=8, D=2, segment_length=4, num_controls=2, branching_depth=2, seed=0)
    corp = C.generate_tree_corpus(spec)
    assert corp.num_atoms == 4
    for i in range(corp.num_atoms):
        for j in range(i + 1, corp.num_atoms):
            if corp.controls[i, 0] == corp.controls[j, 0]:
                assert np.array_equal(corp.frames[i, :4], corp.frames[j, :4])
            # frames must diverge somewhere for distinct tracks
            assert not np.array_equal(corp.frames[i], corp.frames[j])


def test_tree_prefix_property_brute_force():
    spec = C.CorpusSpec(K=9, D=1, segment_length=3, num_controls=3, branching_depth=3, seed=1)
    corp = C.generate_tree_corpus(spec)
    assert corp.num_atoms == 27
    # O(atoms^2 K) scan: control-prefix agreement implies frame-prefix equality
    for i in range(corp.num_atoms):
        for j in range(i + 1, corp.num_atoms):
            agree = corp.controls[i] == corp.controls[j]
            l = int(np.argmin(agree)) if not agree.all() else corp.K
            assert np.array_equal(corp.frames[i, :l], corp.frames[j, :l])


def test_tree_generation_deterministic():
    spec = C.CorpusSpec(K=8, D=2, segment_length=4, num_controls=2, branching_depth=2, seed=7)
    a = C.generate_tree_corpus(spec)
    spec2 = C.CorpusSpec(K=8, D=2, segment_length=4, num_controls=2, branching_depth=2, seed=7)
    b = C.generate_tree_corpus(spec2)
    assert np.array_equal(a.frames, b.frames)
    assert np.array_equal(a.controls, b.controls)


def test_spec_validation():
    with pytest.raises(ValueError):
        C.CorpusSpec(K=7, D=1, segment_length=4, num_controls=2, branching_depth=2)
    spec = C.CorpusSpec(K=8, D=1, segment_length=4, num_controls=2, branching_depth=2, seed=0)
    spec.motif_library.pop(1)
    with pytest.raises(ValueError):
        C.generate_tree_corpus(spec)


def test_causal_branching_checker_rejects_violation():
    controls = np.array([[0, 0], [0, 1]])
    frames = np.array([[[1.0], [1.0]], [[2.0], [2.0]]])  # prefix differs, controls agree
    with pytest.raises(ValueError, match="causal branching"):
        C.ConditionedCorpus(controls, frames, np.array([1.0, 1.0]), 2)


def test_same_track_mixture_allowed():
    corp = C.two_point_corpus()
    assert corp.num_atoms == 2
    assert np.allclose(corp.weights.sum(), 1.0)


def test_weight_normalization_enforced():
    controls = np.zeros((2, 1), dtype=int)
    frames = np.array([[[1.0]], [[-1.0]]])
    with pytest.raises(ValueError, match="sum"):
        C.ConditionedCorpus(controls, frames, np.array([0.5, 0.6]), 1)


def test_match_prefix():
    spec = C.CorpusSpec(K=8, D=1, segment_length=4, num_controls=2, branching_depth=2, seed=0)
    corp = C.generate_tree_corpus(spec)
    idx = corp.match_prefix(corp.controls[0][:4])
    assert len(idx) == 2  # both continuations of the first segment control
    with pytest.raises(ValueError, match="no atoms"):
        corp.match_prefix(np.array([9, 9]))


def test_sample_atom_by_weight():
    b = C.two_point_corpus()
    corp = C.ConditionedCorpus(b.controls, b.frames, np.array([0.9, 0.1]), 1)
    rng = np.random.default_rng(0)
    draws = [corp.sample_atom(rng) for _ in range(2000)]
    frac = np.mean(np.array(draws) == 0)
    assert abs(frac - 0.9) < 0.03


def test_minimum_separation_enforced():
    controls = np.zeros((2, 2), dtype=int)
    frames = np.zeros((2, 2, 1))
    frames[1] += 1e-4
    corp = C.ConditionedCorpus(controls, frames, np.array([0.5, 0.5]), 1)
    with pytest.raises(ValueError, match="separation"):
        C._check_separation(corp, 0.25)


def test_save_load_round_trip_byte_identical(tmp_path):
    spec = C.CorpusSpec(K=8, D=2, segment_length=4, num_controls=3, branching_depth=2, seed=3)
    corp = C.generate_tree_corpus(spec)
    p1 = tmp_path / "c1.jsonl"
    p2 = tmp_path / "c2.jsonl"
    C.save_corpus(corp, p1)
    loaded = C.load_corpus(p1)
    assert np.array_equal(loaded.frames, corp.frames)
    assert np.array_equal(loaded.controls, corp.controls)
    assert np.array_equal(loaded.weights, corp.weights)
    C.save_corpus(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_mismatched_K(tmp_path):
    corp = C.two_point_corpus()
    path = tmp_path / "bad.jsonl"
    C.save_corpus(corp, path)
    lines = path.read_text().splitlines()
    lines.append('{"controls":[0,0],"frames":[[0.5],[0.5]],"weight":1.0}')
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="does not match K"):
        C.load_corpus(path)


def test_load_rejects_malformed_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"version":1,"kind":"corpus","K":1,"D":1,"num_controls":1}\n{nope\n')
    with pytest.raises(ValueError, match="bad.jsonl:2"):
        C.load_corpus(path)


def test_load_rejects_prefix_violation(tmp_path):
    path = tmp_path / "viol.jsonl"
    path.write_text(
        '{"version":1,"kind":"corpus","K":2,"D":1,"num_controls":2}\n'
        '{"controls":[0,0],"frames":[[1.0],[1.0]],"weight":1.0}\n'
        '{"controls":[0,1],"frames":[[2.0],[2.0]],"weight":1.0}\n'
    )
    with pytest.raises(ValueError, match="causal branching"):
        C.load_corpus(path)


def test_builders_validate():
    for corp in (C.two_point_corpus(), C.four_mode_corpus(), C.sensitivity_corpus()):
        C.validate_corpus(corp)
        assert corp.weights.sum() == pytest.approx(corp.num_atoms / corp.num_atoms)
