"""Synthetic conditioned corpora with causal branching, plus persistence.

A corpus is a finite list of atoms (control_track, frames, weight) defining
the conditional data distribution p(z | c): atoms sharing a full control
track form a mixture whose weights sum to 1 for that track.  Causal
dependency is enforced distributionally: any two tracks that agree on a
control prefix must induce the same weighted distribution over the frame
prefix, so revealing future controls never changes the law of past frames.

Tree corpora realize this by construction: control tracks are built from
per-segment control choices and frames are generated segment by segment as
a deterministic motif of (control, segment start state), so shared control
prefixes share frames exactly.  Hand-built mixture corpora (several atoms
on one track) are used to exercise posterior averaging in the oracle.

File format (one JSON object per line):

    {"version": 1, "kind": "corpus", "K": .., "D": .., "num_controls": ..}
    {"controls": [int; K], "frames": [[float; D]; K], "weight": float}
    ...
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

CORPUS_FORMAT_VERSION = 1


@dataclass
class ConditionedCorpus:
    """Finite mixture of (control track, sequence) atoms."""

    controls: np.ndarray  # (A, K) int
    frames: np.ndarray  # (A, K, D) float
    weights: np.ndarray  # (A,) positive, summing to 1 per distinct track
    num_controls: int

    def __post_init__(self):
        self.controls = np.asarray(self.controls, dtype=int)
        self.frames = np.asarray(self.frames, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.controls.ndim != 2 or self.frames.ndim != 3:
            raise ValueError("controls must be (A, K) and frames (A, K, D)")
        if not (self.controls.shape[0] == self.frames.shape[0] == self.weights.shape[0]):
            raise ValueError("atom count mismatch between controls, frames, weights")
        if self.controls.shape[1] != self.frames.shape[1]:
            raise ValueError("frame count mismatch between controls and frames")
        if np.any(self.weights <= 0):
            raise ValueError("atom weights must be positive")
        if np.any(self.controls < 0) or np.any(self.controls >= self.num_controls):
            raise ValueError("control id out of range")
        validate_corpus(self)

    @property
    def num_atoms(self) -> int:
        return self.controls.shape[0]

    @property
    def K(self) -> int:
        return self.controls.shape[1]

    @property
    def D(self) -> int:
        return self.frames.shape[2]

    def tracks(self) -> list[np.ndarray]:
        """Distinct control tracks, in first-appearance order."""
        seen, out = set(), []
        for row in self.controls:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                out.append(row.copy())
        return out

    def match_prefix(self, c) -> np.ndarray:
        """Indices of atoms whose track starts with the control prefix ``c``."""
        c = np.asarray(c, dtype=int)
        if c.ndim != 1 or c.size > self.K:
            raise ValueError(f"control prefix must be 1-D with length <= {self.K}")
        hits = np.flatnonzero(np.all(self.controls[:, : c.size] == c, axis=1))
        if hits.size == 0:
            raise ValueError(f"no atoms match control track prefix {c.tolist()}")
        return hits

    def sample_atom(self, rng: np.random.Generator) -> int:
        """Draw an atom index with probability proportional to its weight."""
        p = self.weights / self.weights.sum()
        return int(rng.choice(self.num_atoms, p=p))


def validate_corpus(corpus: ConditionedCorpus, tol: float = 1e-9):
    """Check per-track weight normalization and the causal-branching property.

    Branching check: for every pair of distinct tracks, compare the weighted
    distributions of the frame prefix over their longest common control
    prefix.  Raises ValueError naming a witness atom pair on failure.
    """
    groups: dict[bytes, list[int]] = {}
    for i, row in enumerate(corpus.controls):
        groups.setdefault(row.tobytes(), []).append(i)

    for key, idxs in groups.items():
        total = corpus.weights[idxs].sum()
        if abs(total - 1.0) > 1e-6:
            raise ValueError(
                f"weights for track {np.frombuffer(key, dtype=int).tolist()} sum to "
                f"{total}, expected 1"
            )

    def prefix_law(idxs, length):
        law: dict[bytes, float] = {}
        for i in idxs:
            k = np.round(corpus.frames[i, :length], 9).tobytes()
            law[k] = law.get(k, 0.0) + corpus.weights[i]
        return law

    group_list = list(groups.values())
    for a in range(len(group_list)):
        for b in range(a + 1, len(group_list)):
            ia, ib = group_list[a][0], group_list[b][0]
            agree = corpus.controls[ia] == corpus.controls[ib]
            l = int(np.argmin(agree)) if not agree.all() else corpus.K
            if l == 0:
                continue
            law_a = prefix_law(group_list[a], l)
            law_b = prefix_law(group_list[b], l)
            keys = set(law_a) | set(law_b)
            for k in keys:
                if abs(law_a.get(k, 0.0) - law_b.get(k, 0.0)) > tol:
                    raise ValueError(
                        "causal branching violated: tracks of atoms "
                        f"{ia} and {ib} agree on controls 0..{l - 1} but induce "
                        "different frame-prefix distributions there"
                    )


# --- tree generation ---------------------------------------------------------


@dataclass(frozen=True)
class Motif:
    """Deterministic segment generator: frames from (control, start state).

    kind "constant" holds the start state shifted by ``offset``; "ramp"
    advances linearly at ``slope`` per frame; "sine" oscillates around the
    start state.  All parameters are per-feature vectors of length D.
    """

    kind: str
    offset: np.ndarray
    slope: np.ndarray
    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray

    def generate(self, start: np.ndarray, length: int) -> np.ndarray:
        j = np.arange(1, length + 1, dtype=float)[:, None]
        if self.kind == "constant":
            return np.broadcast_to(start + self.offset, (length, start.size)).copy()
        if self.kind == "ramp":
            return start + self.slope * j
        if self.kind == "sine":
            return start + self.amplitude * np.sin(
                2.0 * math.pi * self.frequency * j + self.phase
            )
        raise ValueError(f"unknown motif kind {self.kind!r}")


def default_motif_library(num_controls: int, D: int, seed: int) -> dict[int, Motif]:
    """One smooth, well-separated motif per control id."""
    rng = np.random.default_rng(seed)
    kinds = ["sine", "ramp", "constant"]
    lib = {}
    for cid in range(num_controls):
        lib[cid] = Motif(
            kind=kinds[cid % len(kinds)],
            offset=rng.uniform(-1.5, 1.5, D),
            slope=rng.uniform(0.05, 0.25, D) * rng.choice([-1.0, 1.0], D),
            amplitude=rng.uniform(0.5, 1.5, D),
            frequency=rng.uniform(0.05, 0.2, D),
            phase=rng.uniform(0.0, 2.0 * math.pi, D),
        )
    return lib


@dataclass
class CorpusSpec:
    """Recipe for a causally branching tree corpus.

    K must equal segment_length * branching_depth; each of the
    num_controls^branching_depth control tracks yields one atom whose
    segments are deterministic motifs of (control, segment start state).
    """

    K: int
    D: int
    segment_length: int
    num_controls: int
    branching_depth: int
    seed: int = 0
    noise_free: bool = True
    min_separation: float = 0.25
    motif_library: dict[int, Motif] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.K != self.segment_length * self.branching_depth:
            raise ValueError(
                f"K={self.K} must equal segment_length*branching_depth="
                f"{self.segment_length * self.branching_depth}"
            )
        if self.motif_library is None:
            self.motif_library = default_motif_library(self.num_controls, self.D, self.seed)


def generate_tree_corpus(spec: CorpusSpec) -> ConditionedCorpus:
    """Enumerate all segment-control tracks and grow each atom segment-wise.

    Atoms sharing a control prefix share those segments' frames exactly, so
    the causal-branching property holds by construction.  Track weights are
    uniform (one atom per track, weight 1).
    """
    for cid in range(spec.num_controls):
        if cid not in spec.motif_library:
            raise ValueError(f"motif library is missing control id {cid}")

    num_tracks = spec.num_controls**spec.branching_depth
    controls = np.zeros((num_tracks, spec.K), dtype=int)
    frames = np.zeros((num_tracks, spec.K, spec.D))
    for a in range(num_tracks):
        digits = []
        v = a
        for _ in range(spec.branching_depth):
            digits.append(v % spec.num_controls)
            v //= spec.num_controls
        state = np.zeros(spec.D)
        for s, cid in enumerate(digits):
            lo = s * spec.segment_length
            hi = lo + spec.segment_length
            seg = spec.motif_library[cid].generate(state, spec.segment_length)
            controls[a, lo:hi] = cid
            frames[a, lo:hi] = seg
            state = seg[-1]

    corpus = ConditionedCorpus(controls, frames, np.ones(num_tracks), spec.num_controls)
    _check_separation(corpus, spec.min_separation)
    return corpus


def _check_separation(corpus: ConditionedCorpus, margin: float):
    for i in range(corpus.num_atoms):
        for j in range(i + 1, corpus.num_atoms):
            d = np.linalg.norm(corpus.frames[i] - corpus.frames[j])
            if d < margin:
                raise ValueError(
                    f"atoms {i} and {j} are only {d:.4f} apart; minimum separation "
                    f"is {margin} (reseed or change motifs)"
                )


# --- hand-built mixture corpora used throughout the test suites --------------


def two_point_corpus() -> ConditionedCorpus:
    """K=1, D=1: atoms at +1 and -1 on one track, equal weight."""
    controls = np.zeros((2, 1), dtype=int)
    frames = np.array([[[1.0]], [[-1.0]]])
    return ConditionedCorpus(controls, frames, np.array([0.5, 0.5]), 1)


def four_mode_corpus(K: int = 8, D: int = 2, seed: int = 0) -> ConditionedCorpus:
    """Four well-separated smooth atoms on a single control track.

    The conditional distribution given the (only) track is a uniform
    4-mixture, the standard target for oracle sampling and toy training.
    """
    rng = np.random.default_rng(seed)
    j = np.arange(K, dtype=float)
    signs = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    frames = np.zeros((4, K, D))
    for a in range(4):
        for d in range(D):
            wobble = 0.4 * np.sin(2.0 * math.pi * (0.08 + 0.03 * a) * j + rng.uniform(0, 2 * math.pi))
            frames[a, :, d] = 2.0 * signs[a, d % 2] + wobble
    controls = np.zeros((4, K), dtype=int)
    return ConditionedCorpus(controls, frames, np.full(4, 0.25), 1)


def sensitivity_corpus(
    K: int = 8,
    anchor_amp: float = 1.5,
    resolver_amp: float = 6.0,
    weights=(0.25, 0.25, 0.25, 0.25),
    twin_amp: float = 0.4,
    twin_split: float = 0.7,
) -> ConditionedCorpus:
    """Mixture with cross-frame couplings inside the window and twin modes.

    Two independent sign bits drive correlated (anchor, resolver) frame
    pairs: bit A sets frames (2, 3) to (+-anchor_amp, +-resolver_amp) and
    bit B does the same at frames (4, 5).  While an anchor is co-active
    with its resolver, its own noisy value leaves the bit ambiguous but the
    resolver's large amplitude settles it, so the exact velocity at an
    anchor frame depends on the *later* in-window resolver value.  A
    strictly causal attention mask cannot represent that field.

    Each bit combination additionally splits into four twin atoms that
    differ only at frames 6 and 7 by +-twin_amp each, with conditional
    mass ``twin_split`` on the positive sign per frame.  Twin separation
    is small, so reproducing the twin mixture takes a precise sampler:
    mode-assignment histograms punish models whose samples wander at the
    twin scale, which is how schedules without a deterministic denoising
    order show up.

    Per-frame control ids label each frame's role (neutral / anchor /
    resolver / twin marker), so a window-relative model can identify
    frames without absolute positions.  ``weights`` are the four bit-
    combination masses.
    """
    if K < 8:
        raise ValueError("sensitivity corpus needs K >= 8")
    if not 0.0 < twin_split < 1.0:
        raise ValueError("twin_split must lie in (0, 1)")
    bits = [(+1, +1), (+1, -1), (-1, +1), (-1, -1)]
    combo_mass = np.asarray(weights, dtype=float)
    rows, atom_weights = [], []
    for i, (a, b) in enumerate(bits):
        base = np.zeros(K)
        base[2] = a * anchor_amp
        base[3] = a * resolver_amp
        base[4] = b * anchor_amp
        base[5] = b * resolver_amp
        for s6, f6 in ((+1, twin_split), (-1, 1.0 - twin_split)):
            for s7, f7 in ((+1, twin_split), (-1, 1.0 - twin_split)):
                row = base.copy()
                row[6] = s6 * twin_amp
                row[7] = s7 * twin_amp
                rows.append(row)
                atom_weights.append(combo_mass[i] * f6 * f7)
    frames = np.asarray(rows)[:, :, None]
    controls = np.zeros((len(rows), K), dtype=int)
    controls[:, 2] = 1  # anchor A
    controls[:, 3] = 2  # resolver A
    controls[:, 4] = 3  # anchor B
    controls[:, 5] = 4  # resolver B
    controls[:, 6] = 5  # twin marker
    controls[:, 7] = 5  # twin marker
    return ConditionedCorpus(controls, frames, np.asarray(atom_weights), 5 + 1)


# --- persistence --------------------------------------------------------------


def save_corpus(corpus: ConditionedCorpus, path):
    """Write the corpus as line-delimited JSON with a header line."""
    header = {
        "version": CORPUS_FORMAT_VERSION,
        "kind": "corpus",
        "K": corpus.K,
        "D": corpus.D,
        "num_controls": corpus.num_controls,
    }
    with open(path, "w") as f:
        f.write(json.dumps(header, separators=(",", ":")) + "\n")
        for i in range(corpus.num_atoms):
            rec = {
                "controls": corpus.controls[i].tolist(),
                "frames": corpus.frames[i].tolist(),
                "weight": float(corpus.weights[i]),
            }
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_corpus(path) -> ConditionedCorpus:
    """Read and validate a corpus file; errors carry the offending line number."""
    with open(path) as f:
        lines = f.readlines()
    if not lines:
        raise ValueError(f"{path}: empty corpus file")

    def parse(idx, text):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}:{idx + 1}: malformed JSON at column {e.colno}") from e

    header = parse(0, lines[0])
    for key in ("version", "K", "D", "num_controls"):
        if key not in header:
            raise ValueError(f"{path}:1: header missing field {key!r}")
    if header["version"] != CORPUS_FORMAT_VERSION:
        raise ValueError(f"{path}:1: unsupported corpus version {header['version']}")

    controls, frames, weights = [], [], []
    for idx, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        rec = parse(idx, line)
        c = np.asarray(rec.get("controls"), dtype=int)
        z = np.asarray(rec.get("frames"), dtype=float)
        if c.shape != (header["K"],):
            raise ValueError(
                f"{path}:{idx + 1}: controls length {c.shape} does not match K={header['K']}"
            )
        if z.shape != (header["K"], header["D"]):
            raise ValueError(
                f"{path}:{idx + 1}: frames shape {z.shape} does not match "
                f"(K={header['K']}, D={header['D']})"
            )
        controls.append(c)
        frames.append(z)
        weights.append(float(rec["weight"]))

    if not controls:
        raise ValueError(f"{path}: corpus has a header but no atoms")
    return ConditionedCorpus(
        np.stack(controls), np.stack(frames), np.asarray(weights), header["num_controls"]
    )
