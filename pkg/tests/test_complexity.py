import hashlib
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from birkhoff_score.complexity import (
    EmptyHistogram,
    EntropyWeights,
    canonical_serialize,
    compress,
    decompress,
    entropy_feature,
    kolmogorov_complexity,
    redundancy_from_stream,
    shannon_entropy,
)
from birkhoff_score.score import ChordAnnotation, Histogram, KeySignature, Mode, NoteEvent, Quality, Score

from .conftest import F, chord, make_score, scores_st


def _hist(*counts):
    return Histogram(tuple(range(len(counts))), tuple(counts))


def test_entropy_examples():
    assert shannon_entropy(_hist(1, 1)) == 1.0
    assert shannon_entropy(_hist(*[1] * 12)) == pytest.approx(math.log2(12), abs=1e-12)
    assert round(shannon_entropy(_hist(*[3] * 12)), 4) == 3.5850
    assert shannon_entropy(_hist(0, 7, 0)) == 0.0


def test_entropy_empty():
    with pytest.raises(EmptyHistogram):
        shannon_entropy(_hist(0, 0))


@given(st.lists(st.integers(0, 50), min_size=1, max_size=12).filter(any), st.randoms())
def test_entropy_bin_permutation(counts, rnd):
    perm = list(counts)
    rnd.shuffle(perm)
    assert shannon_entropy(_hist(*perm)) == pytest.approx(shannon_entropy(_hist(*counts)), abs=1e-12)


@given(scores_st(with_chords=False))
def test_entropy_bounds(score):
    r = entropy_feature(score)
    assert 0.0 <= r.phe <= math.log2(12) + 1e-12
    assert 0.0 <= r.rhe <= math.log2(8) + 1e-12


def test_one_repeated_note():
    s = make_score([(i, 1, 60) for i in range(8)])
    r = entropy_feature(s, EntropyWeights(theta_e=0.7))
    assert r.phe == 0.0 and r.rhe == 0.0 and r.combined == 0.7


def test_entropy_linear_form():
    # four equiprobable pitch classes (2 bits), durations 1/2 : 1/4 : 1/4 (1.5 bits)
    s = make_score([(0, 1, 60), (1, 1, 62), (2, F(1, 2), 64), (3, F(1, 4), 65)])
    r = entropy_feature(s)
    assert r.phe == 2.0 and r.rhe == 1.5 and r.combined == 3.5


# --- serialisation ------------------------------------------------------------------


def _random_score(rnd, with_chords):
    notes = [
        NoteEvent(F(rnd.randint(0, 64), rnd.choice([1, 2, 4])), F(rnd.randint(1, 8), 4), rnd.randint(30, 100), rnd.randint(0, 1))
        for _ in range(rnd.randint(1, 40))
    ]
    chords = ()
    if with_chords:
        onsets = sorted(rnd.sample(range(32), rnd.randint(1, 6)))
        chords = tuple(ChordAnnotation(F(o), rnd.randint(0, 11), rnd.choice(list(Quality))) for o in onsets)
    return notes, chords, KeySignature(rnd.randint(0, 11), rnd.choice(list(Mode)))


def test_serialisation_deterministic_over_fuzzed_scores():
    rnd = random.Random(1234)
    for _ in range(1000):
        notes, chords, key = _random_score(rnd, rnd.random() < 0.5)
        shuffled = list(notes)
        rnd.shuffle(shuffled)
        a = canonical_serialize(Score.build(notes, chords, key=key, id="a"))
        b = canonical_serialize(Score.build(shuffled, chords, key=key, id="b"))
        assert hashlib.sha256(a).digest() == hashlib.sha256(b).digest()
        assert decompress(compress(a)) == a


@given(scores_st(), st.integers(1, 11))
def test_transposition_touches_only_pitch_bytes(score, k):
    a = canonical_serialize(score)
    b = canonical_serialize(score.transposed(k, key_and_chords=False))
    assert len(a) == len(b)
    diffs = [(x, y) for x, y in zip(a, b) if x != y]
    assert len(diffs) == len(score.notes)
    assert all(y - x == k for x, y in diffs)


def test_chord_section_only_with_chords():
    notes = [(0, 1, 60), (1, 1, 62)]
    bare = canonical_serialize(make_score(notes))
    full = canonical_serialize(make_score(notes, [chord(0, 0)]))
    assert full.startswith(bare)
    assert full[len(bare)] == 0xC1


@given(st.binary(min_size=0, max_size=4000))
def test_compress_round_trip(data):
    assert decompress(compress(data)) == data


def test_single_byte_value_is_fully_redundant():
    r = redundancy_from_stream(b"\x2a" * 500)
    assert r.feature == 1.0 and r.degenerate


def test_repeated_motif_more_redundant_than_random():
    motif = [60, 64, 67, 65, 62, 59, 60, 72]
    rep = make_score([(i, 1, p) for i, p in enumerate(motif * 8)])
    rnd = random.Random(7)
    rand = make_score([(i, 1, rnd.randint(48, 84)) for i in range(64)])
    assert kolmogorov_complexity(rep).feature > kolmogorov_complexity(rand).feature


@given(scores_st())
def test_feature_in_range(score):
    r = kolmogorov_complexity(score)
    assert -1.0 <= r.feature <= 1.0
    assert r.compressed_bits == 8 * len(compress(canonical_serialize(score)))
