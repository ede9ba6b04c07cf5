import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from birkhoff_score.harmony import (
    IntervalCategory,
    IntervalWeights,
    NoChords,
    NoSonorities,
    TensionWeights,
    chord_progression_harmony,
    chord_tension_terms,
    chord_tensions,
    interval_category,
    interval_class_ratios,
    interval_harmony,
    melodic_misfit,
)
from birkhoff_score.score import KeySignature, Mode, Quality

from .conftest import chord, make_score, scores_st

DEFAULT = IntervalWeights()


@pytest.mark.parametrize(
    "cls,cat",
    [
        (7, IntervalCategory.PERFECT_CONSONANCE),
        (6, IntervalCategory.TRITONE),
        (10, IntervalCategory.MILD_DISSONANCE),
        (12, IntervalCategory.PERFECT_CONSONANCE),
        (1, IntervalCategory.SHARP_DISSONANCE),
        (9, IntervalCategory.IMPERFECT_CONSONANCE),
    ],
)
def test_interval_category(cls, cat):
    assert interval_category(cls) == cat


@pytest.mark.parametrize("bad", [0, 13, -1])
def test_interval_category_range(bad):
    with pytest.raises(ValueError):
        interval_category(bad)


def test_octave_only():
    alpha = tuple(1.0 if i == 12 else 0.0 for i in range(1, 13))
    s = make_score([(0, 2, 60), (0, 2, 72)])
    assert interval_harmony(s, IntervalWeights(alpha)) == 1.0


def test_major_triad():
    s = make_score([(0, 1, 60), (0, 1, 64), (0, 1, 67)])
    # pairs: 60-64 (4, imperfect), 64-67 (3, imperfect), 60-67 (7, perfect)
    assert interval_harmony(s) == pytest.approx((0.8 + 0.8 + 1.0) / 3, abs=1e-12)
    assert round(interval_harmony(s), 4) == 0.8667


def test_all_unison():
    s = make_score([(0, 1, 60), (0, 1, 60, 1)])
    w = IntervalWeights(tuple(0.1 * i for i in range(1, 13)), theta_ih=0.25)
    assert interval_harmony(s, w) == pytest.approx(1.2 + 0.25)


def test_monophonic_raises():
    with pytest.raises(NoSonorities):
        interval_harmony(make_score([(0, 1, 60), (1, 1, 62)]))


def test_dyad_extremes():
    values = {}
    for iv in range(25):
        values[iv] = interval_harmony(make_score([(0, 1, 48), (0, 1, 48 + iv, 1)]))
    top, bottom = max(values.values()), min(values.values())
    assert all(values[i] == top for i in (0, 12, 24))
    assert all(values[i] == bottom for i in (6, 18))


@given(scores_st(with_chords=False, min_notes=2))
def test_pir_sums_to_one(score):
    try:
        pir = interval_class_ratios(score)
    except NoSonorities:
        return
    assert abs(sum(pir) - 1.0) < 1e-12
    assert all(p >= 0 for p in pir)


@given(scores_st(with_chords=False, min_notes=2), st.floats(0.1, 10))
def test_alpha_scaling(score, k):
    w = IntervalWeights(theta_ih=0.3)
    scaled = IntervalWeights(tuple(k * a for a in w.alpha), theta_ih=0.3)
    try:
        base = interval_harmony(score, w) - 0.3
    except NoSonorities:
        return
    assert interval_harmony(score, scaled) - 0.3 == pytest.approx(k * base, rel=1e-12, abs=1e-12)


# --- tension ----------------------------------------------------------------------------


def _c_major_melody(*pitches):
    return [(4 * i, 4, p) for i, p in enumerate(pitches)]


def test_tonic_triad_zero_tension():
    s = make_score(_c_major_melody(64), [chord(0, 0)])
    assert tuple(chord_tension_terms(s, 0)) == (0, 0, 0, 0, 0, 0)
    assert chord_progression_harmony(s) == 1.0


def test_dominant_after_tonic():
    s = make_score(_c_major_melody(60, 67), [chord(0, 0), chord(4, 7)])
    t = chord_tension_terms(s, 1)
    assert t.d1 == pytest.approx(1 / 6) and t.d2 == pytest.approx(1 / 6) and t.h == pytest.approx(2 / 3)


def test_tritone_chord():
    s = make_score(_c_major_melody(66), [chord(0, 6)])
    assert chord_tension_terms(s, 0).d2 == 1.0


def test_c_g_c_hand_oracle():
    s = make_score(_c_major_melody(60, 67, 64), [chord(0, 0), chord(4, 7), chord(8, 0)])
    # hand-computed terms (d1, d2, d3, c, m, h) per chord
    terms = [
        (0, 0, 0, 0, 0, 0),
        (1 / 6, 1 / 6, 1 / 6, 0, 0, 2 / 3),
        (1 / 6, 0, 0, 0, 0, 0),
    ]
    for i, expected in enumerate(terms):
        assert tuple(chord_tension_terms(s, i)) == pytest.approx(expected)
    expected_cph = 1 - sum(sum(t) / 6 for t in terms) / 3
    assert chord_progression_harmony(s) == pytest.approx(expected_cph)
    assert chord_progression_harmony(s) == pytest.approx(25 / 27)


def test_empty_chords():
    with pytest.raises(NoChords):
        chord_progression_harmony(make_score([(0, 1, 60)]))


def test_melodic_misfit_counts_distinct_pitch_classes():
    # C, D, E, D over a C chord: distinct pcs {0, 2, 4}, one not a chord tone
    s = make_score([(0, 1, 60), (1, 1, 62), (2, 1, 64), (3, 1, 74)], [chord(0, 0)])
    assert melodic_misfit(s, 0) == pytest.approx(1 / 3)


def test_chord_outside_score_gives_zero_misfit(caplog):
    s = make_score([(0, 1, 60)], [chord(0, 0), chord(8, 7)])
    assert melodic_misfit(s, 1) == 0.0
    assert "overlaps no notes" in caplog.text


def test_all_terms_bounded_exhaustive():
    for root, quality, tonic, mode in itertools.product(range(12), Quality, range(12), Mode):
        s = make_score(
            [(0, 2, 60 + root), (2, 2, 61 + tonic)],
            [chord(0, (root + 5) % 12), chord(2, root, quality)],
            key=KeySignature(tonic, mode),
        )
        for i in (0, 1):
            assert all(0.0 <= t <= 1.0 for t in chord_tension_terms(s, i)), (root, quality, tonic, mode)


@given(scores_st(), st.integers(-11, 11))
def test_harmony_transposition_invariant(score, k):
    t = score.transposed(k)
    assert chord_progression_harmony(t) == pytest.approx(chord_progression_harmony(score), abs=1e-12)
    try:
        ih = interval_harmony(score)
    except NoSonorities:
        return
    assert interval_harmony(t) == pytest.approx(ih, abs=1e-12)


def test_tension_weights_select_terms():
    s = make_score(_c_major_melody(60, 67), [chord(0, 0), chord(4, 7)])
    only_h = TensionWeights((0, 0, 0, 0, 0, 1))
    assert chord_tensions(s, only_h) == pytest.approx([0, 2 / 3])
