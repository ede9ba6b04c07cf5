"""Order-side harmony features: interval harmony and chord progression harmony."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .score import (
    ChordAnnotation,
    Mode,
    Quality,
    Score,
    circle_of_fifths_distance,
    extract_sonorities,
    interval_semitones,
    reduce_to_interval_class,
)

log = logging.getLogger(__name__)


class NoSonorities(ValueError):
    """Every segment of the score is monophonic."""


class NoChords(ValueError):
    pass


class IntervalCategory(str, enum.Enum):
    PERFECT_CONSONANCE = "perfect_consonance"
    IMPERFECT_CONSONANCE = "imperfect_consonance"
    MILD_DISSONANCE = "mild_dissonance"
    SHARP_DISSONANCE = "sharp_dissonance"
    TRITONE = "tritone"


_CATEGORY_OF_CLASS = {
    1: IntervalCategory.SHARP_DISSONANCE,
    2: IntervalCategory.MILD_DISSONANCE,
    3: IntervalCategory.IMPERFECT_CONSONANCE,
    4: IntervalCategory.IMPERFECT_CONSONANCE,
    5: IntervalCategory.PERFECT_CONSONANCE,
    6: IntervalCategory.TRITONE,
    7: IntervalCategory.PERFECT_CONSONANCE,
    8: IntervalCategory.IMPERFECT_CONSONANCE,
    9: IntervalCategory.IMPERFECT_CONSONANCE,
    10: IntervalCategory.MILD_DISSONANCE,
    11: IntervalCategory.SHARP_DISSONANCE,
    12: IntervalCategory.PERFECT_CONSONANCE,
}

CATEGORY_WEIGHTS = {
    IntervalCategory.PERFECT_CONSONANCE: 1.0,
    IntervalCategory.IMPERFECT_CONSONANCE: 0.8,
    IntervalCategory.MILD_DISSONANCE: 0.4,
    IntervalCategory.SHARP_DISSONANCE: 0.1,
    IntervalCategory.TRITONE: 0.0,
}


def interval_category(interval_class: int) -> IntervalCategory:
    if interval_class not in _CATEGORY_OF_CLASS:
        raise ValueError(f"interval class must be in 1..12, got {interval_class}")
    return _CATEGORY_OF_CLASS[interval_class]


def _default_alpha() -> tuple[float, ...]:
    return tuple(CATEGORY_WEIGHTS[interval_category(i)] for i in range(1, 13))


@dataclass(frozen=True)
class IntervalWeights:
    """``alpha[i - 1]`` weights interval class ``i``."""

    alpha: tuple[float, ...] = field(default_factory=_default_alpha)
    theta_ih: float = 0.0

    def __post_init__(self):
        if len(self.alpha) != 12:
            raise ValueError("alpha needs exactly 12 weights")


@dataclass(frozen=True)
class TensionWeights:
    lam: tuple[float, ...] = (1 / 6,) * 6

    def __post_init__(self):
        if len(self.lam) != 6:
            raise ValueError("lam needs exactly 6 weights")


def interval_class_ratios(score: Score) -> list[float]:
    """Share of each interval class 1..12 among all pairwise intervals of all sonorities."""
    counts = [0] * 12
    for son in extract_sonorities(score):
        p = son.pitches
        for i in range(len(p)):
            for j in range(i + 1, len(p)):
                counts[reduce_to_interval_class(interval_semitones(p[i], p[j])) - 1] += 1
    total = sum(counts)
    if total == 0:
        raise NoSonorities(f"score {score.id!r} has no simultaneous pitches")
    return [c / total for c in counts]


def interval_harmony(score: Score, w: IntervalWeights = IntervalWeights()) -> float:
    pir = interval_class_ratios(score)
    return sum(a * r for a, r in zip(w.alpha, pir)) + w.theta_ih


# --- chord progression tension ------------------------------------------------

QUALITY_DISSONANCE = {
    Quality.MAJOR: 0.0,
    Quality.MINOR: 0.0,
    Quality.DOMINANT7: 0.4,
    Quality.MINOR7: 0.5,
    Quality.MAJOR7: 0.5,
    Quality.DIMINISHED: 0.8,
    Quality.AUGMENTED: 1.0,
}

_TONIC, _SUBDOMINANT, _DOMINANT = 0.0, 1 / 3, 2 / 3
_FUNCTION_OF_DEGREE = {1: _TONIC, 6: _TONIC, 4: _SUBDOMINANT, 2: _SUBDOMINANT, 5: _DOMINANT, 7: _DOMINANT}

# Root offset above the tonic -> scale degree. Minor also admits the raised
# leading tone so vii° of harmonic minor is read as dominant.
_DEGREES = {
    Mode.MAJOR: {0: 1, 2: 2, 4: 3, 5: 4, 7: 5, 9: 6, 11: 7},
    Mode.MINOR: {0: 1, 2: 2, 3: 3, 5: 4, 7: 5, 8: 6, 10: 7, 11: 7},
}


class TensionTerms(NamedTuple):
    d1: float
    d2: float
    d3: float
    c: float
    m: float
    h: float


def chord_span(score: Score, index: int) -> tuple[Fraction, Fraction]:
    chords = score.chords
    start = chords[index].onset
    if index + 1 < len(chords):
        return start, chords[index + 1].onset
    return start, max(score.total_duration, start)


def melodic_misfit(score: Score, index: int) -> float:
    """Share of distinct melody pitch classes under the chord that are not chord tones."""
    start, stop = chord_span(score, index)
    sounding = [n for n in score.notes if n.onset < stop and n.end > start]
    heard = {n.pitch % 12 for n in sounding if n.voice == 0}
    if not heard:
        if sounding:
            log.debug("chord %d of %r has a silent melody; m = 0", index, score.id)
        else:
            log.warning("chord %d of %r overlaps no notes; m = 0", index, score.id)
        return 0.0
    tones = score.chords[index].pitch_classes()
    return 1.0 - len(heard & tones) / len(heard)


def chord_function_distance(chord: ChordAnnotation, tonic: int, mode: Mode) -> float:
    degree = _DEGREES[mode].get((chord.root - tonic) % 12)
    return _FUNCTION_OF_DEGREE.get(degree, 1.0)


def chord_tension_terms(score: Score, index: int) -> TensionTerms:
    """Six bounded tension terms for chord ``index`` of the score's progression."""
    chords = score.chords
    chord = chords[index]
    tonic = score.key.tonic
    d1 = 0.0 if index == 0 else circle_of_fifths_distance(chord.root, chords[index - 1].root) / 6
    d2 = circle_of_fifths_distance(chord.root, tonic) / 6
    final_offset = (chords[-1].root - tonic) % 12
    d3 = circle_of_fifths_distance((chord.root - tonic) % 12, final_offset) / 6
    c = QUALITY_DISSONANCE[chord.quality]
    m = melodic_misfit(score, index)
    h = chord_function_distance(chord, tonic, score.key.mode)
    return TensionTerms(d1, d2, d3, c, m, h)


def chord_tensions(score: Score, w: TensionWeights = TensionWeights()) -> list[float]:
    if not score.chords:
        raise NoChords(f"score {score.id!r} has no chord annotations")
    return [sum(l * t for l, t in zip(w.lam, chord_tension_terms(score, i))) for i in range(len(score.chords))]


def chord_progression_harmony(score: Score, w: TensionWeights = TensionWeights()) -> float:
    """One minus the mean progression tension, so higher means more harmonious."""
    tensions = chord_tensions(score, w)
    return 1.0 - sum(tensions) / len(tensions)
