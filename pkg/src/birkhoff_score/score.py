"""Score representation and the low-level musical primitives every feature uses.

Onsets and durations are :class:`fractions.Fraction` beats so that sweeps over
note boundaries never accumulate float drift.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

PITCH_CLASSES = 12
NOTE_NAMES = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B")

# Fixed rhythm bins in beats; ties snap toward the shorter bin.
DURATION_BINS: tuple[Fraction, ...] = (
    Fraction(1, 4),
    Fraction(1, 2),
    Fraction(3, 4),
    Fraction(1),
    Fraction(3, 2),
    Fraction(2),
    Fraction(3),
    Fraction(4),
)


class EmptyScore(ValueError):
    """Raised when an operation needs at least one note."""


class Quality(str, enum.Enum):
    MAJOR = "major"
    MINOR = "minor"
    DIMINISHED = "diminished"
    AUGMENTED = "augmented"
    DOMINANT7 = "dominant7"
    MAJOR7 = "major7"
    MINOR7 = "minor7"


class Mode(str, enum.Enum):
    MAJOR = "major"
    MINOR = "minor"


class Label(str, enum.Enum):
    COMPOSER = "composer"
    AI = "ai"


# Intervals above the root, in semitones.
CHORD_TONES: dict[Quality, tuple[int, ...]] = {
    Quality.MAJOR: (0, 4, 7),
    Quality.MINOR: (0, 3, 7),
    Quality.DIMINISHED: (0, 3, 6),
    Quality.AUGMENTED: (0, 4, 8),
    Quality.DOMINANT7: (0, 4, 7, 10),
    Quality.MAJOR7: (0, 4, 7, 11),
    Quality.MINOR7: (0, 3, 7, 10),
}

SCALE_STEPS: dict[Mode, tuple[int, ...]] = {
    Mode.MAJOR: (0, 2, 4, 5, 7, 9, 11),
    Mode.MINOR: (0, 2, 3, 5, 7, 8, 10),
}


@dataclass(frozen=True)
class NoteEvent:
    """One sounding note. ``voice`` 0 is the melody, 1 the accompaniment."""

    onset: Fraction
    duration: Fraction
    pitch: int
    voice: int = 0

    @property
    def end(self) -> Fraction:
        return self.onset + self.duration

    def sort_key(self) -> tuple[Fraction, int, int, Fraction]:
        return (self.onset, self.pitch, self.voice, self.duration)


@dataclass(frozen=True)
class ChordAnnotation:
    onset: Fraction
    root: int
    quality: Quality

    def pitch_classes(self) -> frozenset[int]:
        return frozenset((self.root + step) % 12 for step in CHORD_TONES[self.quality])


@dataclass(frozen=True)
class KeySignature:
    tonic: int = 0
    mode: Mode = Mode.MAJOR

    def scale(self) -> frozenset[int]:
        return frozenset((self.tonic + s) % 12 for s in SCALE_STEPS[self.mode])


@dataclass(frozen=True)
class Score:
    notes: tuple[NoteEvent, ...]
    chords: tuple[ChordAnnotation, ...] = ()
    key: KeySignature = KeySignature()
    beats_per_bar: int = 4
    label: Optional[Label] = None
    id: str = ""

    @classmethod
    def build(
        cls,
        notes: Iterable[NoteEvent],
        chords: Iterable[ChordAnnotation] = (),
        **kwargs,
    ) -> "Score":
        """Construct a score with notes put into canonical (onset, pitch) order."""
        ordered = tuple(sorted(notes, key=NoteEvent.sort_key))
        return cls(notes=ordered, chords=tuple(chords), **kwargs)

    @property
    def total_duration(self) -> Fraction:
        if not self.notes:
            return Fraction(0)
        return max(n.end for n in self.notes)

    def voice(self, v: int) -> tuple[NoteEvent, ...]:
        return tuple(n for n in self.notes if n.voice == v)

    def transposed(self, semitones: int, *, key_and_chords: bool = True) -> "Score":
        notes = tuple(replace(n, pitch=n.pitch + semitones) for n in self.notes)
        if not key_and_chords:
            return replace(self, notes=notes)
        chords = tuple(replace(c, root=(c.root + semitones) % 12) for c in self.chords)
        key = replace(self.key, tonic=(self.key.tonic + semitones) % 12)
        return replace(self, notes=notes, chords=chords, key=key)


@dataclass(frozen=True)
class Histogram:
    bin_labels: tuple
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def probabilities(self) -> list[float]:
        total = self.total
        if total == 0:
            return [0.0] * len(self.counts)
        return [c / total for c in self.counts]

    def as_dict(self) -> dict:
        return dict(zip(self.bin_labels, self.counts))


class Sonority(NamedTuple):
    onset: Fraction
    end: Fraction
    pitches: tuple[int, ...]


def interval_semitones(a: int, b: int) -> int:
    return abs(a - b)


def reduce_to_interval_class(semitones: int) -> int:
    """Fold a non-negative interval into 1..12; unison counts as the octave class."""
    if semitones < 0:
        raise ValueError(f"interval must be non-negative, got {semitones}")
    if semitones == 0:
        return 12
    return (semitones - 1) % 12 + 1


def _require_notes(score: Score) -> None:
    if not score.notes:
        raise EmptyScore(f"score {score.id!r} has no notes")


def build_pitch_class_histogram(score: Score) -> Histogram:
    _require_notes(score)
    counts = [0] * PITCH_CLASSES
    for n in score.notes:
        counts[n.pitch % 12] += 1
    return Histogram(tuple(range(PITCH_CLASSES)), tuple(counts))


def snap_duration(duration: Fraction) -> Fraction:
    best = DURATION_BINS[0]
    best_dist = abs(duration - best)
    for b in DURATION_BINS[1:]:
        d = abs(duration - b)
        # strict comparison keeps the shorter bin on ties
        if d < best_dist:
            best, best_dist = b, d
    return best


def build_duration_histogram(score: Score) -> Histogram:
    _require_notes(score)
    index = {b: i for i, b in enumerate(DURATION_BINS)}
    counts = [0] * len(DURATION_BINS)
    for n in score.notes:
        counts[index[snap_duration(Fraction(n.duration))]] += 1
    return Histogram(DURATION_BINS, tuple(counts))


def sounding_segments(notes: Sequence[NoteEvent]) -> list[Sonority]:
    """Split the timeline at every note boundary and list what sounds in each piece.

    Segments where nothing sounds are dropped. Pitches are kept as a sorted
    multiset so a unison between the two voices still yields an interval.
    """
    boundaries = sorted({n.onset for n in notes} | {n.end for n in notes})
    if len(boundaries) < 2:
        return []
    ordered = sorted(notes, key=NoteEvent.sort_key)
    segments = []
    active: list[NoteEvent] = []
    i = 0
    for start, stop in zip(boundaries, boundaries[1:]):
        while i < len(ordered) and ordered[i].onset <= start:
            active.append(ordered[i])
            i += 1
        active = [n for n in active if n.end > start]
        if active:
            segments.append(Sonority(start, stop, tuple(sorted(n.pitch for n in active))))
    return segments


def extract_sonorities(score: Score) -> list[Sonority]:
    """Segments with at least two simultaneous pitches."""
    return [s for s in sounding_segments(score.notes) if len(s.pitches) >= 2]


def circle_of_fifths_distance(a: int, b: int) -> int:
    """Steps between two pitch classes around the circle of fifths (0..6)."""
    diff = ((a - b) * 7) % 12
    return min(diff, 12 - diff)
