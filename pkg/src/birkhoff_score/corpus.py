"""Seeded two-class corpus: composer-like and AI-like homophony scores over
shared chord progressions, plus the pair-preserving train/test split."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._io import atomic_write_text
from .ingest import IngestError, SchemaError, score_from_document, score_to_document
from .score import (
    CHORD_TONES,
    DURATION_BINS,
    SCALE_STEPS,
    ChordAnnotation,
    KeySignature,
    Label,
    Mode,
    NoteEvent,
    Quality,
    Score,
)

# (numerals, mode) pairs; every one is used in all 12 keys by default.
COMMON_PROGRESSIONS: tuple[tuple[tuple[str, ...], str], ...] = (
    (("I", "V", "vi", "IV"), "major"),
    (("vi", "IV", "I", "V"), "major"),
    (("I", "vi", "IV", "V"), "major"),
    (("I", "IV", "V", "IV"), "major"),
    (("ii7", "V7", "Imaj7", "vi"), "major"),
    (("I", "IV", "vi", "V"), "major"),
    (("I", "iii", "IV", "V"), "major"),
    (("IV", "V", "iii", "vi"), "major"),
    (("I", "V", "vi", "iii", "IV", "I", "IV", "V"), "major"),
    (("I", "bVII", "IV", "I"), "major"),
    (("i", "VI", "III", "VII"), "minor"),
    (("i", "iv", "VII", "III"), "minor"),
)

_NUMERAL = re.compile(r"^(b|#)?(VII|VI|IV|V|III|II|I|vii|vi|iv|v|iii|ii|i)(°|o|\+)?(maj7|7)?$")
_ROMAN = {"i": 1, "ii": 2, "iii": 3, "iv": 4, "v": 5, "vi": 6, "vii": 7}

MELODY_DURATIONS = (Fraction(1, 2), Fraction(1), Fraction(2))
MELODY_DURATION_P = (0.6, 0.3, 0.1)
PASSING_TONE_P = 0.5
PASSING_MAX_DURATION = Fraction(1)
VARIATION_P = 0.08
SECTION_BARS = 4
# Chord-tone index weights: root, third, fifth, seventh (wraps to root on triads).
TONE_P = (0.1, 0.35, 0.35, 0.2)
UPPER_OCTAVE_P = 0.3

AI_REST_P = 0.15
AI_RANGE = 14
# Walk steps in semitones. The walk mostly repeats its note and so hovers
# around the tonic it starts on.
AI_STEPS = (-1, 0, 1)
AI_STEP_P = (0.08, 0.84, 0.08)
# Every duration bin is possible, with probability proportional to its length.
AI_DURATION_P = tuple(float(d / sum(DURATION_BINS)) for d in DURATION_BINS)


def parse_numeral(numeral: str, key: KeySignature) -> tuple[int, Quality]:
    """Root pitch class and quality of a roman numeral in ``key``."""
    m = _NUMERAL.match(numeral)
    if not m:
        raise ValueError(f"cannot parse roman numeral {numeral!r}")
    accidental, roman, mark, seventh = m.groups()
    degree = _ROMAN[roman.lower()]
    offset = SCALE_STEPS[key.mode][degree - 1] + {None: 0, "b": -1, "#": 1}[accidental]
    upper = roman.isupper()
    if mark in ("°", "o"):
        quality = Quality.DIMINISHED
    elif mark == "+":
        quality = Quality.AUGMENTED
    elif seventh == "maj7":
        quality = Quality.MAJOR7
    elif seventh == "7":
        quality = Quality.DOMINANT7 if upper else Quality.MINOR7
    else:
        quality = Quality.MAJOR if upper else Quality.MINOR
    return (key.tonic + offset) % 12, quality


@dataclass(frozen=True)
class Progression:
    tonic: int
    mode: str
    numerals: tuple[str, ...]

    @property
    def key(self) -> KeySignature:
        return KeySignature(self.tonic, Mode(self.mode))


def default_progression_pool() -> tuple[Progression, ...]:
    return tuple(Progression(t, mode, nums) for nums, mode in COMMON_PROGRESSIONS for t in range(12))


@dataclass(frozen=True)
class GenConfig:
    seed: int = 42
    n_pairs: int = 100
    bars: int = 16
    beats_per_bar: int = 4
    progression_pool: tuple[Progression, ...] = field(default_factory=default_progression_pool)

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be at least 1")
        if self.bars < 4:
            raise ValueError("bars must be at least 4")
        if self.beats_per_bar < 1:
            raise ValueError("beats_per_bar must be positive")
        if not self.progression_pool:
            raise ValueError("progression_pool is empty")

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        kwargs = {k: d[k] for k in ("seed", "n_pairs", "bars", "beats_per_bar") if k in d}
        if d.get("progression_pool"):
            kwargs["progression_pool"] = tuple(
                Progression(int(p["tonic"]), str(p["mode"]), tuple(p["numerals"])) for p in d["progression_pool"]
            )
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_pairs": self.n_pairs,
            "bars": self.bars,
            "beats_per_bar": self.beats_per_bar,
            "progression_pool": [
                {"tonic": p.tonic, "mode": p.mode, "numerals": list(p.numerals)} for p in self.progression_pool
            ],
        }


def load_gen_config(path: str | Path) -> GenConfig:
    return GenConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _rng(cfg: GenConfig, index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, index, stream])


def _chord_track(cfg: GenConfig, index: int) -> tuple[KeySignature, list[ChordAnnotation]]:
    rng = _rng(cfg, index, 0)
    prog = cfg.progression_pool[int(rng.integers(len(cfg.progression_pool)))]
    key = prog.key
    chords = []
    for bar in range(cfg.bars):
        root, quality = parse_numeral(prog.numerals[bar % len(prog.numerals)], key)
        chords.append(ChordAnnotation(Fraction(bar * cfg.beats_per_bar), root, quality))
    return key, chords


def _block_chords(chords: Sequence[ChordAnnotation], end: Fraction) -> list[NoteEvent]:
    notes = []
    for i, c in enumerate(chords):
        stop = chords[i + 1].onset if i + 1 < len(chords) else end
        bass = 48 + c.root
        for step in CHORD_TONES[c.quality]:
            notes.append(NoteEvent(c.onset, stop - c.onset, bass + step, 1))
    return notes


def _score_id(cfg: GenConfig, index: int, label: Label) -> str:
    return f"s{cfg.seed}-{index:04d}-{label.value}"


def pair_key(score: Score) -> str:
    """Scores generated for the same pair index share this key."""
    for label in Label:
        suffix = f"-{label.value}"
        if score.id.endswith(suffix):
            return score.id[: -len(suffix)]
    return score.id


# --- composer-like --------------------------------------------------------------------


def _bar_rhythm(rng: np.random.Generator, beats: int) -> list[Fraction]:
    out: list[Fraction] = []
    left = Fraction(beats)
    while left > 0:
        choices = [d for d in MELODY_DURATIONS if d <= left]
        p = np.array([MELODY_DURATION_P[MELODY_DURATIONS.index(d)] for d in choices])
        d = choices[int(rng.choice(len(choices), p=p / p.sum()))]
        out.append(d)
        left -= d
    return out


def _section(rng: np.random.Generator, bars: int, beats: int) -> list[tuple[Fraction, Fraction, int, int, int]]:
    """Abstract melody: (offset, duration, chord-tone index, octave, passing step).

    The passing step is 0 for a chord tone, +1 or -1 for the neighbouring
    scale step above or below it.
    """
    notes = []
    for bar in range(bars):
        t = Fraction(bar * beats)
        for d in _bar_rhythm(rng, beats):
            tone = int(rng.choice(4, p=TONE_P))
            octave = int(rng.random() < UPPER_OCTAVE_P)
            passing = 0
            if d <= PASSING_MAX_DURATION and rng.random() < PASSING_TONE_P:
                passing = 1 if rng.random() < 0.5 else -1
            notes.append((t, d, tone, octave, passing))
            t += d
    return notes


def _vary(rng: np.random.Generator, section):
    out = []
    for t, d, tone, octave, passing in section:
        if rng.random() < VARIATION_P:
            tone = (tone + int(rng.integers(1, 3))) % 4
        out.append((t, d, tone, octave, passing))
    return out


def _realise(spec, start: Fraction, chords: Sequence[ChordAnnotation], key: KeySignature, beats: int) -> list[NoteEvent]:
    scale = sorted(key.scale())
    notes = []
    for t, d, tone, octave, passing in spec:
        onset = start + t
        chord = chords[min(int(onset // beats), len(chords) - 1)]
        steps = CHORD_TONES[chord.quality]
        pc = (chord.root + steps[tone % len(steps)]) % 12
        if passing > 0:
            pc = next((s for s in scale if s > pc), scale[0] + 12) % 12
        elif passing < 0:
            pc = next((s for s in reversed(scale) if s < pc), scale[-1] - 12) % 12
        pitch = 60 + (pc - key.tonic) % 12 + key.tonic + 12 * octave
        notes.append(NoteEvent(onset, d, pitch, 0))
    return notes


def _form(n_sections: int) -> list[str]:
    return ["AABA"[i % 4] for i in range(n_sections)]


def gen_composer_like(cfg: GenConfig, index: int) -> Score:
    """Motif-based melody on chord tones with occasional passing tones, in AABA form."""
    key, chords = _chord_track(cfg, index)
    rng = _rng(cfg, index, 1)
    beats = cfg.beats_per_bar
    section_bars = SECTION_BARS if cfg.bars >= 2 * SECTION_BARS else 2
    motif_a = _section(rng, section_bars, beats)
    motif_b = _section(rng, section_bars, beats)
    end = Fraction(cfg.bars * beats)
    melody: list[NoteEvent] = []
    n_sections = math.ceil(cfg.bars / section_bars)
    seen_a = False
    for i, part in enumerate(_form(n_sections)):
        if part == "A":
            spec = _vary(rng, motif_a) if seen_a else motif_a
            seen_a = True
        else:
            spec = motif_b
        start = Fraction(i * section_bars * beats)
        melody += [n for n in _realise(spec, start, chords, key, beats) if n.onset < end]
    melody = [NoteEvent(n.onset, min(n.duration, end - n.onset), n.pitch, 0) for n in melody]
    notes = melody + _block_chords(chords, end)
    return Score.build(
        notes, chords, key=key, beats_per_bar=beats, label=Label.COMPOSER, id=_score_id(cfg, index, Label.COMPOSER)
    )


# --- AI-like -------------------------------------------------------------------------


def gen_ai_like(cfg: GenConfig, index: int) -> Score:
    """Chromatic random-walk melody with random durations and rests over the
    same chord track as the paired composer-like score."""
    key, chords = _chord_track(cfg, index)
    rng = _rng(cfg, index, 2)
    end = Fraction(cfg.bars * cfg.beats_per_bar)
    centre = 60 + key.tonic
    lo, hi = centre - AI_RANGE, centre + AI_RANGE
    pitch = centre
    t = Fraction(0)
    melody = []
    while t < end:
        d = min(DURATION_BINS[int(rng.choice(len(DURATION_BINS), p=AI_DURATION_P))], end - t)
        if rng.random() >= AI_REST_P:
            melody.append(NoteEvent(t, d, pitch, 0))
            pitch += AI_STEPS[int(rng.choice(len(AI_STEPS), p=AI_STEP_P))]
            if pitch > hi:
                pitch = 2 * hi - pitch
            elif pitch < lo:
                pitch = 2 * lo - pitch
        t += d
    notes = melody + _block_chords(chords, end)
    return Score.build(
        notes, chords, key=key, beats_per_bar=cfg.beats_per_bar, label=Label.AI, id=_score_id(cfg, index, Label.AI)
    )


def generate_corpus(cfg: GenConfig) -> list[Score]:
    """Pairs in index order: composer-like then AI-like for each index."""
    out = []
    for i in range(cfg.n_pairs):
        out.append(gen_composer_like(cfg, i))
        out.append(gen_ai_like(cfg, i))
    return out


# --- splitting and persistence ---------------------------------------------------------


def split_dataset(
    scores: Sequence[Score], ratio: float = 0.7, seed: int = 0, group: Callable[[Score], str] = pair_key
) -> tuple[list[Score], list[Score]]:
    """Seeded split that keeps each group (pair) on one side.

    Groups are bucketed by the labels they contain and each bucket is split
    at ceil(ratio * size), so class proportions follow the ratio.
    """
    if not scores:
        return [], []
    groups: dict[str, list[int]] = {}
    for i, s in enumerate(scores):
        groups.setdefault(group(s), []).append(i)
    buckets: dict[tuple, list[str]] = {}
    for k, members in groups.items():
        sig = tuple(sorted(str(scores[i].label) for i in members))
        buckets.setdefault(sig, []).append(k)
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    for sig in sorted(buckets):
        keys = buckets[sig]
        order = rng.permutation(len(keys))
        cut = math.ceil(ratio * len(keys))
        for j in order[:cut]:
            train_idx.extend(groups[keys[j]])
    chosen = set(train_idx)
    train = [scores[i] for i in sorted(chosen)]
    test = [scores[i] for i in range(len(scores)) if i not in chosen]
    return train, test


def write_dataset(scores: Sequence[Score], path: str | Path) -> None:
    lines = [json.dumps(score_to_document(s), separators=(",", ":")) for s in scores]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_dataset(path: str | Path) -> list[Score]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(score_from_document(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            except IngestError as exc:
                raise SchemaError(str(exc), line=lineno) from exc
    return out
