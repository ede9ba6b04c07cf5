from __future__ import annotations

import struct
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from birkhoff_score.corpus import GenConfig, generate_corpus
from birkhoff_score.model import extract_many
from birkhoff_score.score import ChordAnnotation, KeySignature, Mode, NoteEvent, Quality, Score

settings.register_profile(
    "repo", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("repo")

F = Fraction


def note(onset, duration, pitch, voice=0) -> NoteEvent:
    return NoteEvent(F(onset), F(duration), pitch, voice)


def make_score(notes, chords=(), key=KeySignature(), **kw) -> Score:
    return Score.build([note(*n) if isinstance(n, tuple) else n for n in notes], chords, key=key, **kw)


def chord(onset, root, quality=Quality.MAJOR) -> ChordAnnotation:
    return ChordAnnotation(F(onset), root, Quality(quality))


# --- hand-rolled SMF writer (test oracle, independent of the parser) -----------------


def vlq(n: int) -> bytes:
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append(0x80 | (n & 0x7F))
        n >>= 7
    return bytes(reversed(out))


def track(events, end=True) -> bytes:
    """events: list of (delta_ticks, raw event bytes)."""
    body = b"".join(vlq(d) + e for d, e in events)
    if end:
        body += vlq(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + body


def smf(fmt: int, division: int, tracks) -> bytes:
    return b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division) + b"".join(tracks)


def on(pitch, vel=64, ch=0) -> bytes:
    return bytes([0x90 | ch, pitch, vel])


def off(pitch, vel=0, ch=0) -> bytes:
    return bytes([0x80 | ch, pitch, vel])


# --- strategies ------------------------------------------------------------------------

beats = st.fractions(min_value=0, max_value=16, max_denominator=8)
durations = st.sampled_from([F(1, 4), F(1, 2), F(3, 4), F(1), F(3, 2), F(2), F(3), F(4)])


@st.composite
def notes_st(draw, min_size=1, max_size=30, lo=36, hi=90):
    n = draw(st.integers(min_size, max_size))
    out = []
    for _ in range(n):
        out.append(
            NoteEvent(
                draw(st.integers(0, 32)) * F(1, 2),
                draw(durations),
                draw(st.integers(lo, hi)),
                draw(st.integers(0, 1)),
            )
        )
    return out


@st.composite
def scores_st(draw, with_chords=True, min_notes=1):
    notes = draw(notes_st(min_size=min_notes))
    chords = ()
    if with_chords:
        k = draw(st.integers(1, 6))
        onsets = sorted(draw(st.sets(st.integers(0, 16), min_size=k, max_size=k)))
        chords = tuple(
            ChordAnnotation(F(o), draw(st.integers(0, 11)), draw(st.sampled_from(list(Quality)))) for o in onsets
        )
    key = KeySignature(draw(st.integers(0, 11)), draw(st.sampled_from(list(Mode))))
    return Score.build(notes, chords, key=key, id="h")


# --- shared corpus ---------------------------------------------------------------------


@pytest.fixture(scope="session")
def corpus42():
    return generate_corpus(GenConfig(seed=42, n_pairs=100))


@pytest.fixture(scope="session")
def features42(corpus42):
    return extract_many(corpus42, jobs=4)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("tests.test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
