"""Complexity-side features: histogram entropy and a compression-based estimate
of Kolmogorov complexity over a canonical byte encoding of the score."""

from __future__ import annotations

import math
import zlib
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .score import (
    EmptyScore,
    Histogram,
    Quality,
    Score,
    build_duration_histogram,
    build_pitch_class_histogram,
)

COMPRESSOR_NAME = "deflate-raw"
COMPRESSION_LEVEL = 9

_MAGIC = b"BSC1"
_CHORD_MARK = 0xC1
_QUALITY_CODES = {q: i for i, q in enumerate(Quality)}


class EmptyHistogram(ValueError):
    pass


def shannon_entropy(h: Histogram) -> float:
    """Entropy in bits of the histogram's empirical distribution."""
    total = h.total
    if total <= 0:
        raise EmptyHistogram("histogram has no counts")
    return -sum((c / total) * math.log2(c / total) for c in h.counts if c > 0)


@dataclass(frozen=True)
class EntropyWeights:
    eta1: float = 1.0
    eta2: float = 1.0
    theta_e: float = 0.0


class EntropyResult(NamedTuple):
    phe: float
    rhe: float
    combined: float


def entropy_feature(score: Score, w: EntropyWeights = EntropyWeights()) -> EntropyResult:
    phe = shannon_entropy(build_pitch_class_histogram(score))
    rhe = shannon_entropy(build_duration_histogram(score))
    return EntropyResult(phe, rhe, w.eta1 * phe + w.eta2 * rhe + w.theta_e)


def _uvarint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _fraction(value: Fraction) -> bytes:
    return _uvarint(value.numerator) + _uvarint(value.denominator)


def canonical_serialize(score: Score) -> bytes:
    """Deterministic byte stream: header, then one record per note in
    (onset, pitch) order, then an optional chord section.

    Note record: delta onset and duration as numerator/denominator varints,
    then the pitch byte and the voice byte.
    """
    if not score.notes:
        raise EmptyScore(f"score {score.id!r} has no notes")
    out = bytearray(_MAGIC)
    out += bytes([score.key.tonic, 0 if score.key.mode.value == "major" else 1])
    out += _uvarint(score.beats_per_bar)
    out += _uvarint(len(score.notes))
    prev = Fraction(0)
    for n in sorted(score.notes, key=lambda n: n.sort_key()):
        out += _fraction(n.onset - prev)
        out += _fraction(Fraction(n.duration))
        out.append(n.pitch)
        out.append(n.voice)
        prev = n.onset
    if score.chords:
        out.append(_CHORD_MARK)
        out += _uvarint(len(score.chords))
        prev = Fraction(0)
        for c in score.chords:
            out += _fraction(c.onset - prev)
            out.append(c.root)
            out.append(_QUALITY_CODES[c.quality])
            prev = c.onset
    return bytes(out)


def compress(data: bytes, level: int = COMPRESSION_LEVEL) -> bytes:
    """Raw DEFLATE, no container header or checksum."""
    co = zlib.compressobj(level, zlib.DEFLATED, -15, 9, zlib.Z_DEFAULT_STRATEGY)
    return co.compress(data) + co.flush()


def decompress(data: bytes) -> bytes:
    return zlib.decompress(data, -15)


def byte_entropy(data: bytes) -> float:
    counts = Counter(data)
    n = len(data)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


@dataclass(frozen=True)
class ComplexityReport:
    n_symbols: int
    per_symbol_entropy: float
    compressed_bits: float
    feature: float
    degenerate: bool = False
    clamped: bool = False


def redundancy_from_stream(data: bytes, level: int = COMPRESSION_LEVEL) -> ComplexityReport:
    n = len(data)
    if n < 1:
        raise ValueError("empty stream")
    hm = byte_entropy(data)
    k = 8.0 * len(compress(data, level))
    info = n * hm
    if info == 0:
        return ComplexityReport(n, hm, k, 1.0, degenerate=True)
    raw = (info - k) / info
    feature = min(1.0, max(-1.0, raw))
    return ComplexityReport(n, hm, k, feature, clamped=feature != raw)


def kolmogorov_complexity(score: Score, level: int = COMPRESSION_LEVEL) -> ComplexityReport:
    """Redundancy ratio (N*H - K) / (N*H) of the canonical serialisation."""
    return redundancy_from_stream(canonical_serialize(score), level)
