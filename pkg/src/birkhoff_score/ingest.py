"""Read scores from Standard MIDI Files and the ``.score.json`` interchange format."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, NamedTuple, Optional

from .score import (
    ChordAnnotation,
    KeySignature,
    Label,
    Mode,
    NoteEvent,
    Quality,
    Score,
)

log = logging.getLogger(__name__)

MAX_DENOMINATOR = 64


class IngestError(ValueError):
    """Base class for every parse failure."""


class MalformedHeader(IngestError):
    pass


class MalformedTrack(IngestError):
    pass


class UnsupportedFormat(IngestError):
    pass


class DanglingNoteOn(IngestError):
    pass


class ZeroTimeDivision(IngestError):
    pass


class SchemaError(IngestError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(IngestError):
    pass


class OrderError(IngestError):
    pass


@dataclass
class ParseDiagnostics:
    source_format: str
    warnings: list[tuple[str, str]] = field(default_factory=list)

    def warn(self, location: str, message: str) -> None:
        self.warnings.append((location, message))
        log.warning("%s: %s", location, message)


# ---------------------------------------------------------------------------
# Standard MIDI File
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes, start: int = 0, end: Optional[int] = None):
        self.data = data
        self.pos = start
        self.end = len(data) if end is None else end

    def remaining(self) -> int:
        return self.end - self.pos

    def byte(self) -> int:
        if self.pos >= self.end:
            raise MalformedTrack("unexpected end of track data")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def peek(self) -> int:
        if self.pos >= self.end:
            raise MalformedTrack("unexpected end of track data")
        return self.data[self.pos]

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise MalformedTrack("length runs past end of track")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.byte()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MalformedTrack("variable-length quantity longer than 4 bytes")


def _key_from_meta(sf: int, mi: int) -> KeySignature:
    if sf > 127:
        sf -= 256
    if not -7 <= sf <= 7 or mi not in (0, 1):
        raise MalformedTrack(f"invalid key signature sf={sf} mi={mi}")
    if mi == 0:
        return KeySignature((7 * sf) % 12, Mode.MAJOR)
    return KeySignature((7 * sf + 9) % 12, Mode.MINOR)


class _RawNote(NamedTuple):
    start: int
    end: int
    pitch: int
    channel: int


def _parse_track(
    data: bytes, start: int, end: int, track_no: int, diag: ParseDiagnostics, meta: dict
) -> list[_RawNote]:
    reader = _Reader(data, start, end)
    tick = 0
    status: Optional[int] = None
    open_notes: dict[tuple[int, int], int] = {}
    notes: list[_RawNote] = []
    where = f"track {track_no}"

    def close(channel: int, pitch: int, at: int) -> None:
        began = open_notes.pop((channel, pitch))
        if at > began:
            notes.append(_RawNote(began, at, pitch, channel))
        else:
            diag.warn(where, f"dropped zero-length note {pitch} at tick {at}")

    while reader.remaining() > 0:
        tick += reader.varlen()
        first = reader.peek()
        if first & 0x80:
            reader.byte()
            if first < 0xF0:
                status = first
        elif status is None:
            raise MalformedTrack(f"{where}: data byte without running status")
        else:
            first = status

        if first == 0xFF:
            kind = reader.byte()
            payload = reader.take(reader.varlen())
            if kind == 0x2F:
                break
            if kind == 0x59 and len(payload) >= 2 and "key" not in meta:
                meta["key"] = _key_from_meta(payload[0], payload[1])
            elif kind == 0x58 and len(payload) >= 1 and "beats_per_bar" not in meta:
                if payload[0] > 0:
                    meta["beats_per_bar"] = payload[0]
            continue
        if first in (0xF0, 0xF7):
            reader.take(reader.varlen())
            continue
        if first >= 0xF0:
            raise MalformedTrack(f"{where}: unsupported system message 0x{first:02X}")

        kind = first & 0xF0
        channel = first & 0x0F
        d1 = reader.byte()
        if kind in (0xC0, 0xD0):
            if d1 & 0x80:
                raise MalformedTrack(f"{where}: data byte out of range")
            continue
        d2 = reader.byte()
        if (d1 | d2) & 0x80:
            raise MalformedTrack(f"{where}: data byte out of range")
        if kind == 0x90 and d2 > 0:
            if (channel, d1) in open_notes:
                diag.warn(where, f"note {d1} re-struck at tick {tick}; closing previous")
                close(channel, d1, tick)
            open_notes[(channel, d1)] = tick
        elif kind in (0x80, 0x90):
            if (channel, d1) in open_notes:
                close(channel, d1, tick)
            else:
                diag.warn(where, f"note-off {d1} without note-on at tick {tick}")

    if open_notes:
        (channel, pitch), began = next(iter(open_notes.items()))
        raise DanglingNoteOn(f"{where}: note {pitch} on channel {channel} from tick {began} never released")
    return notes


def parse_smf(data: bytes, *, score_id: str = "") -> tuple[Score, ParseDiagnostics]:
    """Parse a format 0 or 1 Standard MIDI File into a two-voice score.

    Note-bearing tracks map to voices in track order. A format 0 file maps
    MIDI channels to voices in order of first use instead. Chord annotations
    never come from the MIDI data itself; see :func:`load_score`.
    """
    diag = ParseDiagnostics("smf")
    if len(data) < 14 or data[:4] != b"MThd":
        raise MalformedHeader("missing MThd header chunk")
    header_len = int.from_bytes(data[4:8], "big")
    if header_len < 6 or 8 + header_len > len(data):
        raise MalformedHeader(f"bad header length {header_len}")
    fmt = int.from_bytes(data[8:10], "big")
    ntracks = int.from_bytes(data[10:12], "big")
    division = int.from_bytes(data[12:14], "big")
    if fmt == 2:
        raise UnsupportedFormat("format 2 (independent sequences) is not supported")
    if fmt not in (0, 1):
        raise MalformedHeader(f"unknown format {fmt}")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise ZeroTimeDivision("time division is zero")

    meta: dict[str, Any] = {}
    tracks: list[list[_RawNote]] = []
    pos = 8 + header_len
    found = 0
    while pos + 8 <= len(data) and found < ntracks:
        chunk_type = data[pos : pos + 4]
        length = int.from_bytes(data[pos + 4 : pos + 8], "big")
        body = pos + 8
        if body + length > len(data):
            raise MalformedTrack(f"chunk at byte {pos} runs past end of file")
        if chunk_type == b"MTrk":
            tracks.append(_parse_track(data, body, body + length, found, diag, meta))
            found += 1
        pos = body + length
    if found < ntracks:
        diag.warn("header", f"header declares {ntracks} tracks, found {found}")

    if fmt == 0:
        channels: list[int] = []
        for n in sorted((n for t in tracks for n in t), key=lambda n: (n.start, n.pitch)):
            if n.channel not in channels:
                channels.append(n.channel)
        if len(channels) > 2:
            raise UnsupportedFormat(f"format 0 file uses {len(channels)} channels; at most 2 voices")
        voiced = [(channels.index(n.channel), n) for t in tracks for n in t]
    else:
        bearing = [t for t in tracks if t]
        if len(bearing) > 2:
            raise UnsupportedFormat(f"{len(bearing)} note-bearing tracks; at most 2 voices")
        voiced = [(v, n) for v, t in enumerate(bearing) for n in t]

    notes = [
        NoteEvent(
            onset=Fraction(n.start, division),
            duration=Fraction(n.end - n.start, division),
            pitch=n.pitch,
            voice=v,
        )
        for v, n in voiced
    ]
    if not notes:
        diag.warn("file", "no notes found")
    key = meta.get("key")
    if key is None:
        diag.warn("file", "no key signature; assuming C major")
        key = KeySignature(0, Mode.MAJOR)
    diag.warn("file", "MIDI carries no chord annotations")
    score = Score.build(notes, (), key=key, beats_per_bar=meta.get("beats_per_bar", 4), id=score_id)
    return score, diag


# ---------------------------------------------------------------------------
# .score.json interchange format
# ---------------------------------------------------------------------------


def parse_beats(value: Any, what: str = "value") -> Fraction:
    """Accept ints, ``"3/2"`` strings, or decimals whose exact denominator is <= 64."""
    if isinstance(value, bool):
        raise SchemaError(f"{what}: expected a number, got {value!r}")
    try:
        if isinstance(value, int):
            result = Fraction(value)
        elif isinstance(value, float):
            result = Fraction(repr(value))
        elif isinstance(value, str):
            result = Fraction(value.strip())
        else:
            raise SchemaError(f"{what}: expected a number, got {value!r}")
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"{what}: cannot parse {value!r}") from exc
    if result.denominator > MAX_DENOMINATOR:
        raise RangeError(f"{what}: {value!r} has denominator {result.denominator} > {MAX_DENOMINATOR}")
    return result


def format_beats(value: Fraction) -> Any:
    value = Fraction(value)
    if value.denominator == 1:
        return value.numerator
    return f"{value.numerator}/{value.denominator}"


def _field(obj: Any, name: str, where: str) -> Any:
    if not isinstance(obj, dict) or name not in obj:
        raise SchemaError(f"{where}: missing field {name!r}")
    return obj[name]


def _int_field(obj: Any, name: str, where: str) -> int:
    v = _field(obj, name, where)
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}.{name}: expected integer, got {v!r}")
    return v


def _enum(cls, value: Any, where: str):
    try:
        return cls(value)
    except ValueError as exc:
        raise SchemaError(f"{where}: unknown value {value!r}") from exc


def _parse_key(obj: Any, where: str) -> KeySignature:
    tonic = _int_field(obj, "tonic", where)
    if not 0 <= tonic <= 11:
        raise RangeError(f"{where}.tonic {tonic} outside 0..11")
    return KeySignature(tonic, _enum(Mode, _field(obj, "mode", where), f"{where}.mode"))


def _parse_chords(items: Any, where: str) -> tuple[ChordAnnotation, ...]:
    if not isinstance(items, list):
        raise SchemaError(f"{where}: expected a list")
    chords = []
    for i, c in enumerate(items):
        w = f"{where}[{i}]"
        root = _int_field(c, "root", w)
        if not 0 <= root <= 11:
            raise RangeError(f"{w}.root {root} outside 0..11")
        chords.append(
            ChordAnnotation(
                onset=parse_beats(_field(c, "onset", w), f"{w}.onset"),
                root=root,
                quality=_enum(Quality, _field(c, "quality", w), f"{w}.quality"),
            )
        )
    for prev, cur in zip(chords, chords[1:]):
        if cur.onset <= prev.onset:
            raise OrderError(f"{where}: chord onsets not strictly increasing ({prev.onset} then {cur.onset})")
    return tuple(chords)


def score_from_document(doc: Any) -> Score:
    if not isinstance(doc, dict):
        raise SchemaError("document must be an object")
    key = _parse_key(_field(doc, "key", "score"), "key")
    bpb = _int_field(doc, "beats_per_bar", "score")
    if bpb <= 0:
        raise RangeError(f"beats_per_bar must be positive, got {bpb}")
    raw_notes = _field(doc, "notes", "score")
    if not isinstance(raw_notes, list):
        raise SchemaError("notes: expected a list")
    notes = []
    for i, n in enumerate(raw_notes):
        w = f"notes[{i}]"
        pitch = _int_field(n, "pitch", w)
        if not 0 <= pitch <= 127:
            raise RangeError(f"{w}.pitch {pitch} outside 0..127")
        voice = _int_field(n, "voice", w)
        if voice not in (0, 1):
            raise RangeError(f"{w}.voice {voice} not in {{0, 1}}")
        onset = parse_beats(_field(n, "onset", w), f"{w}.onset")
        duration = parse_beats(_field(n, "duration", w), f"{w}.duration")
        if onset < 0:
            raise RangeError(f"{w}.onset is negative")
        if duration <= 0:
            raise RangeError(f"{w}.duration must be positive")
        notes.append(NoteEvent(onset, duration, pitch, voice))
    chords = _parse_chords(_field(doc, "chords", "score"), "chords")
    label = doc.get("label")
    label = None if label is None else _enum(Label, label, "label")
    score_id = doc.get("id", "")
    if not isinstance(score_id, str):
        raise SchemaError("id: expected a string")
    return Score.build(notes, chords, key=key, beats_per_bar=bpb, label=label, id=score_id)


def parse_score_text(text: str) -> tuple[Score, ParseDiagnostics]:
    diag = ParseDiagnostics("scoretext")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    score = score_from_document(doc)
    if not score.chords:
        diag.warn("chords", "no chord annotations")
    return score, diag


def score_to_document(score: Score) -> dict:
    doc = {
        "id": score.id,
        "key": {"tonic": score.key.tonic, "mode": score.key.mode.value},
        "beats_per_bar": score.beats_per_bar,
        "notes": [
            {"onset": format_beats(n.onset), "duration": format_beats(n.duration), "pitch": n.pitch, "voice": n.voice}
            for n in score.notes
        ],
        "chords": [
            {"onset": format_beats(c.onset), "root": c.root, "quality": c.quality.value} for c in score.chords
        ],
    }
    if score.label is not None:
        doc["label"] = score.label.value
    return doc


def serialize_score_text(score: Score) -> str:
    return json.dumps(score_to_document(score), separators=(",", ":"))


def parse_chord_sidecar(text: str) -> tuple[KeySignature, tuple[ChordAnnotation, ...]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"chord sidecar is not valid JSON: {exc}") from exc
    return _parse_key(_field(doc, "key", "sidecar"), "key"), _parse_chords(_field(doc, "chords", "sidecar"), "chords")


def sidecar_path(path: Path) -> Path:
    name = path.name
    for suffix in (".score.json", ".midi", ".mid"):
        if name.lower().endswith(suffix):
            name = name[: -len(suffix)]
            break
    return path.with_name(name + ".chords.json")


def load_score(path: str | Path) -> tuple[Score, ParseDiagnostics]:
    """Load a ``.mid``/``.midi`` or ``.score.json`` file.

    MIDI files pick up key and chords from a ``<name>.chords.json`` sidecar
    when one exists next to them.
    """
    path = Path(path)
    if path.name.lower().endswith((".mid", ".midi")):
        score, diag = parse_smf(path.read_bytes(), score_id=path.stem)
        side = sidecar_path(path)
        if side.exists():
            key, chords = parse_chord_sidecar(side.read_text(encoding="utf-8"))
            diag.warnings = [w for w in diag.warnings if "chord" not in w[1] and "key signature" not in w[1]]
            score = Score(score.notes, chords, key, score.beats_per_bar, score.label, score.id)
        return score, diag
    score, diag = parse_score_text(path.read_text(encoding="utf-8"))
    if not score.id:
        score = Score(score.notes, score.chords, score.key, score.beats_per_bar, score.label, path.name.split(".")[0])
    return score, diag


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


class Violation(NamedTuple):
    code: str
    detail: str


def validate_score(score: Score) -> list[Violation]:
    """Every broken :class:`Score` invariant, one entry per kind; empty means valid."""
    found: dict[str, str] = {}

    def flag(code: str, detail: str) -> None:
        found.setdefault(code, detail)

    if not score.notes:
        flag("EmptyScore", "score has no notes")
    for i, n in enumerate(score.notes):
        if not 0 <= n.pitch <= 127:
            flag("PitchOutOfRange", f"note {i} pitch {n.pitch}")
        if n.duration <= 0:
            flag("NonPositiveDuration", f"note {i} duration {n.duration}")
        if n.onset < 0:
            flag("NegativeOnset", f"note {i} onset {n.onset}")
        if n.voice not in (0, 1):
            flag("InvalidVoice", f"note {i} voice {n.voice}")
    keys = [(n.onset, n.pitch) for n in score.notes]
    if keys != sorted(keys):
        flag("NotesUnsorted", "notes not ordered by (onset, pitch)")
    for prev, cur in zip(score.chords, score.chords[1:]):
        if cur.onset <= prev.onset:
            flag("ChordsUnordered", f"chord at {cur.onset} follows {prev.onset}")
    for c in score.chords:
        if not 0 <= c.root <= 11:
            flag("InvalidChordRoot", f"root {c.root}")
    if not 0 <= score.key.tonic <= 11:
        flag("InvalidTonic", f"tonic {score.key.tonic}")
    if score.beats_per_bar <= 0:
        flag("InvalidBeatsPerBar", f"beats_per_bar {score.beats_per_bar}")
    return [Violation(code, detail) for code, detail in found.items()]
