import numpy as np
import pytest

from birkhoff_score.corpus import (
    GenConfig,
    gen_ai_like,
    gen_composer_like,
    generate_corpus,
    pair_key,
    parse_numeral,
    read_dataset,
    split_dataset,
    write_dataset,
)
from birkhoff_score.ingest import SchemaError
from birkhoff_score.score import KeySignature, Label, Mode, Quality

CFG = GenConfig(seed=42, n_pairs=100)


def _pairs(corpus):
    by_key = {}
    for s in corpus:
        by_key.setdefault(pair_key(s), {})[s.label] = s
    return [(d[Label.COMPOSER], d[Label.AI]) for d in by_key.values()]


def test_generation_is_deterministic():
    for i in (0, 17, 99):
        assert gen_composer_like(CFG, i) == gen_composer_like(CFG, i)
        assert gen_ai_like(CFG, i) == gen_ai_like(CFG, i)
    assert gen_composer_like(CFG, 3) != gen_composer_like(GenConfig(seed=43), 3)


def test_class_balance_and_pairing(corpus42):
    labels = [s.label for s in corpus42]
    assert labels.count(Label.COMPOSER) == labels.count(Label.AI) == 100
    pairs = _pairs(corpus42)
    assert len(pairs) == 100
    for comp, ai in pairs:
        assert comp.chords == ai.chords and comp.key == ai.key
        bars = lambda s: -(-s.total_duration // s.beats_per_bar)  # noqa: E731
        assert bars(comp) == bars(ai) == CFG.bars


def test_composer_melody_in_scale_or_chord_tones(corpus42):
    for s in corpus42:
        if s.label != Label.COMPOSER:
            continue
        scale = set(s.key.scale())
        onsets = [c.onset for c in s.chords]
        for n in s.voice(0):
            idx = int(np.searchsorted(onsets, n.onset, side="right")) - 1
            tones = s.chords[idx].pitch_classes()
            assert n.pitch % 12 in scale | set(tones), (s.id, n)


def test_composer_more_self_similar(corpus42, features42):
    feats = {s.id: fv for s, fv in zip(corpus42, features42)}
    pairs = _pairs(corpus42)
    wins = sum(feats[c.id].SSF > feats[a.id].SSF for c, a in pairs)
    print(f"composer SSF above paired AI SSF in {wins}/{len(pairs)} pairs")
    assert wins >= 90


def test_ai_rhythm_more_skewed(corpus42, features42):
    rs = {lab: np.mean([fv.RS for s, fv in zip(corpus42, features42) if s.label == lab]) for lab in Label}
    assert rs[Label.AI] > rs[Label.COMPOSER]


def test_split_sizes_and_pairs(corpus42):
    train, test = split_dataset(corpus42, 0.7, seed=42)
    assert len(train) == 140 and len(test) == 60
    assert sum(s.label == Label.COMPOSER for s in train) == 70
    assert {pair_key(s) for s in train}.isdisjoint({pair_key(s) for s in test})
    again = split_dataset(corpus42, 0.7, seed=42)
    assert [s.id for s in again[0]] == [s.id for s in train]
    other = split_dataset(corpus42, 0.7, seed=7)
    assert [s.id for s in other[0]] != [s.id for s in train]


def test_dataset_round_trip(tmp_path, corpus42):
    path = tmp_path / "corpus.jsonl"
    write_dataset(corpus42, path)
    assert read_dataset(path) == corpus42


def test_dataset_bad_line(tmp_path, corpus42):
    path = tmp_path / "bad.jsonl"
    write_dataset(corpus42[:6], path)
    lines = path.read_text().splitlines()
    lines[4] = lines[4][:20]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError) as info:
        read_dataset(path)
    assert info.value.line == 5


def test_empty_dataset(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    assert read_dataset(tmp_path / "empty.jsonl") == []


def test_generate_corpus_is_pure():
    small = GenConfig(seed=5, n_pairs=4)
    assert generate_corpus(small) == generate_corpus(small)
    assert GenConfig.from_dict(small.to_dict()) == small


@pytest.mark.parametrize(
    "numeral,key,expected",
    [
        ("I", KeySignature(0, Mode.MAJOR), (0, Quality.MAJOR)),
        ("V7", KeySignature(0, Mode.MAJOR), (7, Quality.DOMINANT7)),
        ("ii", KeySignature(2, Mode.MAJOR), (4, Quality.MINOR)),
    ],
)
def test_parse_numeral(numeral, key, expected):
    assert parse_numeral(numeral, key) == expected
