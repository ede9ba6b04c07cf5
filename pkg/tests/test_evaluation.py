import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from birkhoff_score.evaluation import (
    ABLATION_KEYS,
    Counts,
    EvalReport,
    SingleClassEval,
    ablation_csv,
    ablation_mask,
    confusion_counts,
    emit_report,
    histogram_csv,
    mann_whitney_auc,
    measure_histogram,
    metrics_text,
    precision_recall_f1,
    prf_from_counts,
    roc_auc,
    roc_csv,
)
from birkhoff_score.score import Label


def test_prf_counts_example():
    r = prf_from_counts(Counts(tp=14, fp=1, tn=14, fn=1))
    assert r.precision == pytest.approx(14 / 15) and r.recall == pytest.approx(14 / 15)
    assert r.f1 == pytest.approx(14 / 15) and not r.undefined


def test_prf_from_pairs_with_labels():
    pairs = [(Label.COMPOSER, Label.COMPOSER)] * 3 + [(Label.AI, Label.COMPOSER), (Label.COMPOSER, Label.AI), (Label.AI, Label.AI)]
    assert confusion_counts(pairs) == Counts(3, 1, 1, 1)
    r = precision_recall_f1(pairs)
    assert (r.precision, r.recall, r.f1) == pytest.approx((0.75, 0.75, 0.75))


def test_prf_zero_division():
    r = prf_from_counts(Counts(tp=0, fp=0, tn=5, fn=5))
    assert r.precision == 0.0 and r.f1 == 0.0
    assert r.undefined == {"precision", "f1"}
    with pytest.raises(ValueError):
        precision_recall_f1([])


def test_reported_figures_are_consistent():
    # precision 0.933 and F1 0.909 imply recall ~ 0.886
    p, f1 = 0.933, 0.909
    r = f1 * p / (2 * p - f1)
    assert r == pytest.approx(0.886, abs=5e-4)
    assert 2 * p * r / (p + r) == pytest.approx(f1, abs=1e-12)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_counts_reproduce_scalars(tp, fp, tn, fn):
    pairs = [(1, 1)] * tp + [(0, 1)] * fp + [(0, 0)] * tn + [(1, 0)] * fn
    if not pairs:
        return
    c = confusion_counts(pairs)
    assert c == Counts(tp, fp, tn, fn)
    r = precision_recall_f1(pairs)
    if tp + fp:
        assert r.precision == tp / (tp + fp)
    if tp + fn:
        assert r.recall == tp / (tp + fn)


def test_auc_examples():
    _, perfect = roc_auc([(1, 0.9), (1, 0.8), (0, 0.2), (0, 0.1)])
    _, inverted = roc_auc([(1, 0.1), (1, 0.2), (0, 0.8), (0, 0.9)])
    _, tied = roc_auc([(1, 0.5), (0, 0.5)])
    assert (perfect, inverted, tied) == (1.0, 0.0, 0.5)
    with pytest.raises(SingleClassEval):
        roc_auc([(1, 0.3), (1, 0.4)])


def _instance(rng, n=50):
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    # coarse scores so ties between classes are common
    scores = np.round(rng.normal(labels * 0.7, 1.0), 1)
    return list(zip(labels.tolist(), scores.tolist()))


def test_auc_equals_mann_whitney():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        inst = _instance(rng)
        assert abs(roc_auc(inst)[1] - mann_whitney_auc(inst)) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_auc_invariant_under_monotone_transform(seed):
    inst = _instance(np.random.default_rng(seed), 30)
    moved = [(t, math.exp(3 * s) + 7) for t, s in inst]
    assert roc_auc(moved)[1] == roc_auc(inst)[1]


@given(st.integers(0, 2**32 - 1))
def test_roc_shape(seed):
    inst = _instance(np.random.default_rng(seed), 40)
    points, _ = roc_auc(inst)
    assert points[0][:2] == (0.0, 0.0) and points[-1][:2] == (1.0, 1.0)
    assert len(points) == len({s for _, s in inst}) + 2
    assert all(b.fpr >= a.fpr and b.tpr >= a.tpr for a, b in zip(points, points[1:]))


def _report(measures, ablation=None):
    points, auc = roc_auc([(t, m) for t, m in measures])
    return EvalReport(Counts(2, 1, 1, 0), 2 / 3, 1.0, 0.8, tuple(points), auc, ablation or {}, measures=tuple(measures))


def test_metrics_text_format():
    rep = _report([(True, 1.0), (True, 0.5), (False, 0.6), (False, -1.0)])
    text = metrics_text(rep)
    assert "auc=0.7500\n" in text and "precision=0.6667\n" in text and text.startswith("n=4\n")
    rep93 = EvalReport(Counts(1, 0, 1, 0), 1.0, 1.0, 1.0, (), 0.93)
    assert "auc=0.9300" in metrics_text(rep93)


def test_histogram_counts_sum():
    rng = np.random.default_rng(0)
    measures = [(bool(i % 2), float(v)) for i, v in enumerate(rng.normal(size=60))]
    edges, pos, neg = measure_histogram(measures)
    assert pos.sum() + neg.sum() == 60 and pos.sum() == 30 and len(edges) == 21
    rows = histogram_csv(_report(measures)).splitlines()
    assert rows[0] == "bin_lo,bin_hi,composer,ai" and len(rows) == 21


def test_histogram_constant_measures():
    edges, pos, neg = measure_histogram([(True, 2.0), (False, 2.0)])
    assert edges[0] == 1.5 and edges[-1] == 2.5 and pos.sum() == neg.sum() == 1


def test_ablation_keys_and_masks():
    assert ABLATION_KEYS == ("full", "H", "S", "E", "K")
    assert ablation_mask("full") == (True,) * 4
    assert ablation_mask("S") == (True, False, True, True)
    with pytest.raises(ValueError):
        ablation_mask("Q")


def test_emit_report_files(tmp_path):
    measures = [(True, 1.0), (False, 0.2), (True, 0.4), (False, 0.1)]
    aucs = {k: 0.5 + 0.1 * i for i, k in enumerate(ABLATION_KEYS)}
    written = emit_report(_report(measures, aucs), tmp_path)
    assert {p.name for p in written} == {"metrics.txt", "roc.csv", "measure_hist.csv", "ablation.csv"}
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    assert rows[0] == "removed,auc" and len(rows) == 6 and rows[1].startswith("none,")
    assert (tmp_path / "roc.csv").read_text().splitlines()[0] == "fpr,tpr,threshold"
    assert "auc_without_H=" in (tmp_path / "metrics.txt").read_text()
    assert ablation_csv(_report(measures, aucs)) == (tmp_path / "ablation.csv").read_text()
    assert roc_csv(_report(measures)) == (tmp_path / "roc.csv").read_text()


def test_no_ablation_file_without_ablation(tmp_path):
    written = emit_report(_report([(True, 1.0), (False, 0.0)]), tmp_path)
    assert "ablation.csv" not in {p.name for p in written}
