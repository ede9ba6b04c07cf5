"""Classification metrics, ROC/AUC, the four-way ablation and report files."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from ._io import atomic_write_text
from .corpus import split_dataset
from .model import (
    AESTHETIC_NAMES,
    FeatureConfig,
    FeatureVector8,
    ModelParams,
    TrainConfig,
    extract_many,
    fit_pipeline,
    labels_array,
    predict_features,
)
from .score import Label, Score

ABLATION_KEYS = ("full",) + AESTHETIC_NAMES
HIST_BINS = 20


class SingleClassEval(ValueError):
    pass


def _positive(label) -> bool:
    if isinstance(label, Label):
        return label == Label.COMPOSER
    return bool(label)


# --- precision / recall -------------------------------------------------------------------


@dataclass(frozen=True)
class Counts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    undefined: frozenset  # names of metrics that hit 0/0


def confusion_counts(pairs: Sequence[tuple]) -> Counts:
    """Counts over (true, predicted) pairs; composer is the positive class."""
    tp = fp = tn = fn = 0
    for truth, pred in pairs:
        t, p = _positive(truth), _positive(pred)
        if t and p:
            tp += 1
        elif p:
            fp += 1
        elif t:
            fn += 1
        else:
            tn += 1
    return Counts(tp, fp, tn, fn)


def prf_from_counts(c: Counts) -> PRF:
    undefined = set()

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            undefined.add(name)
            return 0.0
        return num / den

    p = ratio(c.tp, c.tp + c.fp, "precision")
    r = ratio(c.tp, c.tp + c.fn, "recall")
    if p + r == 0:
        undefined.add("f1")
        f1 = 0.0
    else:
        f1 = 2 * p * r / (p + r)
    return PRF(p, r, f1, frozenset(undefined))


def precision_recall_f1(pairs: Sequence[tuple]) -> PRF:
    if len(pairs) == 0:
        raise ValueError("no predictions")
    return prf_from_counts(confusion_counts(pairs))


# --- ROC ----------------------------------------------------------------------------------


class RocPoint(NamedTuple):
    fpr: float
    tpr: float
    threshold: float


def roc_auc(scored: Sequence[tuple]) -> tuple[list[RocPoint], float]:
    """ROC over every distinct score used as a ">= threshold" cut, plus the
    two end points; AUC by the trapezoid rule, computed in exact arithmetic.

    Ties between classes land on one diagonal step and so earn half credit,
    which makes the area equal to the Mann-Whitney statistic.
    """
    labels = np.array([_positive(t) for t, _ in scored], dtype=bool)
    scores = np.array([float(s) for _, s in scored], dtype=float)
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassEval("ROC needs both classes")
    thresholds = np.unique(scores)[::-1]
    points = [RocPoint(0.0, 0.0, math.inf)]
    area2 = 0  # twice the area, scaled by n_pos * n_neg
    tp = fp = 0
    for t in thresholds:
        at = scores == t
        dtp = int(np.count_nonzero(at & labels))
        dfp = int(np.count_nonzero(at & ~labels))
        area2 += dfp * (2 * tp + dtp)
        tp += dtp
        fp += dfp
        points.append(RocPoint(fp / n_neg, tp / n_pos, float(t)))
    points.append(RocPoint(1.0, 1.0, -math.inf))
    return points, float(Fraction(area2, 2 * n_pos * n_neg))


def mann_whitney_auc(scored: Sequence[tuple]) -> float:
    """Pairwise count of positive-over-negative wins, ties counted half. O(n^2)."""
    pos = [float(s) for t, s in scored if _positive(t)]
    neg = [float(s) for t, s in scored if not _positive(t)]
    if not pos or not neg:
        raise SingleClassEval("need both classes")
    wins = sum(2 if p > q else 1 if p == q else 0 for p in pos for q in neg)
    return wins / (2 * len(pos) * len(neg))


# --- evaluation and ablation -------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    counts: Counts
    precision: float
    recall: float
    f1: float
    roc_points: tuple[RocPoint, ...]
    auc: float
    ablation: dict[str, float] = field(default_factory=dict)
    undefined: frozenset = frozenset()
    # (is_composer, measure) for each test sample, used by the histogram table
    measures: tuple[tuple[bool, float], ...] = ()


def evaluate(params: ModelParams, vectors: Sequence[FeatureVector8], y: Sequence[float]) -> EvalReport:
    preds = [predict_features(fv, params) for fv in vectors]
    truth = [bool(v) for v in y]
    pairs = [(t, p.label == Label.COMPOSER) for t, p in zip(truth, preds)]
    counts = confusion_counts(pairs)
    prf = prf_from_counts(counts)
    points, auc = roc_auc([(t, p.probability) for t, p in zip(truth, preds)])
    return EvalReport(
        counts,
        prf.precision,
        prf.recall,
        prf.f1,
        tuple(points),
        auc,
        undefined=prf.undefined,
        measures=tuple((t, p.measure) for t, p in zip(truth, preds)),
    )


def ablation_mask(removed: str) -> tuple[bool, bool, bool, bool]:
    if removed == "full":
        return (True, True, True, True)
    if removed not in AESTHETIC_NAMES:
        raise ValueError(f"unknown aesthetic feature {removed!r}")
    return tuple(name != removed for name in AESTHETIC_NAMES)  # type: ignore[return-value]


def run_ablation(
    train: Sequence[FeatureVector8],
    y_train: np.ndarray,
    test: Sequence[FeatureVector8],
    y_test: np.ndarray,
    config: TrainConfig = TrainConfig(),
    features: FeatureConfig = FeatureConfig(),
) -> tuple[dict[str, float], ModelParams, EvalReport]:
    """Retrain with each aesthetic feature dropped from the quotient in turn.

    Returns the AUC map (``full`` plus one entry per removed feature), the
    full model, and the full model's report with the map attached.
    """
    aucs: dict[str, float] = {}
    full_params = None
    full_report = None
    for key in ABLATION_KEYS:
        params = fit_pipeline(train, y_train, features, config, ablation_mask(key))
        report = evaluate(params, test, y_test)
        aucs[key] = report.auc
        if key == "full":
            full_params, full_report = params, report
    assert full_params is not None and full_report is not None
    full_report = replace(full_report, ablation=dict(aucs))
    return aucs, full_params, full_report


@dataclass(frozen=True)
class Experiment:
    params: ModelParams
    report: EvalReport
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def run_experiment(
    scores: Sequence[Score],
    *,
    seed: int,
    ratio: float = 0.7,
    config: TrainConfig = TrainConfig(),
    features: FeatureConfig = FeatureConfig(),
    jobs: int = 1,
    ablate: bool = False,
) -> Experiment:
    """Split, extract, train on the training side and evaluate on the test side."""
    train, test = split_dataset(scores, ratio, seed)
    if not train or not test:
        raise ValueError(f"split ratio {ratio} leaves an empty side")
    vectors = extract_many([*train, *test], features, jobs)
    ftr, fte = vectors[: len(train)], vectors[len(train) :]
    ytr, yte = labels_array(train), labels_array(test)
    if ablate:
        _, params, report = run_ablation(ftr, ytr, fte, yte, config, features)
    else:
        params = fit_pipeline(ftr, ytr, features, config)
        report = evaluate(params, fte, yte)
    return Experiment(params, report, tuple(s.id for s in train), tuple(s.id for s in test))


# --- report files --------------------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def metrics_text(report: EvalReport) -> str:
    c = report.counts
    lines = [
        f"n={c.total}",
        f"tp={c.tp}",
        f"fp={c.fp}",
        f"tn={c.tn}",
        f"fn={c.fn}",
        f"precision={report.precision:.4f}",
        f"recall={report.recall:.4f}",
        f"f1={report.f1:.4f}",
        f"auc={report.auc:.4f}",
    ]
    if report.undefined:
        lines.append("undefined=" + ",".join(sorted(report.undefined)))
    for key, value in report.ablation.items():
        lines.append(f"auc_without_{key}={value:.4f}" if key != "full" else f"auc_full={value:.4f}")
    return "\n".join(lines) + "\n"


def roc_csv(report: EvalReport) -> str:
    rows = ["fpr,tpr,threshold"]
    rows += [f"{_num(p.fpr)},{_num(p.tpr)},{_num(p.threshold)}" for p in report.roc_points]
    return "\n".join(rows) + "\n"


def measure_histogram(measures: Sequence[tuple[bool, float]], bins: int = HIST_BINS):
    """Shared edges over the observed measure range; returns (edges, composer, ai)."""
    values = np.array([m for _, m in measures], dtype=float)
    is_pos = np.array([t for t, _ in measures], dtype=bool)
    if values.size == 0:
        raise ValueError("no measures to bin")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    pos, _ = np.histogram(values[is_pos], bins=edges)
    neg, _ = np.histogram(values[~is_pos], bins=edges)
    return edges, pos, neg


def histogram_csv(report: EvalReport) -> str:
    edges, pos, neg = measure_histogram(report.measures)
    rows = ["bin_lo,bin_hi,composer,ai"]
    for i in range(len(pos)):
        rows.append(f"{_num(edges[i])},{_num(edges[i + 1])},{int(pos[i])},{int(neg[i])}")
    return "\n".join(rows) + "\n"


def ablation_csv(report: EvalReport) -> str:
    rows = ["removed,auc"]
    rows += [f"{'none' if k == 'full' else k},{_num(v)}" for k, v in report.ablation.items()]
    return "\n".join(rows) + "\n"


def emit_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write metrics.txt, roc.csv, measure_hist.csv and (when present) ablation.csv."""
    out = Path(out_dir)
    files = {
        "metrics.txt": metrics_text(report),
        "roc.csv": roc_csv(report),
        "measure_hist.csv": histogram_csv(report),
    }
    if report.ablation:
        files["ablation.csv"] = ablation_csv(report)
    written = []
    for name, text in files.items():
        atomic_write_text(out / name, text)
        written.append(out / name)
    return written
