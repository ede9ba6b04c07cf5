"""Order-side symmetry features: self-similarity fitness and pitch/rhythm skewness.

Fitness works on a beat-level chroma sequence built straight from the notes.
Repetitions are found as diagonal paths through the self-similarity matrix;
score MIDI has no tempo drift, so no warping steps are needed.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .score import EmptyScore, Score

MATCH_THRESHOLD = 0.85
MAX_SEGMENTS = 2000
MIN_FRAMES = 4


class ScoreTooShort(ValueError):
    pass


class SegmentTooShort(ValueError):
    pass


@dataclass(frozen=True)
class ChromaSequence:
    frames: np.ndarray  # shape (n, 12)
    frame_length: Fraction = Fraction(1)

    def __len__(self) -> int:
        return self.frames.shape[0]


def chroma_sequence(score: Score) -> ChromaSequence:
    """Duration-weighted pitch-class energy per one-beat frame, unit-normalised."""
    if not score.notes:
        raise EmptyScore(f"score {score.id!r} has no notes")
    n = math.ceil(score.total_duration)
    frames = np.zeros((n, 12))
    for note in score.notes:
        first = math.floor(note.onset)
        last = math.ceil(note.end)
        for t in range(first, last):
            overlap = min(note.end, t + 1) - max(note.onset, t)
            if overlap > 0:
                frames[t, note.pitch % 12] += float(overlap)
    norms = np.linalg.norm(frames, axis=1)
    nonzero = norms > 0
    frames[nonzero] /= norms[nonzero, None]
    return ChromaSequence(frames)


def build_ssm(chroma: ChromaSequence) -> np.ndarray:
    """Cosine self-similarity of all frame pairs; rest frames score 1 only with themselves."""
    f = chroma.frames
    if f.shape[0] < 1:
        raise ValueError("chroma sequence is empty")
    raw = f @ f.T
    upper = np.triu(raw)
    ssm = upper + np.triu(raw, 1).T  # mirror so symmetry is exact
    np.clip(ssm, -1.0, 1.0, out=ssm)
    np.fill_diagonal(ssm, 1.0)
    return ssm


def diagonal_cumsum(ssm: np.ndarray) -> np.ndarray:
    """``C[i, j]`` = sum of ``ssm[i-k-1, j-k-1]`` for k >= 0, i.e. prefix sums along diagonals."""
    n = ssm.shape[0]
    c = np.zeros((n + 1, n + 1))
    for i in range(n):
        c[i + 1, 1:] = c[i, :-1] + ssm[i]
    return c


class Segment(NamedTuple):
    start: int
    end: int


def _best_family(starts: Sequence[int], sums: Sequence[float], length: int) -> tuple[float, int]:
    """Heaviest set of non-overlapping equal-length paths; returns (total, count)."""
    best_total: list[float] = []
    best_count: list[int] = []
    prefix_total: list[float] = []
    prefix_count: list[int] = []
    for i, (s, w) in enumerate(zip(starts, sums)):
        j = bisect.bisect_right(starts, s - length, 0, i) - 1
        tot = w + (prefix_total[j] if j >= 0 else 0.0)
        cnt = 1 + (prefix_count[j] if j >= 0 else 0)
        best_total.append(tot)
        best_count.append(cnt)
        if i and prefix_total[i - 1] >= tot:
            prefix_total.append(prefix_total[i - 1])
            prefix_count.append(prefix_count[i - 1])
        else:
            prefix_total.append(tot)
            prefix_count.append(cnt)
    if not prefix_total:
        return 0.0, 0
    return prefix_total[-1], prefix_count[-1]


def _fitness_from_path_sums(path_sums: np.ndarray, seg: Segment, n: int) -> tuple[float, float]:
    length = seg.end - seg.start
    ok = path_sums >= MATCH_THRESHOLD * length
    left = [s for s in np.flatnonzero(ok[: max(seg.start - length + 1, 0)])]
    right = [s for s in np.flatnonzero(ok) if s >= seg.end]
    lt, lc = _best_family(left, [path_sums[s] for s in left], length)
    rt, rc = _best_family(right, [path_sums[s] for s in right], length)
    k = lc + rc
    if k == 0:
        return 0.0, 0.0
    # the trivial self-match adds `length` to both the score and the path length
    sigma = (lt + rt) / (length * (k + 1))
    gamma = k * length / n
    return sigma, gamma


def segment_fitness(ssm: np.ndarray, seg: Segment, *, cumsum: np.ndarray | None = None) -> tuple[float, float]:
    """(sigma_bar, gamma_bar) for one segment.

    sigma_bar is the similarity collected by the segment's repetitions with the
    trivial self-match removed, over the total length of all paths in the
    family. gamma_bar is the share of frames the repetitions cover.
    """
    n = ssm.shape[0]
    seg = Segment(*seg)
    length = seg.end - seg.start
    if not 0 <= seg.start < seg.end <= n:
        raise ValueError(f"segment {seg} outside 0..{n}")
    if length < 2:
        raise SegmentTooShort(f"segment {seg} shorter than 2 frames")
    c = diagonal_cumsum(ssm) if cumsum is None else cumsum
    starts = np.arange(n - length + 1)
    sums = c[seg.end, starts + length] - c[seg.start, starts]
    return _fitness_from_path_sums(sums, seg, n)


def harmonic_fitness(sigma: float, gamma: float) -> float:
    if sigma + gamma == 0:
        return 0.0
    return 2 * sigma * gamma / (sigma + gamma)


def segment_stride(n: int, cap: int = MAX_SEGMENTS) -> int:
    """Smallest stride over starts and lengths keeping the candidate count under ``cap``."""
    k = 1
    while sum(len(range(0, n - L + 1, k)) for L in range(2, n // 2 + 1, k)) > cap:
        k += 1
    return k


def candidate_segments(n: int, cap: int = MAX_SEGMENTS) -> list[Segment]:
    k = segment_stride(n, cap)
    return [Segment(s, s + L) for L in range(2, n // 2 + 1, k) for s in range(0, n - L + 1, k)]


def ssm_fitness(ssm: np.ndarray) -> float:
    n = ssm.shape[0]
    if n < MIN_FRAMES:
        raise ScoreTooShort(f"{n} frames; need at least {MIN_FRAMES}")
    c = diagonal_cumsum(ssm)
    best = 0.0
    by_length: dict[int, list[int]] = {}
    for seg in candidate_segments(n):
        by_length.setdefault(seg.end - seg.start, []).append(seg.start)
    for length, seg_starts in by_length.items():
        m = n - length + 1
        # path_sums[a, s]: similarity summed along the diagonal from (a, s)
        path_sums = c[length : length + m, length : length + m] - c[:m, :m]
        for a in seg_starts:
            sigma, gamma = _fitness_from_path_sums(path_sums[a], Segment(a, a + length), n)
            best = max(best, harmonic_fitness(sigma, gamma))
    return best


def self_similarity_fitness(score: Score) -> float:
    """Best harmonic mean of repetition score and coverage over candidate segments."""
    return ssm_fitness(build_ssm(chroma_sequence(score)))


# --- skewness -------------------------------------------------------------------


def sample_skewness(values: Sequence[float]) -> tuple[float, bool]:
    """Biased sample skewness m3 / m2**1.5; returns (value, degenerate)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        return 0.0, True
    d = x - x.mean()
    m2 = np.mean(d * d)
    m3 = np.mean(d * d * d)
    return float(m3 / m2**1.5), False


class SkewnessResult(NamedTuple):
    ps: float
    rs: float
    combined: float
    ps_degenerate: bool
    rs_degenerate: bool


def skewness_feature(score: Score, beta1: float = 1.0, beta2: float = 1.0, theta_sk: float = 0.0) -> SkewnessResult:
    if not score.notes:
        raise EmptyScore(f"score {score.id!r} has no notes")
    ps, ps_flag = sample_skewness([n.pitch for n in score.notes])
    rs, rs_flag = sample_skewness([float(n.duration) for n in score.notes])
    ps, rs = abs(ps), abs(rs)
    return SkewnessResult(ps, rs, beta1 * ps + beta2 * rs + theta_sk, ps_flag, rs_flag)
