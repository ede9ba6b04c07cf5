"""Feature pipeline and the trainable order/complexity quotient.

Eight basic features are min-max normalised, folded into four aesthetic
features (harmony, symmetry, entropy, K-complexity) by per-group logistic
regressions, and combined as

    measure = (w1*H + w2*S + t1) / (w3*E + w4*K + t2)

with ``sigmoid(measure)`` trained against composer (1) / ai (0) labels. The
denominator weights are kept positive through a softplus reparameterisation.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .complexity import COMPRESSION_LEVEL, COMPRESSOR_NAME, EntropyWeights, entropy_feature, kolmogorov_complexity
from .harmony import (
    IntervalWeights,
    NoChords,
    NoSonorities,
    TensionWeights,
    chord_progression_harmony,
    interval_harmony,
)
from .score import EmptyScore, Label, Score
from .symmetry import ScoreTooShort, self_similarity_fitness, skewness_feature

log = logging.getLogger(__name__)

FEATURE_NAMES = ("IH", "CPH", "SSF", "PS", "RS", "PHE", "RHE", "KC")
AESTHETIC_NAMES = ("H", "S", "E", "K")
GROUPS = {
    "H": ("IH", "CPH"),
    "S": ("SSF", "PS", "RS"),
    "E": ("PHE", "RHE"),
    "K": ("KC",),
}
_GROUP_INDEX = {g: [FEATURE_NAMES.index(f) for f in names] for g, names in GROUPS.items()}

EPSILON = 1e-3
MODEL_FORMAT = "birkhoff-aesthetic-model"
MODEL_VERSION = 1


class FeatureExtractionError(ValueError):
    pass


class EmptyTrainingSet(ValueError):
    pass


class SingleClassTraining(ValueError):
    pass


class NonFiniteLoss(FloatingPointError):
    def __init__(self, iteration: int):
        self.iteration = iteration
        super().__init__(f"loss became non-finite at iteration {iteration}")


class DenominatorUnderflow(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


# --- feature extraction -----------------------------------------------------------


@dataclass(frozen=True)
class FeatureConfig:
    interval: IntervalWeights = field(default_factory=IntervalWeights)
    tension: TensionWeights = field(default_factory=TensionWeights)
    entropy: EntropyWeights = field(default_factory=EntropyWeights)
    beta1: float = 1.0
    beta2: float = 1.0
    theta_sk: float = 0.0
    compression_level: int = COMPRESSION_LEVEL


@dataclass(frozen=True)
class FeatureVector8:
    IH: float
    CPH: float
    SSF: float
    PS: float
    RS: float
    PHE: float
    RHE: float
    KC: float
    degenerate: frozenset[str] = frozenset()

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES], dtype=float)

    def as_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in FEATURE_NAMES}


def extract_features(score: Score, config: FeatureConfig = FeatureConfig()) -> FeatureVector8:
    """All eight basic features. Degenerate inputs fall back to a fixed value and
    are listed in ``degenerate`` instead of failing."""
    if not score.notes:
        raise FeatureExtractionError(f"score {score.id!r}: no notes")
    flags = set()
    try:
        ih = interval_harmony(score, config.interval)
    except NoSonorities:
        ih = 0.0
        flags.add("IH")
    try:
        cph = chord_progression_harmony(score, config.tension)
    except NoChords:
        cph = 0.0
        flags.add("CPH")
    try:
        ssf = self_similarity_fitness(score)
    except ScoreTooShort:
        ssf = 0.0
        flags.add("SSF")
    sk = skewness_feature(score, config.beta1, config.beta2, config.theta_sk)
    if sk.ps_degenerate:
        flags.add("PS")
    if sk.rs_degenerate:
        flags.add("RS")
    try:
        ent = entropy_feature(score, config.entropy)
    except EmptyScore as exc:
        raise FeatureExtractionError(f"score {score.id!r}: {exc}") from exc
    kc = kolmogorov_complexity(score, config.compression_level)
    if kc.degenerate or kc.clamped:
        flags.add("KC")
    return FeatureVector8(ih, cph, ssf, sk.ps, sk.rs, ent.phe, ent.rhe, kc.feature, frozenset(flags))


def _extract_star(args):
    return extract_features(*args)


def extract_many(scores: Sequence[Score], config: FeatureConfig = FeatureConfig(), jobs: int = 1) -> list[FeatureVector8]:
    """Extract features for many scores; output order always follows input order."""
    if jobs <= 1 or len(scores) < 2:
        return [extract_features(s, config) for s in scores]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_extract_star, [(s, config) for s in scores], chunksize=4))


def feature_matrix(vectors: Iterable[FeatureVector8]) -> np.ndarray:
    rows = [v.as_array() for v in vectors]
    if not rows:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.vstack(rows)


# --- normalisation -----------------------------------------------------------------


@dataclass(frozen=True)
class Normalizer:
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    constant: tuple[bool, ...]

    def transform(self, x: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.mins)
        hi = np.asarray(self.maxs)
        return np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)


def fit_normalizer(train: Sequence[FeatureVector8] | np.ndarray) -> Normalizer:
    x = train if isinstance(train, np.ndarray) else feature_matrix(train)
    if x.shape[0] == 0:
        raise EmptyTrainingSet("cannot fit a normalizer on zero samples")
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    constant = hi <= lo
    hi = np.where(constant, lo + 1.0, hi)
    if constant.any():
        names = [f for f, c in zip(FEATURE_NAMES, constant) if c]
        log.warning("constant training features normalise to 0: %s", ", ".join(names))
    return Normalizer(tuple(map(float, lo)), tuple(map(float, hi)), tuple(map(bool, constant)))


# --- optimisation helpers ------------------------------------------------------------


def sigmoid(z):
    """Numerically stable logistic function (scalar or array)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y: float) -> float:
    return float(y + math.log(-math.expm1(-y)))


def bce_from_logits(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy of ``sigmoid(z)`` against 0/1 targets."""
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


LossGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def gradient_descent(
    loss_grad: LossGrad,
    start: np.ndarray,
    learning_rate: float,
    iterations: int,
    history: Optional[list[float]] = None,
    max_halvings: int = 30,
) -> np.ndarray:
    """Full-batch descent with a fixed rate.

    If a step would raise the loss, that iteration's step is halved until it
    no longer does (the rate itself is not changed for later iterations).
    """
    p = np.array(start, dtype=float)
    loss, grad = loss_grad(p)
    if not math.isfinite(loss):
        raise NonFiniteLoss(0)
    if history is not None:
        history.append(loss)
    for it in range(1, iterations + 1):
        step = learning_rate
        for _ in range(max_halvings + 1):
            cand = p - step * grad
            new_loss, new_grad = loss_grad(cand)
            if math.isfinite(new_loss) and new_loss <= loss:
                break
            step /= 2
        if not math.isfinite(new_loss):
            raise NonFiniteLoss(it)
        if new_loss > loss:
            cand, new_loss, new_grad = p, loss, grad
        p, loss, grad = cand, new_loss, new_grad
        if history is not None:
            history.append(loss)
    return p


# --- group logistic regressions ------------------------------------------------------


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple[float, ...]
    bias: float

    def logit(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ np.asarray(self.weights) + self.bias

    def predict_proba(self, x: np.ndarray):
        return sigmoid(self.logit(x))


def logistic_loss_grad(params: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Cross-entropy and its gradient; ``params`` is weights followed by the bias."""
    w, b = params[:-1], params[-1]
    z = x @ w + b
    r = (sigmoid(z) - y) / len(y)
    return bce_from_logits(z, y), np.append(x.T @ r, r.sum())


def train_logistic(
    x: np.ndarray, y: np.ndarray, learning_rate: float = 0.01, iterations: int = 1000
) -> LogisticModel:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    start = np.zeros(x.shape[1] + 1)
    p = gradient_descent(lambda q: logistic_loss_grad(q, x, y), start, learning_rate, iterations)
    return LogisticModel(tuple(map(float, p[:-1])), float(p[-1]))


def _check_labels(y: np.ndarray) -> None:
    if len(y) == 0:
        raise EmptyTrainingSet("no training samples")
    if len(np.unique(y)) < 2:
        raise SingleClassTraining("training data holds only one class")


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings. ``learning_rate``/``iterations`` drive the
    quotient model; the group regressions get their own, larger budget so they
    converge on [0, 1]-normalised features."""

    learning_rate: float = 0.01
    iterations: int = 1000
    group_learning_rate: float = 1.0
    group_iterations: int = 1000

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "group_learning_rate": self.group_learning_rate,
            "group_iterations": self.group_iterations,
        }


def train_group_lrs(xn: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig()) -> dict[str, LogisticModel]:
    """One logistic regression per aesthetic group, each on its own basic features."""
    xn = np.asarray(xn, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_labels(y)
    return {
        g: train_logistic(xn[:, idx], y, config.group_learning_rate, config.group_iterations)
        for g, idx in _GROUP_INDEX.items()
    }


class AestheticVector4(NamedTuple):
    H: float
    S: float
    E: float
    K: float


def aesthetic_matrix(xn: np.ndarray, lrs: dict[str, LogisticModel]) -> np.ndarray:
    xn = np.atleast_2d(np.asarray(xn, dtype=float))
    return np.column_stack([lrs[g].predict_proba(xn[:, _GROUP_INDEX[g]]) for g in AESTHETIC_NAMES])


def aesthetic_vector(xn: np.ndarray, lrs: dict[str, LogisticModel]) -> AestheticVector4:
    return AestheticVector4(*map(float, aesthetic_matrix(xn, lrs)[0]))


# --- the quotient model -------------------------------------------------------------


@dataclass(frozen=True)
class QuotientParams:
    """``omega``/``theta`` are the effective weights; ``rho`` holds the raw
    softplus parameters behind w3, w4 and t2."""

    omega: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    theta: tuple[float, float] = (0.0, 1.0)
    rho: tuple[float, float, float] = (inverse_softplus(1.0), inverse_softplus(1.0), inverse_softplus(1.0 - EPSILON))
    active: tuple[bool, bool, bool, bool] = (True, True, True, True)

    def denominator_floor(self) -> float:
        """Smallest denominator over E, K in [0, 1]."""
        return self.theta[1] + min(0.0, self.omega[2]) + min(0.0, self.omega[3])


# Raw parameter vector layout used by the optimiser.
_RAW = ("w1", "w2", "t1", "r3", "r4", "rt")


def _unpack(raw: np.ndarray, active: Sequence[bool]) -> tuple[float, float, float, float, float, float]:
    a = [1.0 if on else 0.0 for on in active]
    w1 = raw[0] * a[0]
    w2 = raw[1] * a[1]
    w3 = softplus(raw[3]) * a[2]
    w4 = softplus(raw[4]) * a[3]
    t2 = softplus(raw[5]) + EPSILON
    return w1, w2, raw[2], w3, w4, t2


def quotient_measure(raw: np.ndarray, a: np.ndarray, active: Sequence[bool] = (True,) * 4) -> np.ndarray:
    w1, w2, t1, w3, w4, t2 = _unpack(raw, active)
    h, s, e, k = a.T
    return (w1 * h + w2 * s + t1) / (w3 * e + w4 * k + t2)


def quotient_loss_grad(
    raw: np.ndarray, a: np.ndarray, y: np.ndarray, active: Sequence[bool] = (True,) * 4
) -> tuple[float, np.ndarray]:
    """Cross-entropy of sigmoid(measure) and its analytic gradient in the raw parameters."""
    w1, w2, t1, w3, w4, t2 = _unpack(raw, active)
    h, s, e, k = a.T
    den = w3 * e + w4 * k + t2
    m = (w1 * h + w2 * s + t1) / den
    r = (sigmoid(m) - y) / len(y)  # dLoss/dm per sample
    r_over_den = r / den
    rm = r_over_den * m
    mask = np.array([float(on) for on in active])
    grad = np.array(
        [
            np.sum(r_over_den * h) * mask[0],
            np.sum(r_over_den * s) * mask[1],
            np.sum(r_over_den),
            -np.sum(rm * e) * sigmoid(raw[3]) * mask[2],
            -np.sum(rm * k) * sigmoid(raw[4]) * mask[3],
            -np.sum(rm) * sigmoid(raw[5]),
        ]
    )
    return bce_from_logits(m, y), grad


def _initial_raw() -> np.ndarray:
    q = QuotientParams()
    return np.array([q.omega[0], q.omega[1], q.theta[0], *q.rho])


def _to_params(raw: np.ndarray, active: Sequence[bool]) -> QuotientParams:
    w1, w2, t1, w3, w4, t2 = (float(v) for v in _unpack(raw, active))
    return QuotientParams(
        omega=(w1, w2, w3, w4),
        theta=(t1, t2),
        rho=(float(raw[3]), float(raw[4]), float(raw[5])),
        active=tuple(bool(v) for v in active),
    )


def train_final(
    a: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    active: Sequence[bool] = (True, True, True, True),
    history: Optional[list[float]] = None,
) -> QuotientParams:
    """Fit the quotient weights by full-batch gradient descent on cross-entropy.

    ``active`` switches aesthetic terms off for ablation; a switched-off term
    has its weight pinned to zero and never receives gradient.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_labels(y)
    raw = gradient_descent(
        lambda p: quotient_loss_grad(p, a, y, active),
        _initial_raw(),
        config.learning_rate,
        config.iterations,
        history=history,
    )
    return _to_params(raw, active)


def birkhoff_measure(a: AestheticVector4 | Sequence[float], q: QuotientParams) -> float:
    h, s, e, k = a
    den = q.omega[2] * e + q.omega[3] * k + q.theta[1]
    if not den >= EPSILON * (1 - 1e-9):
        raise DenominatorUnderflow(f"denominator {den!r} below {EPSILON}")
    return (q.omega[0] * h + q.omega[1] * s + q.theta[0]) / den


_P_MIN = 2.0**-1074
_P_MAX = 1.0 - 2.0**-53


def measure_probability(measure: float) -> float:
    """sigmoid(measure), kept strictly inside (0, 1)."""
    return min(max(float(sigmoid(measure)), _P_MIN), _P_MAX)


# --- whole pipeline --------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    features: FeatureConfig
    normalizer: Normalizer
    group_models: dict[str, LogisticModel]
    quotient: QuotientParams
    training: TrainConfig = TrainConfig()

    def aesthetic(self, fv: FeatureVector8) -> AestheticVector4:
        return aesthetic_vector(self.normalizer.transform(fv.as_array()), self.group_models)


def labels_array(scores: Sequence[Score]) -> np.ndarray:
    y = []
    for s in scores:
        if s.label is None:
            raise ValueError(f"score {s.id!r} has no label")
        y.append(1.0 if s.label == Label.COMPOSER else 0.0)
    return np.array(y)


def fit_pipeline(
    vectors: Sequence[FeatureVector8],
    y: np.ndarray,
    features: FeatureConfig = FeatureConfig(),
    config: TrainConfig = TrainConfig(),
    active: Sequence[bool] = (True, True, True, True),
) -> ModelParams:
    """Normaliser, the four group regressions, then the quotient, all on one training set."""
    if len(vectors) == 0:
        raise EmptyTrainingSet("no training samples")
    x = feature_matrix(vectors)
    normalizer = fit_normalizer(x)
    xn = normalizer.transform(x)
    lrs = train_group_lrs(xn, y, config)
    a = aesthetic_matrix(xn, lrs)
    q = train_final(a, y, config, active)
    return ModelParams(features, normalizer, lrs, q, config)


class Prediction(NamedTuple):
    measure: float
    probability: float
    label: Label


def predict_features(fv: FeatureVector8, params: ModelParams) -> Prediction:
    m = birkhoff_measure(params.aesthetic(fv), params.quotient)
    p = measure_probability(m)
    return Prediction(m, p, Label.COMPOSER if p >= 0.5 else Label.AI)


def predict(score: Score, params: ModelParams) -> Prediction:
    return predict_features(extract_features(score, params.features), params)


def feature_record(score_id: str, label: Optional[Label], fv: FeatureVector8, params: Optional[ModelParams]) -> dict:
    """One line of the feature dump."""
    rec: dict = {"id": score_id, "label": None if label is None else label.value, "raw": fv.as_dict()}
    rec["degenerate"] = sorted(fv.degenerate)
    if params is not None:
        xn = params.normalizer.transform(fv.as_array())
        a = aesthetic_vector(xn, params.group_models)
        m = birkhoff_measure(a, params.quotient)
        rec["normalized"] = dict(zip(FEATURE_NAMES, map(float, xn)))
        rec["aesthetic"] = a._asdict()
        rec["measure"] = m
        rec["probability"] = measure_probability(m)
    return rec


# --- model file -------------------------------------------------------------------------


def params_to_document(p: ModelParams) -> dict:
    f = p.features
    q = p.quotient
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "tool_version": __version__,
        "feature_names": list(FEATURE_NAMES),
        "features": {
            "interval_weights": {"alpha": list(f.interval.alpha), "theta_ih": f.interval.theta_ih},
            "tension_weights": {"lambda": list(f.tension.lam)},
            "entropy_weights": asdict(f.entropy),
            "skewness_weights": {"beta1": f.beta1, "beta2": f.beta2, "theta_sk": f.theta_sk},
        },
        "compressor": {"name": COMPRESSOR_NAME, "level": f.compression_level},
        "normalizer": {"min": list(p.normalizer.mins), "max": list(p.normalizer.maxs), "constant": list(p.normalizer.constant)},
        "group_models": {
            g: {"features": list(GROUPS[g]), "weights": list(m.weights), "bias": m.bias} for g, m in p.group_models.items()
        },
        "quotient": {
            "omega": list(q.omega),
            "theta": list(q.theta),
            "rho": {"rho3": q.rho[0], "rho4": q.rho[1], "rho_theta": q.rho[2]},
            "epsilon": EPSILON,
            "active": dict(zip(AESTHETIC_NAMES, q.active)),
        },
        "training": p.training.as_dict(),
    }


def params_from_document(doc: dict) -> ModelParams:
    try:
        if doc.get("format") != MODEL_FORMAT:
            raise ModelFormatError(f"not a model file (format={doc.get('format')!r})")
        if doc.get("version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")
        fd = doc["features"]
        comp = doc["compressor"]
        if comp["name"] != COMPRESSOR_NAME:
            raise ModelFormatError(f"unknown compressor {comp['name']!r}")
        features = FeatureConfig(
            interval=IntervalWeights(tuple(fd["interval_weights"]["alpha"]), fd["interval_weights"]["theta_ih"]),
            tension=TensionWeights(tuple(fd["tension_weights"]["lambda"])),
            entropy=EntropyWeights(**fd["entropy_weights"]),
            beta1=fd["skewness_weights"]["beta1"],
            beta2=fd["skewness_weights"]["beta2"],
            theta_sk=fd["skewness_weights"]["theta_sk"],
            compression_level=int(comp["level"]),
        )
        nd = doc["normalizer"]
        normalizer = Normalizer(tuple(nd["min"]), tuple(nd["max"]), tuple(nd["constant"]))
        lrs = {g: LogisticModel(tuple(doc["group_models"][g]["weights"]), doc["group_models"][g]["bias"]) for g in AESTHETIC_NAMES}
        qd = doc["quotient"]
        q = QuotientParams(
            omega=tuple(qd["omega"]),
            theta=tuple(qd["theta"]),
            rho=(qd["rho"]["rho3"], qd["rho"]["rho4"], qd["rho"]["rho_theta"]),
            active=tuple(bool(qd["active"][g]) for g in AESTHETIC_NAMES),
        )
        training = TrainConfig(**doc["training"])
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"model file missing or malformed field: {exc}") from exc
    if len(q.omega) != 4 or len(q.theta) != 2:
        raise ModelFormatError("quotient needs 4 omega and 2 theta values")
    if not q.denominator_floor() >= EPSILON * (1 - 1e-9):
        raise DenominatorUnderflow(f"model denominator can fall to {q.denominator_floor()!r}")
    return ModelParams(features, normalizer, lrs, q, training)


def dumps_params(p: ModelParams) -> str:
    return json.dumps(params_to_document(p), indent=2) + "\n"


def save_params(p: ModelParams, path: str | Path) -> None:
    atomic_write_text(path, dumps_params(p))


def load_params(path: str | Path) -> ModelParams:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON") from exc
    return params_from_document(doc)
