"""``birkhoff-score`` command line: gen, extract, train, score, eval, ablate."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from ._io import atomic_write_text
from .corpus import GenConfig, generate_corpus, load_gen_config, read_dataset, split_dataset, write_dataset
from .evaluation import emit_report, evaluate, run_experiment
from .ingest import load_score
from .model import (
    FEATURE_NAMES,
    FeatureConfig,
    TrainConfig,
    extract_many,
    feature_record,
    fit_pipeline,
    labels_array,
    load_params,
    predict_features,
    save_params,
)
from .score import Score

LOG_ENV = "BIRKHOFF_SCORE_LOG"
DEFAULT_SEED = 42
DEFAULT_RATIO = 0.7

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("birkhoff_score")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this front end reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- run manifest ----------------------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: Optional[int]
    tool_version: str = __version__
    started_at: str = ""
    finished_at: str = ""
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    argv: list[str] = field(default_factory=list)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(m: RunManifest, path: Path) -> None:
    m.finished_at = _now()
    atomic_write_text(path, json.dumps(asdict(m), indent=2) + "\n")


def _manifest_path(args, out: Optional[Path], out_is_dir: bool) -> Path:
    if args.manifest:
        return Path(args.manifest)
    if out is None:
        return Path(f"{args.command}.manifest.json")
    if out_is_dir:
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


# --- shared helpers --------------------------------------------------------------------


def _load_inputs(paths: Sequence[str]) -> list[Score]:
    """Score files and line-delimited datasets, in the order given."""
    scores: list[Score] = []
    for p in paths:
        if p.endswith(".jsonl"):
            scores += read_dataset(p)
        else:
            score, diag = load_score(p)
            for where, msg in diag.warnings:
                log.info("%s: %s: %s", p, where, msg)
            scores.append(score)
    return scores


_TRAIN_KEYS = {"learning_rate", "iterations", "group_learning_rate", "group_iterations"}


def _train_settings(args) -> tuple[TrainConfig, float]:
    doc: dict = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError("training config must be an object")
        unknown = set(doc) - _TRAIN_KEYS - {"ratio"}
        if unknown:
            raise ValueError(f"unknown training config fields: {', '.join(sorted(unknown))}")
    cfg = TrainConfig(**{k: doc[k] for k in _TRAIN_KEYS if k in doc})
    ratio = float(args.ratio if args.ratio is not None else doc.get("ratio", DEFAULT_RATIO))
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    return cfg, ratio


def _table(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


# --- subcommands -----------------------------------------------------------------------


def cmd_gen(args) -> RunManifest:
    cfg = load_gen_config(args.config) if args.config else GenConfig()
    if args.seed is not None:
        cfg = GenConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    scores = generate_corpus(cfg)
    out = Path(args.out)
    write_dataset(scores, out)
    m = RunManifest("gen", config_hash(cfg.to_dict()), cfg.seed)
    m.inputs = [args.config] if args.config else []
    m.outputs = [str(out)]
    return m


def cmd_extract(args) -> RunManifest:
    scores = _load_inputs(args.inputs)
    params = load_params(args.model) if args.model else None
    features = params.features if params else FeatureConfig()
    vectors = extract_many(scores, features, args.jobs)
    records = [feature_record(s.id, s.label, fv, params) for s, fv in zip(scores, vectors)]
    if args.format == "csv":
        header = ["id", "label", *FEATURE_NAMES]
        if params:
            header += ["measure", "probability"]
        rows = []
        for r in records:
            row = [r["id"], r["label"] or "", *(repr(r["raw"][n]) for n in FEATURE_NAMES)]
            if params:
                row += [repr(r["measure"]), repr(r["probability"])]
            rows.append(row)
        text = _table(rows, header)
    else:
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    out = Path(args.out) if args.out else None
    _emit(text, out)
    m = RunManifest("extract", config_hash({"model": args.model, "format": args.format}), None)
    m.inputs = list(args.inputs) + ([args.model] if args.model else [])
    m.outputs = [str(out)] if out else ["<stdout>"]
    return m


def cmd_train(args) -> RunManifest:
    cfg, ratio = _train_settings(args)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    scores = read_dataset(args.dataset)
    train, _ = split_dataset(scores, ratio, seed)
    features = FeatureConfig()
    vectors = extract_many(train, features, args.jobs)
    params = fit_pipeline(vectors, labels_array(train), features, cfg)
    out = Path(args.out)
    save_params(params, out)
    m = RunManifest("train", config_hash({**cfg.as_dict(), "ratio": ratio}), seed)
    m.inputs = [args.dataset] + ([args.config] if args.config else [])
    m.outputs = [str(out)]
    return m


def cmd_score(args) -> RunManifest:
    params = load_params(args.model)
    scores = _load_inputs(args.inputs)
    vectors = extract_many(scores, params.features, args.jobs)
    rows = []
    for s, fv in zip(scores, vectors):
        pred = predict_features(fv, params)
        rows.append([s.id, f"{pred.measure:.6f}", f"{pred.probability:.6f}", pred.label.value])
    if args.format == "csv":
        text = _table(rows, ["id", "measure", "probability", "label"])
    else:
        text = "".join("\t".join(r) + "\n" for r in rows)
    out = Path(args.out) if args.out else None
    _emit(text, out)
    m = RunManifest("score", config_hash({"model": args.model}), None)
    m.inputs = [args.model, *args.inputs]
    m.outputs = [str(out)] if out else ["<stdout>"]
    return m


def cmd_eval(args) -> RunManifest:
    params = load_params(args.model)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    ratio = DEFAULT_RATIO if args.ratio is None else args.ratio
    scores = read_dataset(args.dataset)
    if args.split == "test":
        _, scores = split_dataset(scores, ratio, seed)
    vectors = extract_many(scores, params.features, args.jobs)
    report = evaluate(params, vectors, labels_array(scores))
    out = Path(args.out)
    written = emit_report(report, out)
    m = RunManifest("eval", config_hash({"model": args.model, "split": args.split, "ratio": ratio}), seed)
    m.inputs = [args.model, args.dataset]
    m.outputs = [str(p) for p in written]
    return m


def cmd_ablate(args) -> RunManifest:
    cfg, ratio = _train_settings(args)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    scores = read_dataset(args.dataset)
    exp = run_experiment(scores, seed=seed, ratio=ratio, config=cfg, jobs=args.jobs, ablate=True)
    out = Path(args.out)
    written = emit_report(exp.report, out)
    m = RunManifest("ablate", config_hash({**cfg.as_dict(), "ratio": ratio}), seed)
    m.inputs = [args.dataset] + ([args.config] if args.config else [])
    m.outputs = [str(p) for p in written]
    return m


# --- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="birkhoff-score", description="Score symbolic music with a trainable order/complexity measure.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, out_required: bool, out_help: str):
        sp.add_argument("--out", required=out_required, help=out_help)
        sp.add_argument("--manifest", help="run manifest path (default: derived from --out)")

    def jobs(sp):
        sp.add_argument("--jobs", type=int, default=1, help="parallel feature-extraction workers")

    def split(sp, with_config: bool):
        sp.add_argument("--seed", type=int, help=f"split seed (default {DEFAULT_SEED})")
        sp.add_argument("--ratio", type=float, help=f"training share of the split (default {DEFAULT_RATIO})")
        if with_config:
            sp.add_argument("--config", help="training config JSON (learning rates, iterations, ratio)")

    g = sub.add_parser("gen", help="generate the synthetic paired corpus")
    g.add_argument("--config", help="GenConfig JSON file")
    g.add_argument("--seed", type=int, help="override the config seed")
    common(g, out_required=True, out_help="dataset file (.jsonl)")

    e = sub.add_parser("extract", help="dump features for score files or datasets")
    e.add_argument("inputs", nargs="+")
    e.add_argument("--model", help="also emit normalised/aesthetic values and the measure")
    e.add_argument("--format", choices=("text", "csv"), default="text", help="text = one JSON record per line")
    common(e, out_required=False, out_help="output file (default stdout)")
    jobs(e)

    t = sub.add_parser("train", help="train a model on the training side of a dataset")
    t.add_argument("dataset")
    split(t, with_config=True)
    common(t, out_required=True, out_help="model file (.bam.json)")
    jobs(t)

    s = sub.add_parser("score", help="measure, probability and label for score files")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--model", required=True)
    s.add_argument("--format", choices=("text", "csv"), default="text")
    common(s, out_required=False, out_help="output file (default stdout)")
    jobs(s)

    v = sub.add_parser("eval", help="metrics, ROC and measure histogram for a model")
    v.add_argument("dataset")
    v.add_argument("--model", required=True)
    v.add_argument("--split", choices=("test", "all"), default="test", help="evaluate the test side or every score")
    split(v, with_config=False)
    common(v, out_required=True, out_help="report directory")
    jobs(v)

    a = sub.add_parser("ablate", help="retrain without each aesthetic feature and compare AUC")
    a.add_argument("dataset")
    split(a, with_config=True)
    common(a, out_required=True, out_help="report directory")
    jobs(a)
    return p


_COMMANDS = {
    "gen": (cmd_gen, False),
    "extract": (cmd_extract, False),
    "train": (cmd_train, False),
    "score": (cmd_score, False),
    "eval": (cmd_eval, True),
    "ablate": (cmd_ablate, True),
}


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            parser.error("--jobs must be at least 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    fn, out_is_dir = _COMMANDS[args.command]
    started = _now()
    try:
        manifest = fn(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"birkhoff-score {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    manifest.started_at = started
    manifest.argv = argv
    out = Path(args.out) if getattr(args, "out", None) else None
    _write_manifest(manifest, _manifest_path(args, out, out_is_dir))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
