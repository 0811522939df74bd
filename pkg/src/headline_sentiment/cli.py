"""Command line interface: ``train``, ``predict``, ``evaluate``, ``cv`` and ``ablate``.

Exit codes: 0 success, 2 validation error, 3 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict, deque
from pathlib import Path

import numpy as np

from . import datasets
from .config import RunConfig, build_encoder, load_scorer, load_store
from .errors import HeadlineSentimentError, ValidationError
from .evaluator import (EvaluationReport, format_table, official_metric, ordering_note,
                        records_jsonl, run_ablations)
from .model import SentenceEncoder, predict
from .model_file import config_hash, load_model, save_model
from .text_pipeline import RawInstance
from .trainer import cross_validate, train_ensemble
from .vader_engine import RuleConfig

logger = logging.getLogger("headline_sentiment")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
MANIFEST = "manifest.json"
SNAPSHOT = "resolved_config.json"


def _add_common(p, data=True):
    p.add_argument("--config", help="JSON run configuration")
    if data:
        p.add_argument("--data", help="dataset file")
        p.add_argument("--format", choices=datasets.FORMATS, help="dataset format (default tsv)")
    p.add_argument("--embeddings", help="embedding file (token v1 ... vd)")
    p.add_argument("--affective", help="affective lexicon TSV")
    p.add_argument("--valence", help="valence lexicon TSV")


def _add_training(p):
    p.add_argument("--seed", type=int, help="base seed; model n uses seed + n")
    p.add_argument("--n-models", type=int, help="ensemble size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--no-embeddings", action="store_true", help="random token vectors")
    p.add_argument("--no-preprocessing", action="store_true", help="skip company/number masking")
    p.add_argument("--no-vader", action="store_true", help="drop the rule-based valence feature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="headline-sentiment",
                                     description="Sentiment scores for financial headlines.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an ensemble and write model files")
    _add_common(p)
    _add_training(p)
    p.add_argument("--models-dir", required=True)

    p = sub.add_parser("predict", help="score headlines with a trained ensemble")
    p.add_argument("--models-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=datasets.FORMATS, default="tsv")
    p.add_argument("--unlabeled", action="store_true", help="score column may be absent")
    p.add_argument("--embeddings")
    p.add_argument("--affective")
    p.add_argument("--valence")
    p.add_argument("--output", help="predictions TSV (default stdout)")

    p = sub.add_parser("evaluate", help="score a predictions file against gold labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True, help="gold dataset")
    p.add_argument("--format", choices=datasets.FORMATS, default="tsv")
    p.add_argument("--name", default="Full", help="configuration label for the report")
    p.add_argument("--output", help="write JSON-lines records here")

    for name, text in (("cv", "k-fold cross-validation"),
                       ("ablate", "Full / No embeddings / No pre-processing comparison")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        _add_training(p)
        p.add_argument("--folds", type=int)
        p.add_argument("--out", help="directory for reports and the resolved config")
        if name == "ablate":
            p.add_argument("--test", help="held-out test set; without it each row is cross-validated")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    paths, model, train = cfg.paths, cfg.model, cfg.train
    cwd = Path.cwd()
    for key in ("data", "embeddings", "affective", "valence", "test"):
        value = getattr(args, key, None)
        if value:
            setattr(paths, key, str((cwd / value).resolve()))
    if getattr(args, "format", None):
        paths.format = args.format
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["base_seed"] = args.seed
    if getattr(args, "n_models", None) is not None:
        overrides["n_models"] = args.n_models
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "folds", None) is not None:
        overrides["folds"] = args.folds
    if overrides:
        train = train.replace(**overrides)
    if getattr(args, "no_embeddings", False):
        model = model.replace(use_embeddings=False)
    if getattr(args, "no_vader", False):
        model = model.replace(use_vader=False)
    if getattr(args, "no_preprocessing", False):
        cfg.preprocessing = False
    cfg.model, cfg.train = model, train
    return cfg


def _digests(encoder: SentenceEncoder) -> dict:
    out = {}
    if encoder.store is not None:
        out.update(encoder.store.digests())
    if encoder.scorer is not None:
        out["valence"] = encoder.scorer.lexicon.digest
    return out


def _write_lines(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _trace_records(traces, fold=None):
    for model_idx, trace in enumerate(traces):
        for epoch, value in enumerate(trace):
            yield {"epoch": epoch, "fold": fold, "model": model_idx, "value": value}


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    cfg.validate()
    data = datasets.ingest(cfg.paths.data, cfg.paths.format)
    if not data.labeled:
        raise ValidationError("training data must be labeled")
    encoder = build_encoder(cfg)
    result = train_ensemble(data.instances, [], cfg.train, encoder)

    out = Path(args.models_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / SNAPSHOT)
    digests = _digests(encoder)
    extra = {"rules": cfg.rules.to_dict(), "preprocessing": cfg.preprocessing}
    names = []
    for n, (params, seed) in enumerate(zip(result.members, result.seeds)):
        name = f"model_{n:02d}.hsm"
        save_model(out / name, params, cfg.model, seed, digests, extra)
        names.append(name)
    manifest = {
        "models": names,
        "seeds": result.seeds,
        "config_hash": config_hash({"model_config": cfg.model.to_dict(), **extra}),
        "lexicon_digests": digests,
        "resolved_config": SNAPSHOT,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    _write_lines(out / "loss_trace.jsonl", _trace_records(result.loss_traces))
    for n, trace in enumerate(result.loss_traces):
        final = f"{trace[-1]:.6f}" if trace else "n/a"
        print(f"model {n}: seed {result.seeds[n]}, final epoch loss {final}")
    print(f"wrote {len(names)} models to {out}")
    return EXIT_OK


def predict_ensemble(models_dir, instances, paths_override=None) -> np.ndarray:
    """Ensemble-mean predictions of the models in ``models_dir``."""
    models_dir = Path(models_dir)
    try:
        manifest = json.loads((models_dir / MANIFEST).read_text(encoding="utf-8"))
    except OSError:
        raise ValidationError(f"no {MANIFEST} in {models_dir}") from None
    cfg = RunConfig.load(models_dir / manifest.get("resolved_config", SNAPSHOT))
    for key, value in (paths_override or {}).items():
        if value:
            setattr(cfg.paths, key, value)
    saved = [load_model(models_dir / name) for name in manifest["models"]]
    if not saved:
        raise ValidationError("manifest lists no models")
    hashes = {s.config_hash for s in saved}
    if len(hashes) != 1 or manifest["config_hash"] not in hashes:
        raise ValidationError("model files do not share one config hash")

    first = saved[0]
    extra = first.header["extra"]
    cfg.model = first.model_config
    cfg.preprocessing = extra.get("preprocessing", True)
    cfg.rules = RuleConfig.from_dict(extra["rules"])
    store = load_store(cfg.paths)
    scorer = load_scorer(cfg.paths, cfg.rules) if cfg.model.use_vader else None
    encoder = SentenceEncoder(cfg.model, store, scorer, cfg.preprocessing)
    current = _digests(encoder)
    for key, digest in first.lexicon_digests.items():
        if digest and current.get(key) != digest:
            raise ValidationError(f"{key} lexicon differs from the one the models were trained with")

    tokens = [encoder.tokens(inst) for inst in instances]
    per_model = []
    for s in saved:
        params = s.params.extend_vocabulary((t for seq in tokens for t in seq), store,
                                            cfg.model, s.seed)
        reps = [encoder.represent(inst, params.vocabulary) for inst in instances]
        per_model.append([predict(r, params, cfg.model) for r in reps])
    per_model = np.array(per_model)
    return per_model.sum(axis=0) / per_model.shape[0]


def cmd_predict(args) -> int:
    data = datasets.ingest(args.data, args.format, unlabeled=args.unlabeled)
    cwd = Path.cwd()
    override = {k: str((cwd / getattr(args, k)).resolve()) if getattr(args, k) else None
                for k in ("embeddings", "affective", "valence")}
    preds = predict_ensemble(args.models_dir, data.instances, override)
    lines = "".join(f"{inst.headline}\t{inst.company}\t{datasets.format_score(p)}\n"
                    for inst, p in zip(data.instances, preds))
    if args.output:
        Path(args.output).write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)
    return EXIT_OK


def read_predictions(path) -> list[RawInstance]:
    return datasets.ingest(path, "tsv").instances


def align(predictions: list[RawInstance], gold: list[RawInstance]):
    """Pair predictions with gold rows by (headline, company)."""
    pool = defaultdict(deque)
    for p in predictions:
        pool[p.key].append(p.score)
    pairs, missing = [], []
    for g in gold:
        if pool[g.key]:
            pairs.append((pool[g.key].popleft(), g.score))
        else:
            missing.append(g.key)
    extra = [k for k, q in pool.items() for _ in q]
    if missing or extra:
        keys = [f"gold only: {k}" for k in missing] + [f"prediction only: {k}" for k in extra]
        raise ValidationError("unmatched instances:\n  " + "\n  ".join(map(str, keys)))
    return pairs


def cmd_evaluate(args) -> int:
    gold = datasets.ingest(args.data, args.format)
    preds = read_predictions(args.predictions)
    pairs = align(preds, gold.instances)
    p = [a for a, _ in pairs]
    report = EvaluationReport(args.name, official_metric(p, [b for _, b in pairs]), len(pairs), p)
    sys.stdout.write(format_table([report]))
    if args.output:
        Path(args.output).write_text(records_jsonl([report]), encoding="utf-8")
    return EXIT_OK


def _prepare(args):
    cfg = resolve_config(args)
    cfg.validate()
    data = datasets.ingest(cfg.paths.data, cfg.paths.format)
    if not data.labeled:
        raise ValidationError("cross-validation data must be labeled")
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cfg.write(out / SNAPSHOT)
    return cfg, data, out


def cmd_cv(args) -> int:
    cfg, data, out = _prepare(args)
    encoder = build_encoder(cfg)
    cv = cross_validate(data.instances, cfg.train, encoder)
    name = "Full"
    if not cfg.model.use_embeddings:
        name = "NoEmbeddings"
    elif not cfg.preprocessing:
        name = "NoPreprocessing"
    report = EvaluationReport(name, cv.mean, len(data), std=cv.std, fold_scores=cv.fold_scores)
    table = format_table([report], cross_validated=True)
    folds = "".join(f"fold {k}: n={n} metric={s:.6f}\n"
                    for k, (n, s) in enumerate(zip(cv.fold_sizes, cv.fold_scores)))
    text = table + folds
    sys.stdout.write(text)
    if out is not None:
        (out / "cv_report.txt").write_text(text, encoding="utf-8")
        _write_lines(out / "cv_records.jsonl",
                     [{"epoch": None, "fold": k, "model": None, "value": s}
                      for k, s in enumerate(cv.fold_scores)])
        _write_lines(out / "loss_trace.jsonl",
                     (rec for k, tr in enumerate(cv.loss_traces) for rec in _trace_records(tr, k)))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg, data, out = _prepare(args)
    test = datasets.ingest(cfg.paths.test, cfg.paths.format).instances if cfg.paths.test else []
    store = load_store(cfg.paths)
    if store is None:
        raise ValidationError("ablation needs the embedding lexicon for the Full configuration")
    scorer = load_scorer(cfg.paths, cfg.rules) if cfg.model.use_vader else None
    model = cfg.model.replace(use_embeddings=True)
    reports = run_ablations(data.instances, test, model, cfg.train, store, scorer,
                            cfg.preprocessing)
    text = format_table(reports, cross_validated=not test) + ordering_note(reports)
    sys.stdout.write(text)
    if out is not None:
        (out / "ablation_report.txt").write_text(text, encoding="utf-8")
        (out / "ablation_records.jsonl").write_text(records_jsonl(reports), encoding="utf-8")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "cv": cmd_cv, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except HeadlineSentimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ArithmeticError, RuntimeError, MemoryError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
