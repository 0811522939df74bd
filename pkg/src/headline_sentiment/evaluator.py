"""Evaluation metric and the three-configuration ablation harness."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

CONFIGURATIONS = ("Full", "NoEmbeddings", "NoPreprocessing")
LABELS = {"Full": "Full", "NoEmbeddings": "No embeddings", "NoPreprocessing": "No pre-processing"}

# Published scores of this architecture on the SemEval-2017 Task 5 (subtask 2)
# data, shown next to local results for comparison only.
REFERENCE_TEST = {"Full": 0.745, "NoEmbeddings": 0.660, "NoPreprocessing": 0.678}
REFERENCE_CV = {"Full": (0.701, 0.023), "NoEmbeddings": (0.586, 0.017),
                "NoPreprocessing": (0.648, 0.022)}

_EPS = 1e-12


def official_metric(predicted, gold) -> float:
    """Cosine similarity between the full prediction and gold vectors.

    A zero-norm prediction vector scores 0 (and is logged).
    """
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    g = np.asarray(gold, dtype=np.float64).reshape(-1)
    if p.shape != g.shape:
        raise ValidationError(f"length mismatch: {p.size} predictions vs {g.size} gold scores")
    if p.size == 0:
        raise ValidationError("metric needs at least one instance")
    ng = np.linalg.norm(g)
    if ng < _EPS:
        raise ValidationError("gold scores are all zero")
    np_ = np.linalg.norm(p)
    if np_ < _EPS:
        logger.warning("all predictions are zero; metric set to 0")
        return 0.0
    return float(min(1.0, max(-1.0, float(p @ g) / (np_ * ng))))


@dataclass
class EvaluationReport:
    configuration: str
    metric: float
    n_instances: int
    predictions: list[float] = field(default_factory=list)
    std: Optional[float] = None
    fold_scores: Optional[list[float]] = None

    def to_record(self) -> dict:
        rec = {"configuration": self.configuration, "metric": self.metric,
               "n_instances": self.n_instances}
        if self.std is not None:
            rec["std"] = self.std
            rec["fold_scores"] = self.fold_scores
        else:
            rec["predictions"] = self.predictions
        return rec


def format_table(reports: Sequence[EvaluationReport], cross_validated: bool = False) -> str:
    """Aligned text table with a column of published reference values."""
    if cross_validated:
        header = ("Algorithm", "mean±std", "reference")
        rows = [(LABELS.get(r.configuration, r.configuration),
                 f"{r.metric:.3f} ±{r.std:.3f}",
                 "%.3f ±%.3f" % REFERENCE_CV[r.configuration]
                 if r.configuration in REFERENCE_CV else "-") for r in reports]
    else:
        header = ("Algorithm", "Test scores", "reference")
        rows = [(LABELS.get(r.configuration, r.configuration), f"{r.metric:.3f}",
                 f"{REFERENCE_TEST[r.configuration]:.3f}"
                 if r.configuration in REFERENCE_TEST else "-") for r in reports]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), "  ".join("-" * w for w in widths)]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines) + "\n"


def ordering_note(reports: Sequence[EvaluationReport]) -> str:
    """States whether Full > No pre-processing > No embeddings held."""
    by = {r.configuration: r.metric for r in reports}
    if not all(c in by for c in CONFIGURATIONS):
        return ""
    ranked = sorted(by, key=lambda c: -by[c])
    observed = " > ".join(LABELS[c] for c in ranked)
    held = by["Full"] > by["NoPreprocessing"] > by["NoEmbeddings"]
    return (f"observed ordering: {observed} "
            f"({'matches' if held else 'differs from'} the published Full > No pre-processing > No embeddings)\n")


def records_jsonl(reports: Sequence[EvaluationReport]) -> str:
    return "".join(json.dumps(r.to_record(), sort_keys=True) + "\n" for r in reports)


def ablation_settings(name: str) -> dict:
    """Overrides that turn the full system into the named configuration."""
    if name == "Full":
        return {}
    if name == "NoEmbeddings":
        return {"use_embeddings": False}
    if name == "NoPreprocessing":
        return {"preprocessing": False}
    raise ValidationError(f"unknown configuration {name!r}")


def run_ablations(dataset, test_set, model_config, train_config, store, scorer,
                  preprocessing: bool = True) -> list[EvaluationReport]:
    """Train and score the three configurations with identical seeds and splits.

    With ``test_set`` given, each configuration is trained on ``dataset`` and
    scored on ``test_set``; otherwise each is cross-validated on ``dataset``.
    """
    from .model import SentenceEncoder
    from .trainer import cross_validate, train_ensemble

    reports = []
    for name in CONFIGURATIONS:
        settings = ablation_settings(name)
        mc = model_config.replace(**{k: v for k, v in settings.items() if k != "preprocessing"})
        encoder = SentenceEncoder(mc, store, scorer,
                                  preprocessing=settings.get("preprocessing", preprocessing))
        if test_set:
            result = train_ensemble(dataset, test_set, train_config, encoder)
            mean = result.prediction.mean
            gold = [inst.score for inst in test_set]
            reports.append(EvaluationReport(name, official_metric(mean, gold), len(test_set),
                                            [float(x) for x in mean]))
        else:
            cv = cross_validate(dataset, train_config, encoder)
            reports.append(EvaluationReport(name, cv.mean, len(dataset), std=cv.std,
                                            fold_scores=cv.fold_scores))
    return reports
