"""Training: batch cosine loss, Adam, N-model ensembles and k-fold CV."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .evaluator import official_metric
from .model import (ModelParameters, SentenceEncoder, SentenceRepresentation, Vocabulary,
                    forward, predict)
from .tensor_core import COSINE_EPS, Tape, Tensor, backward, concat, cosine_distance
from .text_pipeline import RawInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    n_models: int = 10
    batch_size: int = 32
    epochs: int = 20
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    base_seed: int = 0
    folds: int = 5
    early_stopping: bool = False
    validation_fraction: float = 0.1
    patience: int = 5
    # >1 trains ensemble members in separate processes
    workers: int = 1

    def __post_init__(self):
        if self.n_models < 1:
            raise ValidationError("n_models must be >= 1")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be >= 2 (cosine of a 1-vector is sign-only)")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.folds < 2:
            raise ValidationError("folds must be >= 2")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValidationError("validation_fraction must be in (0, 1)")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValidationError(f"unknown training settings: {sorted(unknown)}")
        return cls(**values)


def cosine_loss(predicted, target) -> float:
    """``1 - cos(predicted, target)``; 1.0 when the prediction norm is ~0."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ValidationError(f"cosine_loss: shapes {p.shape} and {t.shape}")
    nt = np.linalg.norm(t)
    if nt < COSINE_EPS:
        raise ValidationError("cosine_loss: all-zero target batch")
    npred = np.linalg.norm(p)
    if npred < COSINE_EPS:
        return 1.0
    cos = float(p @ t) / (npred * nt)
    return 1.0 - min(1.0, max(-1.0, cos))


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              config: TrainConfig, frozen_rows: Optional[dict[str, np.ndarray]] = None
              ) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new arrays and a new state.

    ``frozen_rows`` maps a parameter name to row indices whose gradient is
    forced to zero (the ``<pad>`` embedding row).  Parameters without a
    gradient entry are passed through untouched.
    """
    b1, b2, eps, lr = config.adam_beta1, config.adam_beta2, config.adam_epsilon, config.learning_rate
    t = state.step + 1
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    new_params, new_m, new_v = {}, dict(state.m), dict(state.v)
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            new_params[name] = value
            continue
        if frozen_rows and name in frozen_rows:
            g = g.copy()
            g[frozen_rows[name]] = 0.0
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * (g * g)
        new_m[name], new_v[name] = m, v
        new_params[name] = value - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return new_params, AdamState(t, new_m, new_v)


# ---------------------------------------------------------------- batching


def make_batches(order: Sequence[int], targets: np.ndarray, batch_size: int) -> list[list[int]]:
    """Consecutive batches; a ragged tail or an all-zero-target batch is merged."""
    batches = [list(order[i:i + batch_size]) for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) < batch_size:
        batches[-2].extend(batches.pop())
    merged: list[list[int]] = []
    carry: list[int] = []
    for b in batches:
        b = carry + b
        if np.linalg.norm(targets[b]) < COSINE_EPS:
            carry = b
            continue
        merged.append(b)
        carry = []
    if carry:
        if not merged:
            raise ValidationError("every target is zero; cosine loss is undefined")
        merged[-1].extend(carry)
    return merged


@dataclass
class TrainResult:
    params: ModelParameters
    loss_trace: list[float]
    degenerate_batches: int = 0


def _rngs(seed: int):
    # independent streams for shuffling and dropout; init uses [seed, 0|2]
    return np.random.default_rng([seed, 10]), np.random.default_rng([seed, 11])


def _batch_loss(batch: list[int], reps, targets, params, encoder_config, dropout_rng, tape):
    outs = [forward(reps[i], params, encoder_config, True, dropout_rng, tape) for i in batch]
    pred = concat(outs, tape)
    return cosine_distance(pred, Tensor(targets[batch]), tape), np.linalg.norm(pred.value)


def fit(reps: Sequence[SentenceRepresentation], targets: np.ndarray, params: ModelParameters,
        encoder: SentenceEncoder, config: TrainConfig, seed: int,
        on_epoch: Optional[Callable[[int, float], None]] = None,
        validation: Optional[tuple[Sequence[SentenceRepresentation], np.ndarray]] = None
        ) -> TrainResult:
    """Minimise the summed batch cosine distance with Adam."""
    targets = np.asarray(targets, dtype=np.float64)
    if len(reps) < 2:
        raise ValidationError("training needs at least 2 instances")
    model_config = encoder.config
    shuffle_rng, dropout_rng = _rngs(seed)
    frozen = {"embedding": np.array([params.vocabulary.pad_id])}
    state = AdamState()
    trace: list[float] = []
    degenerate = 0
    best = (-math.inf, params, 0)
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(reps))
        epoch_loss = 0.0
        for b_idx, batch in enumerate(make_batches(order, targets, config.batch_size)):
            tape = Tape()
            loss, pred_norm = _batch_loss(batch, reps, targets, params, model_config,
                                          dropout_rng, tape)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericalError("loss diverged", epoch=epoch, batch=b_idx)
            if pred_norm < COSINE_EPS:
                degenerate += 1
            epoch_loss += value
            grads = backward(tape, loss)
            named = {name: grads[t] for name, t in params.trainable().items() if t in grads}
            new_values, state = adam_step(params.values(), named, state, config, frozen)
            params = params.with_values(new_values)
        trace.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
        if validation is not None:
            val_reps, val_targets = validation
            score = official_metric([predict(r, params, model_config) for r in val_reps],
                                    val_targets)
            if score > best[0]:
                best = (score, params, epoch)
            elif epoch - best[2] >= config.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, best[2])
                break
    if validation is not None and best[1] is not None and math.isfinite(best[0]):
        params = best[1]
    return TrainResult(params, trace, degenerate)


def _split_validation(n: int, fraction: float, seed: int):
    rng = np.random.default_rng([seed, 12])
    order = rng.permutation(n)
    n_val = max(1, int(round(n * fraction)))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train_one(dataset: Sequence[RawInstance], config: TrainConfig, model_seed: int,
              encoder: SentenceEncoder, vocabulary: Optional[Vocabulary] = None,
              on_epoch: Optional[Callable[[int, float], None]] = None) -> TrainResult:
    """Train a single network on labeled instances."""
    if not dataset:
        raise ValidationError("empty training set")
    if any(inst.score is None for inst in dataset):
        raise ValidationError("training instances must be labeled")
    if vocabulary is None:
        vocabulary = encoder.vocabulary(dataset)
    params = encoder.init(model_seed, vocabulary)
    reps = [encoder.represent(inst, vocabulary) for inst in dataset]
    targets = np.array([inst.score for inst in dataset])
    validation = None
    if config.early_stopping:
        train_idx, val_idx = _split_validation(len(reps), config.validation_fraction, model_seed)
        validation = ([reps[i] for i in val_idx], targets[val_idx])
        reps = [reps[i] for i in train_idx]
        targets = targets[train_idx]
    return fit(reps, targets, params, encoder, config, model_seed, on_epoch, validation)


# ---------------------------------------------------------------- ensembles


@dataclass
class EnsemblePrediction:
    per_model: np.ndarray  # (N, n_test)

    @property
    def mean(self) -> np.ndarray:
        return ensemble_mean(self.per_model)


def ensemble_mean(per_model: np.ndarray) -> np.ndarray:
    per_model = np.asarray(per_model, dtype=np.float64)
    return per_model.sum(axis=0) / per_model.shape[0]


@dataclass
class EnsembleResult:
    members: list[ModelParameters]
    prediction: EnsemblePrediction
    loss_traces: list[list[float]]
    seeds: list[int]


def _train_member(args):
    dataset, config, seed, encoder, vocabulary = args
    return train_one(dataset, config, seed, encoder, vocabulary)


def train_ensemble(dataset: Sequence[RawInstance], test_set: Sequence[RawInstance],
                   config: TrainConfig, encoder: SentenceEncoder) -> EnsembleResult:
    """Train ``n_models`` networks with seeds ``base_seed + n`` and score ``test_set``.

    The vocabulary covers training and test tokens so test words keep their
    pretrained vectors; only training tokens receive gradient.
    """
    vocabulary = encoder.vocabulary([*dataset, *test_set])
    seeds = [config.base_seed + n for n in range(config.n_models)]
    jobs = [(dataset, config, s, encoder, vocabulary) for s in seeds]
    results = []
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_train_member, job) for job in jobs]
            for n, fut in enumerate(futures):
                results.append(_member_result(n, fut.result))
    else:
        for n, job in enumerate(jobs):
            results.append(_member_result(n, lambda job=job: _train_member(job)))

    test_reps = [encoder.represent(inst, vocabulary) for inst in test_set]
    per_model = np.array([[predict(r, res.params, encoder.config) for r in test_reps]
                          for res in results]).reshape(len(results), len(test_reps))
    return EnsembleResult([r.params for r in results], EnsemblePrediction(per_model),
                          [r.loss_trace for r in results], seeds)


def _member_result(n, get):
    try:
        return get()
    except NumericalError as exc:
        exc.diagnostics["model"] = n
        raise NumericalError(f"ensemble member {n}: {exc}", **exc.diagnostics) from exc


# ---------------------------------------------------------------- cross-validation


def fold_assignment(n_items: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded partition of ``range(n_items)`` into near-equal test folds."""
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    if folds > n_items:
        raise ValidationError(f"cannot make {folds} folds from {n_items} instances")
    order = np.random.default_rng([seed, 20]).permutation(n_items)
    return [np.sort(part) for part in np.array_split(order, folds)]


@dataclass
class CrossValidationResult:
    fold_scores: list[float]
    fold_sizes: list[int]
    loss_traces: list[list[list[float]]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_scores, ddof=1)) if len(self.fold_scores) > 1 else 0.0


def cross_validate(dataset: Sequence[RawInstance], config: TrainConfig,
                   encoder: SentenceEncoder) -> CrossValidationResult:
    """k-fold CV: train an ensemble on each complement, score the held-out fold."""
    dataset = list(dataset)
    parts = fold_assignment(len(dataset), config.folds, config.base_seed)
    scores, sizes, traces = [], [], []
    for k, test_idx in enumerate(parts):
        held = set(test_idx.tolist())
        train = [inst for i, inst in enumerate(dataset) if i not in held]
        test = [dataset[i] for i in test_idx]
        result = train_ensemble(train, test, config, encoder)
        gold = np.array([inst.score for inst in test])
        score = official_metric(result.prediction.mean, gold)
        logger.info("fold %d: %.4f", k, score)
        scores.append(score)
        sizes.append(len(test))
        traces.append(result.loss_traces)
    return CrossValidationResult(scores, sizes, traces)
