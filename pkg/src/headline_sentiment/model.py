"""The sentence network: token vectors -> multi-width convolutions -> score.

For each filter width the token matrix goes through a valid convolution,
ReLU and a global max-pool.  The pooled vectors are concatenated with the
rule-based valence feature, optionally passed through a hidden ReLU layer,
and mapped to a single tanh output.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .lexicon_store import OOV, PAD, RESERVED, LexiconStore
from .tensor_core import (Tape, Tensor, concat, conv1d_valid, dense, dropout,
                          global_max_pool, relu, take_rows, tanh_act, vstack)
from .text_pipeline import TokenSequence, preprocess
from .vader_engine import VaderScorer

DROPOUT_POSITIONS = ("embeddings", "concat", "hidden")
VADER_POSITIONS = ("concat", "sequence")


@dataclass(frozen=True)
class ModelConfig:
    filter_widths: tuple[int, ...] = (2, 3, 4)
    filters_per_width: int = 64
    dropout_rate: float = 0.5
    dropout_position: str = "concat"
    hidden_units: int = 0
    fine_tune_embeddings: bool = True
    use_embeddings: bool = True
    # finer-grained halves of use_embeddings
    use_pretrained: bool = True
    use_affective: bool = True
    use_vader: bool = True
    # "concat": valence joins the pooled features; "sequence": it is
    # prepended to the token matrix as an extra row
    vader_position: str = "concat"
    max_sequence_length: int = 50
    # token-vector width when no lexicon store is available
    random_embedding_dim: int = 50
    random_embedding_scale: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "filter_widths", tuple(int(k) for k in self.filter_widths))
        if not self.filter_widths or min(self.filter_widths) < 1:
            raise ValidationError("filter_widths must be non-empty and each >= 1")
        if self.filters_per_width < 1:
            raise ValidationError("filters_per_width must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must be in [0, 1)")
        if self.dropout_position not in DROPOUT_POSITIONS:
            raise ValidationError(f"dropout_position must be one of {DROPOUT_POSITIONS}")
        if self.vader_position not in VADER_POSITIONS:
            raise ValidationError(f"vader_position must be one of {VADER_POSITIONS}")
        if self.hidden_units < 0:
            raise ValidationError("hidden_units must be >= 0")
        if self.max_sequence_length < self.max_width:
            raise ValidationError("max_sequence_length must be >= the largest filter width")

    @property
    def max_width(self) -> int:
        return max(self.filter_widths)

    @property
    def pretrained(self) -> bool:
        return self.use_embeddings and self.use_pretrained

    @property
    def affective(self) -> bool:
        return self.use_embeddings and self.use_affective

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["filter_widths"] = list(self.filter_widths)
        return d

    @classmethod
    def from_dict(cls, values: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValidationError(f"unknown model settings: {sorted(unknown)}")
        return cls(**values)


class Vocabulary:
    """Token -> row index; reserved tokens occupy the first rows."""

    def __init__(self, tokens: Iterable[str]):
        self.tokens: list[str] = []
        self.index: dict[str, int] = {}
        for tok in (*RESERVED, *tokens):
            if tok not in self.index:
                self.index[tok] = len(self.tokens)
                self.tokens.append(tok)

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[str]]) -> "Vocabulary":
        seen = set()
        for seq in sequences:
            seen.update(seq)
        return cls(sorted(seen))

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        oov = self.index[OOV]
        return np.array([self.index.get(t, oov) for t in tokens], dtype=np.intp)

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()


@dataclass
class ModelParameters:
    vocabulary: Vocabulary
    tensors: dict[str, Tensor]
    # width of the valence feature the output layer was built for
    n_vader_features: int = 1

    @property
    def embedding(self) -> Tensor:
        return self.tensors["embedding"]

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def trainable(self) -> dict[str, Tensor]:
        return {k: t for k, t in self.tensors.items() if t.requires_grad}

    def values(self) -> dict[str, np.ndarray]:
        return {k: t.value for k, t in self.tensors.items()}

    def with_values(self, values: dict[str, np.ndarray]) -> "ModelParameters":
        tensors = {k: Tensor(values.get(k, t.value), t.requires_grad, k)
                   for k, t in self.tensors.items()}
        return ModelParameters(self.vocabulary, tensors, self.n_vader_features)

    def copy(self) -> "ModelParameters":
        return self.with_values({k: v.copy() for k, v in self.values().items()})

    def extend_vocabulary(self, tokens: Iterable[str], store: Optional[LexiconStore],
                          config: ModelConfig, seed: int) -> "ModelParameters":
        """Append rows for new tokens; rows get their untrained initial value.

        Tokens the lexicons do not know are left to map onto ``<oov>``
        unless embeddings are disabled, where every token is its own row.
        """
        new = [t for t in dict.fromkeys(tokens) if t not in self.vocabulary]
        if config.use_embeddings and store is not None:
            new = [t for t in new if store.knows(t)]
        if not new:
            return self
        vocab = Vocabulary([*self.vocabulary.tokens, *new])
        rows = _embedding_rows(new, store, config, self.embedding.shape[1],
                               np.random.default_rng([seed, 1, len(self.vocabulary)]))
        values = self.values()
        values["embedding"] = np.vstack([values["embedding"], rows])
        return ModelParameters(vocab, self.with_values(values).tensors, self.n_vader_features)


@dataclass
class SentenceRepresentation:
    token_ids: np.ndarray
    vader: np.ndarray
    length: int
    tokens: tuple[str, ...] = field(default=())

    @property
    def vader_score(self) -> float:
        return float(self.vader[0])

    def token_matrix(self, params: ModelParameters) -> np.ndarray:
        return params.embedding.value[self.token_ids]


def represent(tokens: TokenSequence, vocabulary: Vocabulary, config: ModelConfig,
              scorer: Optional[VaderScorer] = None, n_vader_features: int = 1
              ) -> SentenceRepresentation:
    """Token ids (truncated and right-padded) plus the valence feature.

    Every sentence gets ``max_width - 1`` trailing pad rows so that each
    real token starts a window of every width; extra padding beyond that
    only adds all-pad windows.
    """
    budget = config.max_sequence_length - (config.max_width - 1)
    if config.use_vader and config.vader_position == "sequence":
        budget -= 1
    words = tuple(tokens)[:max(budget, 0)]
    n_pad = max(config.max_width - 1, config.max_width - len(words))
    ids = np.concatenate([vocabulary.ids(words),
                          np.full(n_pad, vocabulary.pad_id, dtype=np.intp)])
    if config.use_vader and scorer is not None:
        vader = scorer.features(tokens)
    else:
        vader = np.zeros(n_vader_features)
    return SentenceRepresentation(ids, vader, len(words), words)


def _embedding_rows(tokens: Sequence[str], store: Optional[LexiconStore], config: ModelConfig,
                    dim: int, rng: np.random.Generator) -> np.ndarray:
    scale = config.random_embedding_scale
    rows = rng.uniform(-scale, scale, size=(len(tokens), dim))
    if store is not None:
        d_emb = store.d_emb
        for i, tok in enumerate(tokens):
            if config.pretrained:
                rows[i, :d_emb] = store.embeddings.row(tok)
            if config.affective:
                rows[i, d_emb:] = store.affective.scores(tok)
    for i, tok in enumerate(tokens):
        if tok == PAD:
            rows[i] = 0.0
    return rows


def token_dim(config: ModelConfig, store: Optional[LexiconStore]) -> int:
    return store.dim if store is not None else config.random_embedding_dim


def concat_width(config: ModelConfig, n_vader_features: int = 1) -> int:
    width = len(config.filter_widths) * config.filters_per_width
    if config.use_vader and config.vader_position == "concat":
        width += n_vader_features
    return width


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init(config: ModelConfig, store: Optional[LexiconStore], seed: int,
         vocabulary: Optional[Vocabulary] = None, n_vader_features: int = 1) -> ModelParameters:
    """Fresh parameters, deterministic in ``seed``.

    Embedding rows copy the lexicon vectors (halves disabled by the ablation
    switches are sampled uniform(-0.05, 0.05) instead); conv and dense
    weights are Glorot-uniform; biases are zero.
    """
    if vocabulary is None:
        vocabulary = Vocabulary(store.embeddings.vocabulary if store is not None else ())
    if config.use_embeddings and store is None:
        raise ValidationError("use_embeddings requires a lexicon store")
    dim = token_dim(config, store)
    rng_emb = np.random.default_rng([seed, 0])
    rng = np.random.default_rng([seed, 2])

    tensors = {"embedding": Tensor(_embedding_rows(vocabulary.tokens, store, config, dim, rng_emb),
                                   config.fine_tune_embeddings, "embedding")}
    depth = dim
    n_filters = config.filters_per_width
    for k in config.filter_widths:
        w = _glorot(rng, (n_filters, k, depth), k * depth, k * n_filters)
        tensors[f"conv{k}.filters"] = Tensor(w, True, f"conv{k}.filters")
        tensors[f"conv{k}.bias"] = Tensor(np.zeros(n_filters), True, f"conv{k}.bias")
    width = concat_width(config, n_vader_features)
    if config.hidden_units:
        h = config.hidden_units
        tensors["hidden.weights"] = Tensor(_glorot(rng, (h, width), width, h), True, "hidden.weights")
        tensors["hidden.bias"] = Tensor(np.zeros(h), True, "hidden.bias")
        width = h
    tensors["output.weights"] = Tensor(_glorot(rng, (1, width), width, 1), True, "output.weights")
    tensors["output.bias"] = Tensor(np.zeros(1), True, "output.bias")
    return ModelParameters(vocabulary, tensors, n_vader_features)


def forward(rep: SentenceRepresentation, params: ModelParameters, config: ModelConfig,
            training: bool = False, rng: Optional[np.random.Generator] = None,
            tape: Optional[Tape] = None) -> Tensor:
    """Score one sentence; returns a shape-(1,) tensor in (-1, 1)."""
    x = take_rows(params.embedding, rep.token_ids, tape)
    use_vader = config.use_vader
    if use_vader and config.vader_position == "sequence":
        row = np.zeros((1, x.shape[1]))
        row[0, :rep.vader.shape[0]] = rep.vader
        x = vstack([Tensor(row), x], tape)
    if config.dropout_position == "embeddings":
        x = dropout(x, config.dropout_rate, training, rng, tape)

    pooled = []
    for k in config.filter_widths:
        try:
            conv = conv1d_valid(x, params[f"conv{k}.filters"], params[f"conv{k}.bias"], tape)
        except ShapeError as exc:
            raise ShapeError(f"conv layer (width {k}): {exc}") from None
        pooled.append(global_max_pool(relu(conv, tape), tape))
    if use_vader and config.vader_position == "concat":
        pooled.append(Tensor(rep.vader))
    h = concat(pooled, tape)
    if config.dropout_position == "concat":
        h = dropout(h, config.dropout_rate, training, rng, tape)

    if "hidden.weights" in params.tensors:
        try:
            h = relu(dense(h, params["hidden.weights"], params["hidden.bias"], tape), tape)
        except ShapeError as exc:
            raise ShapeError(f"hidden layer: {exc}") from None
        if config.dropout_position == "hidden":
            h = dropout(h, config.dropout_rate, training, rng, tape)
    try:
        out = dense(h, params["output.weights"], params["output.bias"], tape)
    except ShapeError as exc:
        raise ShapeError(f"output layer: {exc}") from None
    return tanh_act(out, tape)


def predict(rep: SentenceRepresentation, params: ModelParameters, config: ModelConfig) -> float:
    """Inference-mode score."""
    return forward(rep, params, config, training=False).item()


class SentenceEncoder:
    """Preprocessing + valence scoring bundled for turning instances into inputs."""

    def __init__(self, config: ModelConfig, store: Optional[LexiconStore] = None,
                 scorer: Optional[VaderScorer] = None, preprocessing: bool = True):
        if config.use_vader and scorer is None:
            raise ValidationError("use_vader requires a valence scorer")
        self.config = config
        self.store = store
        self.scorer = scorer
        self.preprocessing = preprocessing

    @property
    def n_vader_features(self) -> int:
        return self.scorer.config.n_features if self.scorer is not None else 1

    def tokens(self, instance) -> TokenSequence:
        return preprocess(instance, self.preprocessing)

    def vocabulary(self, instances) -> Vocabulary:
        return Vocabulary.from_sequences(self.tokens(inst).tokens for inst in instances)

    def represent(self, instance, vocabulary: Vocabulary) -> SentenceRepresentation:
        return represent(self.tokens(instance), vocabulary, self.config,
                         self.scorer if self.config.use_vader else None, self.n_vader_features)

    def init(self, seed: int, vocabulary: Vocabulary) -> ModelParameters:
        return init(self.config, self.store, seed, vocabulary, self.n_vader_features)
