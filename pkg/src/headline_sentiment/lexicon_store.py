"""Loaders for word embeddings, the affective lexicon and the valence lexicon.

A token's input vector is its embedding row followed by its affective
scores.  Unknown tokens fall back to the ``<oov>`` row and to a zero
affect vector respectively, since the two resources have independent
coverage.
"""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import LexiconWarning, MalformedLexiconError, ValidationError
from .text_pipeline import COMPANY, NUMBER

logger = logging.getLogger(__name__)

OOV = "<oov>"
PAD = "<pad>"
RESERVED = (PAD, OOV, COMPANY, NUMBER)

# reserved rows are sampled from this fixed stream so loads are reproducible
RESERVED_SEED = 1729
RESERVED_SCALE = 0.05


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class EmbeddingTable:
    vocabulary: dict[str, int]
    vectors: np.ndarray
    digest: str = ""

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.vocabulary):
            raise ValidationError("embedding matrix must have one row per vocabulary entry")
        missing = [t for t in RESERVED if t not in self.vocabulary]
        if missing:
            raise ValidationError(f"embedding table lacks reserved tokens {missing}")

    @property
    def d_emb(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token):
        return token in self.vocabulary

    def __len__(self):
        return len(self.vocabulary)

    def row(self, token: str) -> np.ndarray:
        idx = self.vocabulary.get(token)
        if idx is None:
            idx = self.vocabulary[OOV]
        return self.vectors[idx]

    def is_known(self, token: str) -> bool:
        """True for file tokens and reserved tokens other than ``<oov>``."""
        return token in self.vocabulary and token != OOV


@dataclass
class AffectiveLexicon:
    entries: dict[str, np.ndarray]
    dimension_names: list[str]
    digest: str = ""

    @property
    def d_aff(self) -> int:
        return len(self.dimension_names)

    def __contains__(self, token):
        return token in self.entries

    def __len__(self):
        return len(self.entries)

    def scores(self, token: str) -> np.ndarray:
        vec = self.entries.get(token)
        if vec is None:
            return np.zeros(self.d_aff)
        return vec


@dataclass
class ValenceLexicon:
    entries: dict[str, float] = field(default_factory=dict)
    digest: str = ""

    def get(self, token: str, default: float = 0.0) -> float:
        return self.entries.get(token, default)

    def __contains__(self, token):
        return token in self.entries

    def __len__(self):
        return len(self.entries)

    def negated(self) -> "ValenceLexicon":
        return ValenceLexicon({k: -v for k, v in self.entries.items()})


def _parse_floats(fields, path, line_no):
    try:
        values = np.array([float(x) for x in fields], dtype=np.float64)
    except ValueError as exc:
        raise MalformedLexiconError(path, line_no, f"non-numeric value: {exc}") from None
    if not np.all(np.isfinite(values)):
        raise MalformedLexiconError(path, line_no, "non-finite value")
    return values


def reserved_rows(dim: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(RESERVED_SEED)
    rows = {PAD: np.zeros(dim)}
    for tok in (OOV, COMPANY, NUMBER):
        rows[tok] = rng.uniform(-RESERVED_SCALE, RESERVED_SCALE, size=dim)
    return rows


def load_embeddings(path) -> EmbeddingTable:
    """Read a whitespace-separated ``token v1 ... vd`` file.

    A word2vec-style ``count dim`` header line is skipped.  Duplicate tokens
    keep their last occurrence and emit a :class:`LexiconWarning`.  The four
    reserved tokens are appended (``<pad>`` all-zero, the others sampled from
    a fixed-seed uniform(-0.05, 0.05)); a file row for one of them is ignored.
    """
    path = Path(path)
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            token, values = parts[0], parts[1:]
            if not values:
                raise MalformedLexiconError(path, line_no, f"token {token!r} has no vector")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise MalformedLexiconError(
                    path, line_no, f"expected {dim} values, found {len(values)}")
            vec = _parse_floats(values, path, line_no)
            if token in RESERVED:
                warnings.warn(f"{path}:{line_no}: reserved token {token!r} ignored",
                              LexiconWarning, stacklevel=2)
                continue
            if token in vocab:
                warnings.warn(f"{path}:{line_no}: duplicate token {token!r}, last occurrence wins",
                              LexiconWarning, stacklevel=2)
                rows[vocab[token]] = vec
            else:
                vocab[token] = len(rows)
                rows.append(vec)
    if dim is None:
        raise MalformedLexiconError(path, 0, "empty embedding file")
    for tok, vec in reserved_rows(dim).items():
        vocab[tok] = len(rows)
        rows.append(vec)
    logger.info("loaded %d embeddings (d=%d) from %s", len(rows) - len(RESERVED), dim, path)
    return EmbeddingTable(vocab, np.vstack(rows), file_digest(path))


def load_affective(path) -> AffectiveLexicon:
    """Read a TSV with header ``token<TAB>dim1 ... dimK`` and one row per token."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise MalformedLexiconError(path, 1, "missing header row")
    header = lines[0].split("\t")
    if len(header) < 2:
        raise MalformedLexiconError(path, 1, "header must name at least one dimension")
    names = [h.strip() for h in header[1:]]
    try:
        float(names[0])
    except ValueError:
        pass
    else:
        raise MalformedLexiconError(path, 1, "missing header row (first row is numeric)")
    entries: dict[str, np.ndarray] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise MalformedLexiconError(
                path, line_no, f"expected {len(header)} columns, found {len(parts)}")
        token = parts[0]
        if token in entries:
            warnings.warn(f"{path}:{line_no}: duplicate token {token!r}, last occurrence wins",
                          LexiconWarning, stacklevel=2)
        entries[token] = _parse_floats(parts[1:], path, line_no)
    return AffectiveLexicon(entries, names, file_digest(path))


def load_valence(path) -> ValenceLexicon:
    """Read ``token<TAB>valence`` rows; extra columns are ignored."""
    path = Path(path)
    entries: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise MalformedLexiconError(path, line_no, "expected token<TAB>valence")
            entries[parts[0]] = float(_parse_floats(parts[1:2], path, line_no)[0])
    return ValenceLexicon(entries, file_digest(path))


def token_vector(token: str, emb: EmbeddingTable, aff: AffectiveLexicon) -> np.ndarray:
    """Embedding row (or ``<oov>``) concatenated with affect scores (or zeros)."""
    return np.concatenate([emb.row(token), aff.scores(token)])


@dataclass(frozen=True)
class Coverage:
    embedding_hits: int
    embedding_misses: int
    affective_hits: int
    affective_misses: int


class LexiconStore:
    """Read-only bundle of the two token-level resources."""

    def __init__(self, embeddings: EmbeddingTable, affective: Optional[AffectiveLexicon] = None):
        self.embeddings = embeddings
        if affective is None:
            affective = AffectiveLexicon({}, [])
        self.affective = affective

    @classmethod
    def from_files(cls, embeddings_path, affective_path=None) -> "LexiconStore":
        aff = load_affective(affective_path) if affective_path else None
        return cls(load_embeddings(embeddings_path), aff)

    @property
    def d_emb(self) -> int:
        return self.embeddings.d_emb

    @property
    def d_aff(self) -> int:
        return self.affective.d_aff

    @property
    def dim(self) -> int:
        return self.d_emb + self.d_aff

    def vector(self, token: str) -> np.ndarray:
        return token_vector(token, self.embeddings, self.affective)

    def knows(self, token: str) -> bool:
        return self.embeddings.is_known(token) or token in self.affective

    def coverage(self, tokens: Iterable[str]) -> Coverage:
        eh = em = ah = am = 0
        for tok in tokens:
            if self.embeddings.is_known(tok):
                eh += 1
            else:
                em += 1
            if tok in self.affective:
                ah += 1
            else:
                am += 1
        return Coverage(eh, em, ah, am)

    def digests(self) -> dict[str, str]:
        return {"embeddings": self.embeddings.digest, "affective": self.affective.digest}
