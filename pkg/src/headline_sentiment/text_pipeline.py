"""Headline normalisation and tokenisation.

Preprocessing is deliberately minimal: the target company is replaced by
``<company>``, numbers by ``<number>``, and the text is split on whitespace
with every punctuation character kept as its own token.
"""

from __future__ import annotations

import logging
import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError

logger = logging.getLogger(__name__)

COMPANY = "<company>"
NUMBER = "<number>"
SENTINELS = (COMPANY, NUMBER)

# digit runs with optional internal "." / "," groups: 4.5, 1,000,000, 2017
_NUMBER_RE = re.compile(r"\d+(?:[.,]\d+)*")
_SENTINEL_RE = re.compile("|".join(re.escape(s) for s in SENTINELS))


@dataclass(frozen=True)
class RawInstance:
    """One (headline, company, score) record; ``score`` is None when unlabeled."""

    headline: str
    company: str
    score: Optional[float] = None

    def __post_init__(self):
        if not self.headline or not self.headline.strip():
            raise ValidationError("headline must be non-empty")
        if not self.company or not self.company.strip():
            raise ValidationError("company must be non-empty")
        if self.score is not None:
            score = float(self.score)
            if not math.isfinite(score) or not -1.0 <= score <= 1.0:
                raise ValidationError(f"score {self.score!r} outside [-1, 1]")
            object.__setattr__(self, "score", score)

    @property
    def key(self) -> tuple[str, str]:
        return (self.headline, self.company)


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    masked_company: bool = False
    # parallel to tokens: True where the original surface form was ALL CAPS
    caps: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if self.caps and len(self.caps) != len(self.tokens):
            raise ValueError("caps mask must be parallel to tokens")

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]


def _company_pattern(company: str) -> re.Pattern:
    words = company.split()
    body = r"\s+".join(re.escape(w) for w in words)
    # "<" and ">" count as word characters so the sentinels are never re-matched
    return re.compile(rf"(?<![\w<>]){body}(?![\w<>])", re.IGNORECASE)


def mask(headline: str, company: str) -> str:
    """Replace the target company with ``<company>`` and numbers with ``<number>``.

    Company matching is case-insensitive, bounded by non-word characters and
    tolerant of any whitespace run between the words of a multi-word name.
    Numbers are masked after the company so names containing digits
    (``3M``) are matched first.
    """
    if not company or not company.strip():
        raise ValidationError("company must be non-empty")
    text = _company_pattern(company).sub(COMPANY, headline)
    return _NUMBER_RE.sub(NUMBER, text)


def _is_punct(ch: str) -> bool:
    # punctuation (P*) and symbols (S*) such as $ % + are split off alike
    return unicodedata.category(ch)[0] in "PS"


def _split_chunk(chunk: str):
    """Yield (surface, is_sentinel) pieces of one whitespace-free chunk."""
    pos = 0
    for m in _SENTINEL_RE.finditer(chunk):
        yield from _split_plain(chunk[pos:m.start()])
        yield m.group(), True
        pos = m.end()
    yield from _split_plain(chunk[pos:])


def _split_plain(text: str):
    word = []
    for ch in text:
        if _is_punct(ch):
            if word:
                yield "".join(word), False
                word = []
            yield ch, False
        else:
            word.append(ch)
    if word:
        yield "".join(word), False


def tokenize(text: str) -> TokenSequence:
    """Split on whitespace, separate punctuation characters, lowercase words.

    >>> tokenize("Up, up!").tokens
    ('up', ',', 'up', '!')
    """
    tokens, caps = [], []
    for chunk in text.split():
        for surface, sentinel in _split_chunk(chunk):
            if sentinel:
                tokens.append(surface)
                caps.append(False)
            else:
                tokens.append(surface.lower())
                caps.append(surface.isupper())
    return TokenSequence(tuple(tokens), COMPANY in tokens, tuple(caps))


def preprocess(instance: RawInstance, enabled: bool = True) -> TokenSequence:
    """Tokenize an instance, masking company and numbers unless disabled."""
    if not enabled:
        return tokenize(instance.headline)
    seq = tokenize(mask(instance.headline, instance.company))
    if not seq.masked_company:
        logger.debug("company %r not found in headline %r", instance.company, instance.headline)
    return seq
