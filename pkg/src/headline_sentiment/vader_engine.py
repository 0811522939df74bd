"""Rule-based sentence valence in the style of VADER.

Five heuristics adjust the lexicon valence of each sentiment-bearing
token: degree modifiers (boosters/dampeners), ALL-CAPS emphasis,
negation, "but" reweighting and exclamation marks.  All constants live
in ``data/vader_defaults.txt`` and the word lists in ``data/``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .lexicon_store import ValenceLexicon
from .text_pipeline import SENTINELS, TokenSequence

OUTPUT_MODES = ("compound", "breakdown")


@dataclass(frozen=True)
class RuleConfig:
    negation_window: int = 3
    negation_factor: float = -0.74
    booster_increment: float = 0.293
    booster_decay: tuple[float, ...] = (1.0, 0.95, 0.9)
    caps_increment: float = 0.733
    exclamation_increment_per_mark: float = 0.292
    exclamation_cap: int = 4
    but_weight_before: float = 0.5
    but_weight_after: float = 1.5
    normalization_alpha: float = 15.0
    use_boosters: bool = True
    use_caps: bool = True
    use_negation: bool = True
    use_but: bool = True
    use_exclamation: bool = True
    output: str = "compound"

    def __post_init__(self):
        if self.negation_window < 1:
            raise ValidationError("negation_window must be >= 1")
        if not self.normalization_alpha > 0:
            raise ValidationError("normalization_alpha must be > 0")
        if self.exclamation_cap < 0:
            raise ValidationError("exclamation_cap must be >= 0")
        if self.output not in OUTPUT_MODES:
            raise ValidationError(f"output must be one of {OUTPUT_MODES}")
        reals = [self.negation_factor, self.booster_increment, self.caps_increment,
                 self.exclamation_increment_per_mark, self.but_weight_before,
                 self.but_weight_after, self.normalization_alpha, *self.booster_decay]
        if not all(math.isfinite(x) for x in reals):
            raise ValidationError("rule constants must be finite")

    @property
    def n_features(self) -> int:
        return 1 if self.output == "compound" else 3

    def replace(self, **changes) -> "RuleConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["booster_decay"] = list(self.booster_decay)
        return d

    @classmethod
    def from_dict(cls, values: dict) -> "RuleConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ValidationError(f"unknown rule constants: {sorted(unknown)}")
        kwargs = {}
        for key, raw in values.items():
            kwargs[key] = _coerce(key, raw, cls.__dataclass_fields__[key].default)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RuleConfig":
        return cls.from_dict(_read_key_values(Path(path).read_text(encoding="utf-8")))

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, list):
                value = ",".join(repr(float(v)) for v in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def _coerce(key, raw, default):
    if not isinstance(raw, str):
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw)
        return raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(","))
    except ValueError:
        raise ValidationError(f"bad value for {key}: {raw!r}") from None
    return raw


def _read_key_values(text: str) -> dict[str, str]:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"line {line_no}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _data_text(name: str) -> str:
    return resources.files("headline_sentiment").joinpath("data", name).read_text(encoding="utf-8")


def default_config() -> RuleConfig:
    """Constants from the shipped defaults file."""
    return RuleConfig.from_dict(_read_key_values(_data_text("vader_defaults.txt")))


def load_negators(path=None) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("negators.txt")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_boosters(path=None, default_increment: float = 0.293) -> dict[str, float]:
    """``token<TAB>increment`` rows; a bare token gets ``default_increment``."""
    text = Path(path).read_text(encoding="utf-8") if path else _data_text("boosters.tsv")
    boosters = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        boosters[parts[0].strip()] = float(parts[1]) if len(parts) > 1 else default_increment
    return boosters


def _sign(x: float) -> float:
    return 1.0 if x > 0 else -1.0 if x < 0 else 0.0


def _caps_differential(tokens: Sequence[str], caps: Sequence[bool]) -> bool:
    # emphasis only counts when some, but not all, words are upper case
    flags = [c for t, c in zip(tokens, caps) if t not in SENTINELS and any(ch.isalpha() for ch in t)]
    return any(flags) and not all(flags)


def _negator_positions(tokens: Sequence[str], negators: frozenset[str]) -> list[bool]:
    out = []
    for i, tok in enumerate(tokens):
        # "don't" is tokenised as don ' t; the "t" carries the negation
        contraction = (tok == "t" and i >= 2 and tokens[i - 1] in ("'", "’")
                       and tokens[i - 2].endswith("n"))
        out.append(tok in negators or contraction)
    return out


@dataclass
class VaderScorer:
    lexicon: ValenceLexicon
    config: RuleConfig = field(default_factory=default_config)
    negators: frozenset = field(default_factory=load_negators)
    boosters: dict = field(default_factory=load_boosters)

    def adjusted_valences(self, tokens: Sequence[str],
                          case_mask: Optional[Sequence[bool]] = None) -> list[float]:
        """Per-token valence after boosters, caps, negation and "but"."""
        cfg = self.config
        tokens = list(tokens)
        caps_on = (cfg.use_caps and case_mask is not None and len(case_mask) == len(tokens)
                   and _caps_differential(tokens, case_mask))
        negated = _negator_positions(tokens, self.negators) if cfg.use_negation else None
        but_at = tokens.index("but") if cfg.use_but and "but" in tokens else None

        valences = []
        for i, tok in enumerate(tokens):
            base = 0.0 if tok in self.boosters else self.lexicon.get(tok, 0.0)
            if base == 0.0:
                valences.append(0.0)
                continue
            sign = _sign(base)
            v = base
            if cfg.use_boosters:
                for dist, decay in enumerate(cfg.booster_decay, start=1):
                    j = i - dist
                    if j < 0:
                        break
                    inc = self.boosters.get(tokens[j])
                    if inc is None:
                        continue
                    scalar = inc * sign
                    if caps_on and case_mask[j]:
                        scalar += cfg.caps_increment * sign
                    v += scalar * decay
            if caps_on and case_mask[i]:
                v += cfg.caps_increment * sign
            if negated is not None and any(negated[max(0, i - cfg.negation_window):i]):
                v *= cfg.negation_factor
            if but_at is not None:
                if i < but_at:
                    v *= cfg.but_weight_before
                elif i > but_at:
                    v *= cfg.but_weight_after
            valences.append(v)
        return valences

    def _exclamation_bonus(self, tokens: Sequence[str]) -> float:
        if not self.config.use_exclamation:
            return 0.0
        marks = min(sum(1 for t in tokens if t == "!"), self.config.exclamation_cap)
        return marks * self.config.exclamation_increment_per_mark

    def raw_score(self, tokens, case_mask=None) -> float:
        total = 0.0
        for v in self.adjusted_valences(tokens, case_mask):
            total += v
        if total != 0.0:
            total += self._exclamation_bonus(tokens) * _sign(total)
        return total

    def score(self, tokens, case_mask=None) -> float:
        """Normalised compound score in [-1, 1]; exactly 0 for neutral input."""
        if isinstance(tokens, TokenSequence):
            if case_mask is None and tokens.caps:
                case_mask = tokens.caps
            tokens = tokens.tokens
        s = self.raw_score(tokens, case_mask)
        score = s / math.sqrt(s * s + self.config.normalization_alpha)
        return min(1.0, max(-1.0, score))

    def breakdown(self, tokens, case_mask=None) -> tuple[float, float, float]:
        """(positive, negative, neutral) proportions."""
        if isinstance(tokens, TokenSequence):
            if case_mask is None and tokens.caps:
                case_mask = tokens.caps
            tokens = tokens.tokens
        valences = self.adjusted_valences(tokens, case_mask)
        pos = neg = 0.0
        neu = 0
        for v in valences:
            if v > 0:
                pos += v + 1.0
            elif v < 0:
                neg += v - 1.0
            else:
                neu += 1
        bonus = self._exclamation_bonus(tokens)
        if pos > abs(neg):
            pos += bonus
        elif pos < abs(neg):
            neg -= bonus
        total = pos + abs(neg) + neu
        if total == 0:
            return (0.0, 0.0, 0.0)
        return (abs(pos / total), abs(neg / total), abs(neu / total))

    def features(self, tokens, case_mask=None) -> np.ndarray:
        if self.config.output == "breakdown":
            return np.array(self.breakdown(tokens, case_mask))
        return np.array([self.score(tokens, case_mask)])


def score_sentence(tokens, lexicon: ValenceLexicon, config: Optional[RuleConfig] = None,
                   case_mask: Optional[Sequence[bool]] = None) -> float:
    """Compound valence of a token sequence with the shipped word lists."""
    scorer = VaderScorer(lexicon, config or default_config())
    return scorer.score(tokens, case_mask)
