"""Run configuration: one JSON document covering model, training, rules and paths.

Every run writes the fully resolved document (all defaults explicit, paths
absolute) so that it can be replayed with ``--config``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ValidationError
from .lexicon_store import LexiconStore, ValenceLexicon, load_valence
from .model import ModelConfig, SentenceEncoder
from .trainer import TrainConfig
from .vader_engine import RuleConfig, VaderScorer, default_config, load_boosters, load_negators

PATH_KEYS = ("embeddings", "affective", "valence", "negators", "boosters", "data", "test")


@dataclass
class Paths:
    embeddings: Optional[str] = None
    affective: Optional[str] = None
    valence: Optional[str] = None
    negators: Optional[str] = None
    boosters: Optional[str] = None
    data: Optional[str] = None
    test: Optional[str] = None
    format: str = "tsv"

    def resolved(self, base: Path) -> "Paths":
        values = {}
        for key in PATH_KEYS:
            p = getattr(self, key)
            values[key] = str((base / p).resolve()) if p else None
        return Paths(**values, format=self.format)


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    rules: RuleConfig = field(default_factory=default_config)
    paths: Paths = field(default_factory=Paths)
    preprocessing: bool = True

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "rules": self.rules.to_dict(),
            "paths": dataclasses.asdict(self.paths),
            "preprocessing": self.preprocessing,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_dict(cls, values: dict, base: Path = Path(".")) -> "RunConfig":
        unknown = set(values) - {"model", "train", "rules", "paths", "preprocessing"}
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        try:
            rules = default_config().to_dict()
            rules.update(values.get("rules", {}))
            paths = Paths(**values.get("paths", {}))
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from None
        return cls(
            model=ModelConfig.from_dict(values.get("model", {})),
            train=TrainConfig.from_dict(values.get("train", {})),
            rules=RuleConfig.from_dict(rules),
            paths=paths.resolved(base),
            preprocessing=bool(values.get("preprocessing", True)),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
        return cls.from_dict(values, path.parent)

    def validate(self, need_data: bool = True) -> None:
        p = self.paths
        if self.model.use_embeddings and not p.embeddings:
            raise ValidationError("use_embeddings is on but no embeddings path is configured")
        if self.model.use_vader and not p.valence:
            raise ValidationError("use_vader is on but no valence lexicon path is configured")
        if need_data and not p.data:
            raise ValidationError("no dataset path configured (--data)")
        for key in PATH_KEYS:
            value = getattr(p, key)
            if value and not Path(value).is_file():
                raise ValidationError(f"{key} file not found: {value}")


def load_store(paths: Paths) -> Optional[LexiconStore]:
    if not paths.embeddings:
        return None
    return LexiconStore.from_files(paths.embeddings, paths.affective)


def load_scorer(paths: Paths, rules: RuleConfig) -> Optional[VaderScorer]:
    lexicon = load_valence(paths.valence) if paths.valence else ValenceLexicon()
    return VaderScorer(lexicon, rules, load_negators(paths.negators),
                       load_boosters(paths.boosters, rules.booster_increment))


def build_encoder(cfg: RunConfig, store=None, scorer=None) -> SentenceEncoder:
    if store is None:
        store = load_store(cfg.paths)
    if scorer is None and cfg.model.use_vader:
        scorer = load_scorer(cfg.paths, cfg.rules)
    return SentenceEncoder(cfg.model, store, scorer, cfg.preprocessing)
