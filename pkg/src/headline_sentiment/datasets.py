"""Dataset files: TSV (``headline<TAB>company<TAB>score``) and JSON lines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

from .errors import ValidationError
from .text_pipeline import RawInstance

FORMATS = ("tsv", "jsonl")
TSV_HEADER = ("headline", "company", "score")


@dataclass
class DatasetFile:
    instances: list[RawInstance]
    row_numbers: list[int] = field(default_factory=list)
    path: Optional[str] = None

    def __len__(self):
        return len(self.instances)

    def __iter__(self) -> Iterator[RawInstance]:
        return iter(self.instances)

    def __getitem__(self, i):
        return self.instances[i]

    @property
    def labeled(self) -> bool:
        return all(inst.score is not None for inst in self.instances)


def _parse_score(raw, row, problems):
    try:
        score = float(raw)
    except (TypeError, ValueError):
        problems.append(f"row {row}: score {raw!r} is not a number")
        return None
    if not math.isfinite(score) or not -1.0 <= score <= 1.0:
        problems.append(f"row {row}: score {raw!r} outside [-1, 1]")
        return None
    return score


def _read_tsv(lines, unlabeled, problems):
    for row, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if row == 1 and tuple(p.strip().lower() for p in parts[:3]) == TSV_HEADER[:len(parts)]:
            continue
        if len(parts) > 3:
            problems.append(f"row {row}: {len(parts)} columns (tabs are not allowed in headlines)")
            continue
        if len(parts) < 2 or (len(parts) == 2 and not unlabeled):
            problems.append(f"row {row}: expected headline<TAB>company<TAB>score")
            continue
        score = None
        if len(parts) == 3 and not (unlabeled and not parts[2].strip()):
            score = _parse_score(parts[2].strip(), row, problems)
            if score is None:
                continue
        yield row, parts[0], parts[1], score


def _read_jsonl(lines, unlabeled, problems):
    for row, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"row {row}: invalid JSON ({exc.msg})")
            continue
        if not isinstance(obj, dict) or "title" not in obj or "company" not in obj:
            problems.append(f"row {row}: object needs 'title' and 'company'")
            continue
        raw = obj.get("sentiment")
        if raw is None and not unlabeled:
            problems.append(f"row {row}: missing 'sentiment'")
            continue
        score = None
        if raw is not None:
            score = _parse_score(raw, row, problems)
            if score is None:
                continue
        title, company = obj["title"], obj["company"]
        if "\t" in str(title) or "\t" in str(company):
            problems.append(f"row {row}: tabs are not allowed in headlines")
            continue
        yield row, str(title), str(company), score


def ingest(path, fmt: str = "tsv", unlabeled: bool = False) -> DatasetFile:
    """Parse a dataset file, collecting every malformed row into one error."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    lines = text.splitlines()
    problems: list[str] = []
    reader = _read_tsv if fmt == "tsv" else _read_jsonl
    instances, rows = [], []
    for row, headline, company, score in reader(lines, unlabeled, problems):
        try:
            instances.append(RawInstance(headline, company, score))
            rows.append(row)
        except ValidationError as exc:
            problems.append(f"row {row}: {exc}")
    if problems:
        raise ValidationError(f"{path}: invalid rows:\n  " + "\n  ".join(problems))
    if not instances:
        raise ValidationError(f"{path}: no instances")
    return DatasetFile(instances, rows, str(path))


def format_score(x: float) -> str:
    return repr(float(x))


def dumps(instances: Sequence[RawInstance], fmt: str = "tsv") -> str:
    out = []
    for inst in instances:
        if fmt == "tsv":
            cols = [inst.headline, inst.company]
            if inst.score is not None:
                cols.append(format_score(inst.score))
            out.append("\t".join(cols) + "\n")
        else:
            obj = {"title": inst.headline, "company": inst.company}
            if inst.score is not None:
                obj["sentiment"] = inst.score
            out.append(json.dumps(obj, ensure_ascii=False) + "\n")
    return "".join(out)


def write(path, instances: Sequence[RawInstance], fmt: str = "tsv") -> None:
    Path(path).write_text(dumps(instances, fmt), encoding="utf-8")
