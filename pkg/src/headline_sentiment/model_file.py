"""Binary model container.

Layout::

    8 bytes   magic b"HSCNNMDL"
    uint32    format version (little-endian)
    uint32    header length in bytes
    header    UTF-8 JSON: configs, seed, vocabulary, lexicon digests,
              tensor names/shapes in storage order
    payload   every tensor as little-endian float64, row-major, in header order
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .model import ModelConfig, ModelParameters, Vocabulary
from .tensor_core import Tensor

MAGIC = b"HSCNNMDL"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


def config_hash(settings: dict) -> str:
    blob = json.dumps(settings, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass
class SavedModel:
    params: ModelParameters
    model_config: ModelConfig
    seed: int
    header: dict

    @property
    def lexicon_digests(self) -> dict:
        return self.header.get("lexicon_digests", {})

    @property
    def config_hash(self) -> str:
        return self.header["config_hash"]


def save_model(path, params: ModelParameters, model_config: ModelConfig, seed: int,
               lexicon_digests: Optional[dict] = None, extra: Optional[dict] = None) -> None:
    extra = dict(extra or {})
    header = {
        "format_version": FORMAT_VERSION,
        "seed": int(seed),
        "model_config": model_config.to_dict(),
        "n_vader_features": params.n_vader_features,
        "vocabulary": params.vocabulary.tokens,
        "vocabulary_hash": params.vocabulary.digest(),
        "lexicon_digests": dict(lexicon_digests or {}),
        "tensors": [{"name": name, "shape": list(t.shape), "requires_grad": t.requires_grad}
                    for name, t in params.tensors.items()],
        "extra": extra,
    }
    header["config_hash"] = config_hash({"model_config": header["model_config"], **extra})
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for t in params.tensors.values():
            fh.write(np.ascontiguousarray(t.value, dtype="<f8").tobytes())


def load_model(path) -> SavedModel:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise ValidationError(f"{path}: truncated model file")
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ValidationError(f"{path}: not a model file")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported format version {version}")
    start = _PREFIX.size
    if start + header_len > len(data):
        raise ValidationError(f"{path}: truncated header")
    try:
        header = json.loads(data[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: corrupt header ({exc})") from None
    offset = start + header_len
    tensors = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(data):
            raise ValidationError(f"{path}: truncated tensor {spec['name']}")
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        tensors[spec["name"]] = Tensor(values.astype(np.float64), spec["requires_grad"], spec["name"])
        offset += nbytes
    if offset != len(data):
        raise ValidationError(f"{path}: {len(data) - offset} trailing bytes")
    vocab = Vocabulary(header["vocabulary"])
    if vocab.digest() != header["vocabulary_hash"]:
        raise ValidationError(f"{path}: vocabulary hash mismatch")
    params = ModelParameters(vocab, tensors, header["n_vader_features"])
    return SavedModel(params, ModelConfig.from_dict(header["model_config"]), header["seed"], header)
