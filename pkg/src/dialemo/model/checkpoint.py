"""Binary model checkpoints.

Layout: magic bytes "CEK1", a little-endian uint32 header length, a UTF-8
JSON header (model config, tensor manifest with names/shapes in storage
order, vocabulary checksum), then the raw tensor data as little-endian
32-bit floats in manifest order.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from dialemo.errors import DataError
from dialemo.model.config import ModelConfig
from dialemo.model.params import ModelParams
from dialemo.tokenizer import Vocab, save_vocab

MAGIC = b"CEK1"


@dataclass
class Model:
    """A config + parameter bundle, the unit of checkpointing."""

    cfg: ModelConfig
    params: ModelParams

    def copy(self) -> "Model":
        return Model(self.cfg, self.params.copy())


def vocab_checksum(v: Vocab) -> str:
    """sha256 of the serialized vocabulary file."""
    buf = io.StringIO()
    save_vocab(v, buf)
    return hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest()


def save_checkpoint(model: Model, fh: BinaryIO, vocab_sha256: str = "") -> None:
    manifest = [
        {"name": name, "shape": list(t.shape)} for name, t in model.params.items()
    ]
    header = json.dumps(
        {
            "config": model.cfg.to_dict(),
            "manifest": manifest,
            "vocab_sha256": vocab_sha256,
        }
    ).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<I", len(header)))
    fh.write(header)
    for _, t in model.params.items():
        fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(fh: BinaryIO) -> tuple[Model, str]:
    """Returns the model (tensors upcast to float64) and the stored vocab checksum."""
    magic = fh.read(4)
    if magic != MAGIC:
        raise DataError(f"bad checkpoint magic {magic!r}")
    (header_len,) = struct.unpack("<I", fh.read(4))
    try:
        header = json.loads(fh.read(header_len).decode("utf-8"))
        cfg = ModelConfig.from_dict(header["config"])
        manifest = header["manifest"]
        vocab_sha = header.get("vocab_sha256", "")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed checkpoint header: {exc}") from exc

    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for entry in manifest:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        raw = fh.read(4 * n)
        if len(raw) != 4 * n:
            raise DataError(f"checkpoint truncated in tensor {entry['name']}")
        tensors[entry["name"]] = (
            np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
        )
    return Model(cfg, ModelParams(tensors)), vocab_sha


def save_checkpoint_file(model: Model, path: str | Path, vocab_sha256: str = "") -> None:
    with open(path, "wb") as fh:
        save_checkpoint(model, fh, vocab_sha256)


def load_checkpoint_file(path: str | Path) -> tuple[Model, str]:
    with open(path, "rb") as fh:
        return load_checkpoint(fh)


def checkpoint_bytes(model: Model, vocab_sha256: str = "") -> bytes:
    buf = io.BytesIO()
    save_checkpoint(model, buf, vocab_sha256)
    return buf.getvalue()
