"""Versioned binary container for trained classifiers.

Layout::

    b"CCMLP\\n"                  magic
    uint32, little-endian        header length in bytes
    header                       UTF-8 JSON, keys sorted
    weights                      W1 b1 W2 b2 W3 b3, little-endian float64, C order

The header carries the format version, embedding dimension, layer dims, label
set, backend name and a SHA-256 checksum of the weight bytes. Nothing
time-dependent is written, so saving the same model twice gives identical bytes.
"""
import hashlib
import json
import logging
import os
import struct
from typing import Dict, List, Tuple

import numpy as np

from src.core.vocabulary import LabelSet
from src.models.classifier import MlpClassifier
from src.utils.errors import CorruptFile, FormatVersionMismatch

logger = logging.getLogger(__name__)

MAGIC = b"CCMLP\n"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<I")
_FLOAT = np.dtype("<f8")


def _parameter_shapes(layer_dims: List[int]) -> List[Tuple[int, ...]]:
    shapes = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        shapes.extend([(fan_in, fan_out), (fan_out,)])
    return shapes


def encode_model(model: MlpClassifier) -> bytes:
    payload = b"".join(np.ascontiguousarray(p, dtype=_FLOAT).tobytes() for p in model.parameters())
    header: Dict = {
        "format_version": FORMAT_VERSION,
        "embedding_dim": model.embedding_dim,
        "layer_dims": model.layer_dims,
        "label_set": model.label_set.to_dict(),
        "backend": model.backend_name,
        "checksum": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LENGTH.pack(len(header_bytes)) + header_bytes + payload


def decode_model(blob: bytes, source: str = "<bytes>") -> MlpClassifier:
    prefix = len(MAGIC) + _LENGTH.size
    if len(blob) < prefix or not blob.startswith(MAGIC):
        raise CorruptFile(f"{source}: not a model file (bad magic or truncated)")
    (header_length,) = _LENGTH.unpack_from(blob, len(MAGIC))
    if len(blob) < prefix + header_length:
        raise CorruptFile(f"{source}: truncated header")
    try:
        header = json.loads(blob[prefix:prefix + header_length].decode("utf-8"))
        version = int(header["format_version"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError):
        raise CorruptFile(f"{source}: unreadable header") from None
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(version, FORMAT_VERSION)

    try:
        layer_dims = [int(d) for d in header["layer_dims"]]
        label_set = LabelSet.from_dict(header["label_set"])
        backend = str(header["backend"])
        checksum = header["checksum"]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptFile(f"{source}: incomplete header ({e})") from None

    payload = blob[prefix + header_length:]
    shapes = _parameter_shapes(layer_dims)
    expected = sum(int(np.prod(shape)) for shape in shapes) * _FLOAT.itemsize
    if len(payload) != expected:
        raise CorruptFile(f"{source}: expected {expected} weight bytes, found {len(payload)}")
    if hashlib.sha256(payload).hexdigest() != checksum:
        raise CorruptFile(f"{source}: weight checksum mismatch")

    params = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape))
        params.append(np.frombuffer(payload, dtype=_FLOAT, count=count, offset=offset)
                      .reshape(shape).astype(np.float64))
        offset += count * _FLOAT.itemsize
    try:
        return MlpClassifier(params[0::2], params[1::2], label_set, backend)
    except ValueError as e:
        raise CorruptFile(f"{source}: inconsistent model ({e})") from None


def save_model(model: MlpClassifier, path: str) -> str:
    """Write ``model`` to ``path``; returns the file's SHA-256."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    blob = encode_model(model)
    with open(path, "wb") as f:
        f.write(blob)
    logger.info(f"Saved {model.label_set.attribute.value} model {model.layer_dims} to {path}")
    return hashlib.sha256(blob).hexdigest()


def load_model(path: str) -> MlpClassifier:
    """Read a model written by ``save_model``.

    Raises:
        FormatVersionMismatch: the file was written by another format version
        CorruptFile: truncated file, bad magic or checksum failure
    """
    with open(path, "rb") as f:
        blob = f.read()
    model = decode_model(blob, source=path)
    logger.info(f"Loaded {model.label_set.attribute.value} model {model.layer_dims} from {path}")
    return model
