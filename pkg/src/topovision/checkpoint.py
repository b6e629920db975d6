"""Versioned binary model checkpoints.

Layout, all integers little-endian:

    bytes 0-3   magic  b"CTVR"
    u32         format version (currently 1)
    u32         metadata length, then that many bytes of UTF-8 JSON
                (hyperparameters, class labels, input shape, history)
    u32         array count, then per array:
                    u16 name length, name bytes (UTF-8)
                    u8  ndim, then ndim x u32 dimensions
    raw data    float64 little-endian array bodies, in table order

The metadata JSON is enough to rebuild the estimator; the arrays restore
its trained parameters verbatim.
"""

import json
import struct

import numpy as np

from .classifier import ConvRecurrentClassifier
from .exceptions import CheckpointError

MAGIC = b"CTVR"
VERSION = 1


def save_model(model, path):
    """Write a fitted ConvRecurrentClassifier to ``path``."""
    if not hasattr(model, "params_"):
        raise ValueError("cannot checkpoint an unfitted model")
    meta = {
        "hyperparams": model.get_params(),
        "classes": [_jsonable(c) for c in model.classes_],
        "input_shape": list(model.input_shape_),
        "history": list(model.history_),
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    names = sorted(model.params_)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            encoded = name.encode("utf-8")
            array = model.params_[name]
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", array.ndim))
            for dim in array.shape:
                fh.write(struct.pack("<I", dim))
        for name in names:
            fh.write(np.ascontiguousarray(model.params_[name], dtype="<f8").tobytes())


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.str_,)):
        return str(value)
    return value


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_model(path):
    """Rebuild a fitted ConvRecurrentClassifier from ``path``."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise CheckpointError(f"{path} is not a model checkpoint (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version}; expected {VERSION}"
            )
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        try:
            meta = json.loads(_read_exact(fh, meta_len, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint metadata: {exc}") from exc
        (n_arrays,) = struct.unpack("<I", _read_exact(fh, 4, "array count"))
        table = []
        for _ in range(n_arrays):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "array name length"))
            name = _read_exact(fh, name_len, "array name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "array rank"))
            shape = tuple(
                struct.unpack("<I", _read_exact(fh, 4, f"{name} dimension"))[0]
                for _ in range(ndim)
            )
            table.append((name, shape))
        params = {}
        for name, shape in table:
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = _read_exact(fh, count * 8, f"{name} data")
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise CheckpointError("trailing bytes after checkpoint payload")

    try:
        model = ConvRecurrentClassifier(**meta["hyperparams"])
        model.classes_ = np.asarray(meta["classes"])
        model.input_shape_ = tuple(meta["input_shape"])
        model.history_ = list(meta["history"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint metadata is incomplete: {exc}") from exc
    model.params_ = params
    model.plan_ = model._plan(*model.input_shape_)
    return model
