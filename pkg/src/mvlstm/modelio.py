"""Model file container.

Byte layout (all integers little-endian)::

    0   8 bytes   magic  b"MVLSTM\\x00\\x00"
    8   uint32    schema version (currently 1)
    12  uint32    header length H in bytes
    16  H bytes   UTF-8 JSON header, keys sorted, no insignificant whitespace
    16+H          payload: float64 little-endian blocks, C order, back to back

The header records ``shape`` (n_vars, per_var_dim, window), ``columns``
(target last), free-form ``meta`` and ``blocks``: a list of
``{"name", "shape", "offset", "count"}`` where ``offset`` is the byte
offset of the block from the start of the payload.  Blocks are the nine
parameter arrays followed by ``norm_mean`` and ``norm_std``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cell import PARAM_NAMES, CellShape, MvLstmParams, expected_shapes
from .errors import DataError

MAGIC = b"MVLSTM\x00\x00"
SCHEMA_VERSION = 1
_PREFIX = struct.Struct("<8sII")


@dataclass
class ModelFile:
    params: MvLstmParams
    shape: CellShape
    columns: list[str]
    mean: np.ndarray
    std: np.ndarray
    meta: dict = field(default_factory=dict)


def dumps(model: ModelFile) -> bytes:
    model.params.validate()
    blocks = [(name, getattr(model.params, name)) for name in PARAM_NAMES]
    blocks += [("norm_mean", model.mean), ("norm_std", model.std)]
    table, payload, offset = [], [], 0
    for name, arr in blocks:
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        table.append({"name": name, "shape": list(np.shape(arr)), "offset": offset,
                      "count": int(np.size(arr))})
        payload.append(raw)
        offset += len(raw)
    header = {
        "shape": {"n_vars": model.shape.n_vars, "per_var_dim": model.shape.per_var_dim,
                  "window": model.shape.window},
        "columns": list(model.columns),
        "meta": model.meta,
        "blocks": table,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, SCHEMA_VERSION, len(hbytes)) + hbytes + b"".join(payload)


def loads(data: bytes) -> ModelFile:
    if len(data) < _PREFIX.size:
        raise DataError("model file is truncated")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise DataError("not an MV-LSTM model file (bad magic)")
    if version != SCHEMA_VERSION:
        raise DataError(f"unsupported model schema version {version}")
    try:
        header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt model header: {exc}") from None
    base = _PREFIX.size + hlen
    arrays = {}
    for blk in header["blocks"]:
        start = base + blk["offset"]
        end = start + 8 * blk["count"]
        if end > len(data):
            raise DataError(f"model block {blk['name']} is truncated")
        arr = np.frombuffer(data[start:end], dtype="<f8").astype(np.float64)
        arrays[blk["name"]] = arr.reshape(blk["shape"])
    s = header["shape"]
    shape = CellShape(s["n_vars"], s["per_var_dim"], s["window"])
    missing = [k for k in expected_shapes(shape.n_vars, shape.per_var_dim) if k not in arrays]
    if missing:
        raise DataError(f"model file lacks blocks {missing}")
    params = MvLstmParams(**{k: arrays[k] for k in PARAM_NAMES}).validate()
    return ModelFile(params, shape, header["columns"], arrays["norm_mean"],
                     arrays["norm_std"], header.get("meta", {}))


def save(model: ModelFile, path: str | Path) -> None:
    Path(path).write_bytes(dumps(model))


def load(path: str | Path) -> ModelFile:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror}") from None
    return loads(data)
