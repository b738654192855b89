"""File formats: binary pattern blocks, tensor bundles, CSV and JSON export.

Binary pattern block (little-endian)::

    b"AMK1" | D: u64 | K: u64 | kind: u8 (0 binary, 1 real) | D*K f64, row-major

Tensor bundle, used for weight sets and sketches::

    b"AMB1" | count: u64 | count sections
    section = name_len: u16 | name: utf-8 | ndim: u8 | dims: ndim * u64 | pattern block

A section's pattern block stores the tensor reshaped to
``prod(dims[:-1]) x dims[-1]`` (scalars and vectors become ``1 x 1`` / ``n x 1``).
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import PatternMatrix
from .errors import ValidationError

MAGIC = b"AMK1"
BUNDLE_MAGIC = b"AMB1"
_KIND_CODE = {"binary": 0, "real": 1}
_CODE_KIND = {0: "binary", 1: "real"}


def _pack_block(data: np.ndarray, kind: str) -> bytes:
    data = np.ascontiguousarray(data, dtype="<f8")
    D, K = data.shape
    return MAGIC + struct.pack("<QQB", D, K, _KIND_CODE[kind]) + data.tobytes(order="C")


def _unpack_block(buf: bytes, offset: int = 0) -> tuple[np.ndarray, str, int]:
    if buf[offset:offset + 4] != MAGIC:
        raise ValidationError("bad magic: not an AMK1 pattern block")
    try:
        D, K, code = struct.unpack_from("<QQB", buf, offset + 4)
    except struct.error as exc:
        raise ValidationError("truncated AMK1 header") from exc
    if code not in _CODE_KIND:
        raise ValidationError(f"unknown kind byte {code}")
    start = offset + 4 + 17
    end = start + 8 * D * K
    if len(buf) < end:
        raise ValidationError("truncated AMK1 payload")
    data = np.frombuffer(buf, dtype="<f8", count=D * K, offset=start).astype(np.float64).reshape(D, K)
    return data, _CODE_KIND[code], end


def dumps_patterns(p: PatternMatrix) -> bytes:
    return _pack_block(p.data, p.kind)


def loads_patterns(buf: bytes) -> PatternMatrix:
    data, kind, end = _unpack_block(buf)
    if end != len(buf):
        raise ValidationError("trailing bytes after AMK1 block")
    return PatternMatrix(data, kind)


def save_patterns(path, p: PatternMatrix) -> None:
    Path(path).write_bytes(dumps_patterns(p))


def load_patterns(path) -> PatternMatrix:
    """Load a pattern matrix from ``.csv`` or the binary block format."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_patterns_csv(path)
    return loads_patterns(path.read_bytes())


def save_patterns_csv(path, p: PatternMatrix) -> None:
    header = [f"m{mu}" for mu in range(p.K)]
    write_csv(path, header, p.data.tolist())


def load_patterns_csv(path, kind: str | None = None) -> PatternMatrix:
    """Read a headered CSV holding one neuron per row and one memory per column."""
    header, rows = read_csv(path)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    if data.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged rows")
    if kind is None:
        kind = "binary" if np.all(np.abs(data) == 1.0) else "real"
    return PatternMatrix(data, kind)


def dumps_bundle(tensors: Mapping[str, np.ndarray]) -> bytes:
    out = [BUNDLE_MAGIC, struct.pack("<Q", len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype=np.float64)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 255:
            raise ValidationError(f"section {name!r} cannot be encoded")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        rows = int(np.prod(arr.shape[:-1])) if arr.ndim >= 1 else 1
        cols = arr.shape[-1] if arr.ndim >= 1 else 1
        out.append(_pack_block(arr.reshape(rows, cols), "real"))
    return b"".join(out)


def loads_bundle(buf: bytes) -> dict[str, np.ndarray]:
    if buf[:4] != BUNDLE_MAGIC:
        raise ValidationError("bad magic: not an AMB1 bundle")
    (count,) = struct.unpack_from("<Q", buf, 4)
    pos = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
        pos += 8 * ndim
        data, _, pos = _unpack_block(buf, pos)
        tensors[name] = data.reshape(dims)
    if pos != len(buf):
        raise ValidationError("trailing bytes after bundle")
    return tensors


def save_bundle(path, tensors: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps_bundle(tensors))


def load_bundle(path) -> dict[str, np.ndarray]:
    return loads_bundle(Path(path).read_bytes())


def fmt_float(x) -> str:
    """Shortest-stable text for a number: 17 significant digits for floats."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    return fmt_float(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValidationError(f"row length {len(row)} does not match header length {len(header)}")
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV with a fixed header; no rows gives a header-only file."""
    text = csv_text(header, rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return header, rows


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            # round trip through 17 digits keeps the exact double
            return float(format(x, ".17g"))
        return None
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(json_text(obj))


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
