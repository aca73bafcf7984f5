"""Versioned binary records for models, forecast caches and series caches.

Layout (all integers little-endian)::

    magic   4 bytes   b"BTTF"
    kind    4 bytes   ASCII tag, e.g. b"MODL", b"FCST"
    version u32
    hlen    u32       length of the JSON header in bytes
    header  hlen      UTF-8 JSON, sorted keys, no whitespace
    payload           float64 little-endian, row-major

The header always carries ``shape`` (list of ints) for the payload. Records
are bit-exact on round trip and byte-stable for equal content.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import DataFormatError

MAGIC = b"BTTF"
VERSION = 1
_PREFIX = struct.Struct("<4s4sII")


def pack(kind: bytes, header: dict, payload: np.ndarray) -> bytes:
    if len(kind) != 4:
        raise ValueError("record kind must be 4 bytes")
    payload = np.ascontiguousarray(payload, dtype="<f8")
    header = dict(header, shape=list(payload.shape))
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return _PREFIX.pack(MAGIC, kind, VERSION, len(hbytes)) + hbytes + payload.tobytes()


def unpack(data: bytes, kind: bytes) -> tuple[dict, np.ndarray]:
    if len(data) < _PREFIX.size:
        raise DataFormatError("truncated record")
    magic, got_kind, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise DataFormatError("not a BTTF record")
    if got_kind != kind:
        raise DataFormatError(f"record kind {got_kind!r}, expected {kind!r}")
    if version != VERSION:
        raise DataFormatError(f"unsupported record version {version}")
    start = _PREFIX.size
    header = json.loads(data[start:start + hlen].decode())
    shape = tuple(header["shape"])
    payload = np.frombuffer(data, dtype="<f8", offset=start + hlen)
    if payload.size != int(np.prod(shape)):
        raise DataFormatError(f"payload holds {payload.size} values, header shape {shape}")
    return header, payload.reshape(shape).astype(np.float64)


def atomic_write(path, data: bytes | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_matrix(path, matrix: np.ndarray, **header) -> Path:
    """Forecast/series cache: a FCST record holding a 1-D or 2-D array."""
    return atomic_write(path, pack(b"FCST", header, np.asarray(matrix)))


def load_matrix(path) -> tuple[dict, np.ndarray]:
    return unpack(Path(path).read_bytes(), b"FCST")
