"""Binary spinor-field files.

Layout: magic ``b"DFD1"``, node count ``M`` as little-endian uint64, then
``4*M`` little-endian float64 values ordered (Re phi1, Im phi1, Re phi2,
Im phi2) per node.  Reloading is bit exact.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .core import ArrayC, as_spinor_field

MAGIC = b"DFD1"
_HEADER = struct.Struct("<4sQ")


class FieldFormatError(ValueError):
    pass


def encode_field(field: ArrayC) -> bytes:
    u = as_spinor_field(field)
    body = u.view(np.float64).astype("<f8", copy=False)  # (M, 4) in the required order
    return _HEADER.pack(MAGIC, u.shape[0]) + body.tobytes()


def decode_field(data: bytes) -> ArrayC:
    if len(data) < _HEADER.size:
        raise FieldFormatError("file too short for header")
    magic, M = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}")
    expected = _HEADER.size + 32 * M
    if len(data) != expected:
        raise FieldFormatError(f"expected {expected} bytes for M={M}, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return values.view(np.complex128).reshape(M, 2).copy()


def write_field(path, field: ArrayC, params: Optional[Mapping[str, object]] = None) -> Path:
    """Write ``field`` atomically; ``params`` go to a ``.txt`` sidecar."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_bytes(encode_field(field))
        os.replace(tmp, path)
        if params is not None:
            lines = [f"{k}={v}" for k, v in params.items()]
            sidecar_path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write field file {path}: {exc}") from exc
    return path


def read_field(path) -> ArrayC:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read field file {path}: {exc}") from exc
    try:
        return decode_field(data)
    except FieldFormatError as exc:
        raise FieldFormatError(f"{path}: {exc}") from None


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".txt")
