"""Flat binary parameter files.

Layout::

    b"SETATTN-PARAMS"  format version (u32 LE)
    header length (u64 LE)  header: canonical JSON (sorted keys)
    parameter count (u32 LE)
    per parameter: name length (u16 LE), utf-8 name, ndim (u8),
                   dims (u32 LE each), float64 LE data in row-major order

Parameters are written in the order of the mapping passed in, which is the
deterministic construction order of every model in this package.
"""
from __future__ import annotations

import io
import json
import struct

import numpy as np

MAGIC = b"SETATTN-PARAMS"
VERSION = 1


class ParamsFormatError(ValueError):
    pass


def dumps(params: dict, header: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    head = json.dumps(header or {}, sort_keys=True, separators=(",", ":")).encode()
    buf.write(struct.pack("<Q", len(head)))
    buf.write(head)
    buf.write(struct.pack("<I", len(params)))
    for name, value in params.items():
        arr = np.ascontiguousarray(value, dtype="<f8")
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def loads(data: bytes):
    """Return ``(params, header)``."""
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ParamsFormatError("truncated parameter file")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(len(MAGIC))) != MAGIC:
        raise ParamsFormatError("not a parameter file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ParamsFormatError(f"unsupported parameter file version {version}")
    (hlen,) = struct.unpack("<Q", take(8))
    header = json.loads(bytes(take(hlen)).decode())
    (count,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(bytes(take(8 * size)), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(view):
        raise ParamsFormatError("trailing bytes after parameters")
    return params, header


def save(path, params: dict, header: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(params, header))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
