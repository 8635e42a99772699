"""Versioned binary container shared by policy and autoencoder checkpoints.

Layout (little-endian)::

    magic[8] | u32 version | u32 header_len | header (JSON, utf-8)
    | raw array bytes, in header["arrays"] order | u32 crc32(all preceding bytes)

The JSON header carries a descriptor dict plus dtype/shape of each array.
"""
from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptFile, VersionMismatch


def write_container(path, magic: bytes, version: int, descriptor: dict, arrays) -> None:
    assert len(magic) == 8
    arrays = [np.ascontiguousarray(a) for a in arrays]
    header = dict(descriptor)
    header["arrays"] = [{"dtype": a.dtype.newbyteorder("<").str, "shape": list(a.shape)} for a in arrays]
    hbytes = json.dumps(header, sort_keys=True).encode()
    body = bytearray(magic)
    body += struct.pack("<II", version, len(hbytes))
    body += hbytes
    for a in arrays:
        body += a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(body))


def read_container(path, magic: bytes, version: int):
    """Return ``(descriptor, arrays)``; raises CorruptFile / VersionMismatch."""
    data = Path(path).read_bytes()
    if len(data) < 20 or data[:8] != magic:
        raise CorruptFile(f"{path}: bad magic or truncated header")
    file_version, hlen = struct.unpack("<II", data[8:16])
    if file_version != version:
        raise VersionMismatch(f"{path}: format version {file_version}, expected {version}")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise CorruptFile(f"{path}: checksum mismatch")
    try:
        header = json.loads(data[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{path}: unreadable header") from exc
    off = 16 + hlen
    arrays = []
    for spec in header.pop("arrays"):
        dt = np.dtype(spec["dtype"])
        n = int(np.prod(spec["shape"])) * dt.itemsize
        if off + n > len(data) - 4:
            raise CorruptFile(f"{path}: truncated array data")
        arrays.append(np.frombuffer(data[off:off + n], dtype=dt).reshape(spec["shape"]).astype(dt.newbyteorder("=")))
        off += n
    if off != len(data) - 4:
        raise CorruptFile(f"{path}: trailing bytes")
    return header, arrays
