"""Binary container for named arrays.

Layout (little-endian)::

    b"NEOB" | u32 version=1 | u32 entry count
    per entry:
        u16 name length | name (UTF-8) | u8 dtype code | u8 rank
        u64 dim x rank | raw data

dtype codes: 0=f64, 1=f32, 2=u32, 3=i64.  Array data is written in
column-major (Fortran) order so that an N x m field matrix is stored one
column after another.
"""
from __future__ import annotations

import os
import struct
from typing import BinaryIO, Mapping

import numpy as np

MAGIC = b"NEOB"
VERSION = 1

DTYPE_CODES = {
    np.dtype("<f8"): 0,
    np.dtype("<f4"): 1,
    np.dtype("<u4"): 2,
    np.dtype("<i8"): 3,
}
CODE_DTYPES = {code: dt for dt, code in DTYPE_CODES.items()}


class BundleError(ValueError):
    pass


def _normalize(value) -> np.ndarray:
    arr = np.asarray(value)
    kind, size = arr.dtype.kind, arr.dtype.itemsize
    if kind == "f" and size == 8:
        target = "<f8"
    elif kind == "f" and size == 4:
        target = "<f4"
    elif kind == "u" and size <= 4:
        target = "<u4"
    elif kind in "iub":
        target = "<i8"
    else:
        raise BundleError(f"unsupported dtype {arr.dtype}")
    return arr.astype(target, copy=False)


def write_bundle(fh: BinaryIO, arrays: Mapping[str, np.ndarray]) -> None:
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, len(arrays)))
    for name, value in arrays.items():
        arr = _normalize(value)
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF:
            raise BundleError(f"entry name too long: {name[:40]}...")
        if arr.ndim > 255:
            raise BundleError("rank above 255")
        fh.write(struct.pack("<H", len(raw_name)))
        fh.write(raw_name)
        fh.write(struct.pack("<BB", DTYPE_CODES[arr.dtype], arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="F"))


def read_bundle(fh: BinaryIO) -> dict[str, np.ndarray]:
    def take(n: int) -> bytes:
        chunk = fh.read(n)
        if len(chunk) != n:
            raise BundleError("truncated bundle")
        return chunk

    if take(4) != MAGIC:
        raise BundleError("bad magic, not a NEOB bundle")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise BundleError(f"unsupported bundle version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        code, rank = struct.unpack("<BB", take(2))
        if code not in CODE_DTYPES:
            raise BundleError(f"unknown dtype code {code} for entry {name!r}")
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        dt = CODE_DTYPES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        data = take(nbytes)
        out[name] = np.frombuffer(data, dtype=dt).reshape(dims, order="F").copy()
    if fh.read(1):
        raise BundleError("trailing bytes after last entry")
    return out


def save(path: str | os.PathLike, arrays: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        write_bundle(fh, arrays)


def load(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return read_bundle(fh)
