#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains the on-disk and on-pipe formats used across the package.

- ``SLRM`` matrix files: magic ``b"SLRM"``, ``u32`` rows, ``u32`` cols, then row-major little-endian ``float64``
- ``SLRB`` mask files: magic ``b"SLRB"``, ``u32`` rows, ``u32`` cols, then the row-major mask packed to bits (MSB first)
- CSV matrices: one matrix row per line, no header
- Framed frame streams: ``u32`` length ``n`` followed by ``n`` little-endian ``float64`` values, repeated

Remarks:

- All header integers are little-endian

"""

import struct

import numpy as np

from .exceptions import DimensionError

MATRIX_MAGIC = b"SLRM"
MASK_MAGIC = b"SLRB"
_HEADER = struct.Struct("<4sII")
_FRAME_LEN = struct.Struct("<I")


def _read_header(fh, magic):
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise DimensionError("truncated header")
    found, rows, cols = _HEADER.unpack(raw)
    if found != magic:
        raise DimensionError(f"bad magic {found!r}, expected {magic!r}")
    return rows, cols


def write_matrix(path, M):
    M = np.ascontiguousarray(M, dtype="<f8")
    if M.ndim != 2:
        raise DimensionError(f"only matrices can be written, got a {M.ndim}-D array")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, M.shape[0], M.shape[1]))
        fh.write(M.tobytes(order="C"))


def read_matrix(path):
    with open(path, "rb") as fh:
        rows, cols = _read_header(fh, MATRIX_MAGIC)
        payload = fh.read()
    if len(payload) != 8 * rows * cols:
        raise DimensionError(f"payload holds {len(payload)} bytes, header announces {rows}x{cols} doubles")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)


def write_mask(path, mask):
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionError(f"only 2-D masks can be written, got a {mask.ndim}-D array")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MASK_MAGIC, mask.shape[0], mask.shape[1]))
        fh.write(np.packbits(mask.ravel(order="C")).tobytes())


def read_mask(path):
    with open(path, "rb") as fh:
        rows, cols = _read_header(fh, MASK_MAGIC)
        payload = np.frombuffer(fh.read(), dtype=np.uint8)
    bits = np.unpackbits(payload, count=rows * cols)
    return bits.astype(bool).reshape(rows, cols)


def write_csv(path, M):
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def read_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def write_frame(fh, vec):
    """
    Append one frame to a binary stream opened for writing.

    """
    vec = np.ascontiguousarray(vec, dtype="<f8").ravel()
    fh.write(_FRAME_LEN.pack(vec.size))
    fh.write(vec.tobytes())


def iter_frames(fh):
    """
    Yield frames from a binary stream until end of stream.

    Raises
    ------
    DimensionError
        On a truncated frame or a frame whose length differs from the first one.

    """
    n = None
    while True:
        raw = fh.read(_FRAME_LEN.size)
        if not raw:
            return
        if len(raw) != _FRAME_LEN.size:
            raise DimensionError("truncated frame header")
        (length,) = _FRAME_LEN.unpack(raw)
        if n is None:
            n = length
        elif length != n:
            raise DimensionError(f"frame length changed from {n} to {length}")
        payload = fh.read(8 * length)
        if len(payload) != 8 * length:
            raise DimensionError("truncated frame payload")
        yield np.frombuffer(payload, dtype="<f8").astype(float)
