#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
This module contains auxiliary functions.

Remarks: 

- All vectors are treated as of type [n,]
- Data matrices are treated as of type [n, d] where each column is a frame
- Frame buffers are filled from left to right

"""

import zlib

import numpy as np
from pydantic import ValidationError

from .exceptions import InvalidConfig


def rng_stream(seed, *names):
    """
    Named, portable pseudo-random stream.

    The generator is a counter-based ``Philox`` bit generator keyed by ``seed`` and the stream ``names``.
    Two streams with different names never share draws, so changing the number of draws taken from one
    sub-generator does not perturb the others.

    Parameters
    ----------
    seed : : non-negative integer
        Base seed (64 bit).
    names : : strings or integers
        Stream path, e.g. ``("outliers", 1)`` for the outlier stream of segment 1.

    Returns
    -------
    A ``numpy.random.Generator``.

    """
    spawn_key = tuple(
        zlib.crc32(str(name).encode("utf-8")) if not isinstance(name, (int, np.integer)) else int(name)
        for name in names
    )
    seq = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))


def soft_threshold(M, tau):
    """
    Entrywise shrinkage :math:`\\text{sign}(m) \\max(|m| - \\tau, 0)`, the proximal operator of :math:`\\tau \\| \\cdot \\|_1`.

    """
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def rel_frob_err(Lhat, L):
    """
    Relative Frobenius error :math:`\\|\\hat L - L\\|_F / \\|L\\|_F`. Returns the absolute error if ``L`` vanishes.

    """
    denom = np.linalg.norm(L)
    err = np.linalg.norm(np.asarray(Lhat) - np.asarray(L))
    if denom == 0:
        return float(err)
    return float(err / denom)


class FrameBuffer:
    """
    Tumbling buffer of the last frames of a stream.

    Frames are stored as columns of an ``[n, capacity]`` array. Once full, the buffer must be cleared
    before new frames are pushed, i.e. consecutive windows are disjoint.

    Attributes
    ----------
    n : : integer
        Frame dimension.
    capacity : : integer
        Window length.

    """

    def __init__(self, n, capacity):
        self.n = n
        self.capacity = capacity
        self._data = np.zeros((n, capacity))
        self._count = 0

    def __len__(self):
        return self._count

    @property
    def full(self):
        return self._count == self.capacity

    def push(self, vec):
        if self.full:
            raise OverflowError("frame buffer is full; clear it before pushing")
        self._data[:, self._count] = vec
        self._count += 1

    def matrix(self):
        """
        Copy of the buffered frames as an ``[n, len(self)]`` array.

        """
        return self._data[:, :self._count].copy()

    def clear(self):
        self._count = 0


def parse_config(model_cls, data):
    """
    Validate ``data`` (a dictionary or a JSON string) against a pydantic model.

    Raises
    ------
    InvalidConfig
        Wrapping pydantic's ``ValidationError``.

    """
    try:
        if isinstance(data, (str, bytes)):
            return model_cls.model_validate_json(data)
        return model_cls.model_validate(data)
    except ValidationError as exc:
        raise InvalidConfig(f"invalid {model_cls.__name__}: {exc}") from exc


def load_config(model_cls, path):
    with open(path, "r") as f:
        return parse_config(model_cls, f.read())
