"""Bytes-to-image conversion for image-based classifiers."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import EmptyInput

SIDE = 100


def to_grayscale(data) -> np.ndarray:
    """Lay bytes row-major into a zero-padded w x w square (w = ceil(sqrt n)) and
    resample to 100 x 100 by nearest neighbour. Returns uint8."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    n = buf.size
    if n == 0:
        raise EmptyInput("cannot image an empty byte string")
    w = math.isqrt(n)
    if w * w < n:
        w += 1
    square = np.zeros(w * w, dtype=np.uint8)
    square[:n] = buf
    square = square.reshape(w, w)
    idx = np.arange(SIDE) * w // SIDE
    return square[np.ix_(idx, idx)]


class GrayscaleImager(TransformerMixin, BaseEstimator):
    """Turn binaries into flattened 10,000-pixel vectors scaled to [0, 1]."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return np.stack([to_grayscale(b).reshape(-1) / 255.0 for b in X])
