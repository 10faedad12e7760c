"""Accurate summation."""

from __future__ import annotations

import math

import numpy as np


def fsum(a: np.ndarray, width: int = 4096) -> float:
    """Compensated sum of every entry of ``a``.

    Entries are folded row by row into ``width`` parallel accumulators with
    error-free TwoSum updates; the accumulators and their carried errors are
    then combined exactly with :func:`math.fsum`.
    """
    x = np.asarray(a, dtype=np.float64).ravel()
    if x.size <= width:
        return math.fsum(x.tolist())
    rows = -(-x.size // width)
    buf = np.zeros(rows * width)
    buf[: x.size] = x
    buf = buf.reshape(rows, width)
    s = buf[0].copy()
    c = np.zeros(width)
    for row in buf[1:]:
        t = s + row
        bp = t - s
        c += (s - (t - bp)) + (row - bp)
        s = t
    return math.fsum(s.tolist() + c.tolist())
