"""Slow, independent reference implementations used by the tests."""

from __future__ import annotations

import math

import numpy as np


def ext_source(j: int, n: int, mode: str) -> int:
    """Source sample of extended position ``j`` (scalar version)."""
    if mode == "periodic":
        return j % n
    # half-sample symmetric: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} x_{n-2} ...
    while j < 0 or j >= n:
        if j < 0:
            j = -1 - j
        if j >= n:
            j = 2 * n - 1 - j
    return j


def analysis_matrix(n: int, taps, origin: int, mode: str) -> np.ndarray:
    """Rows are the output coefficients of one filter-and-downsample step."""
    out = (n + 1) // 2
    A = np.zeros((out, n))
    for i in range(out):
        for k, h in enumerate(taps):
            A[i, ext_source(2 * i + k - origin, n, mode)] += h
    return A


def approx_oracle(img: np.ndarray, taps, origin: int, J: int, mode: str) -> np.ndarray:
    x = np.array(img, dtype=np.float64)
    for _ in range(J):
        Ar = analysis_matrix(x.shape[0], taps, origin, mode)
        Ac = analysis_matrix(x.shape[1], taps, origin, mode)
        x = Ar @ x @ Ac.T
    return x


def pearson(x, y) -> float:
    """Two-pass textbook Pearson correlation with scalar loops."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def roc_enumerate(score: np.ndarray, truth: np.ndarray, thresholds) -> list[tuple[float, float]]:
    """(FPR, TPR) per threshold by visiting every pixel."""
    pts = []
    npos = int(sum(1 for t in truth.ravel() if t))
    nneg = truth.size - npos
    for thr in thresholds:
        tp = fp = 0
        for s, t in zip(score.ravel().tolist(), truth.ravel().tolist()):
            if s > thr:
                if t:
                    tp += 1
                else:
                    fp += 1
        pts.append((fp / nneg, tp / npos))
    return pts
