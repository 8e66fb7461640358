"""Local linear regression smoother with tricube weights."""

from __future__ import annotations

import math

import numpy as np


def local_linear_smooth(x, y, span: float) -> np.ndarray:
    """Smooth ``y`` against ``x`` by locally weighted linear fits.

    For every ``x[i]`` the ``ceil(span * n)`` nearest points (at least two)
    are weighted with the tricube kernel ``(1 - (d / h)**3)**3``, where ``h``
    is the distance to the farthest of them, and a weighted straight line is
    evaluated at ``x[i]``. No robustness iterations are performed.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if y.shape != x.shape:
        raise ValueError("x and y must have the same shape")
    if not 0.0 < span <= 1.0:
        raise ValueError(f"span must lie in (0, 1], got {span}")
    if n < 3:
        return y.copy()
    k = min(n, max(2, math.ceil(span * n)))
    out = np.empty(n)
    for i in range(n):
        dist = np.abs(x - x[i])
        idx = np.argsort(dist, kind="stable")[:k]
        h = dist[idx[-1]]
        if h <= 0.0:
            out[i] = y[idx].mean()
            continue
        # 1.0001 keeps the k-th neighbour in the fit with a tiny weight
        w = (1.0 - np.clip(dist[idx] / (1.0001 * h), 0.0, 1.0) ** 3) ** 3
        xs, ys = x[idx] - x[i], y[idx]
        sw = w.sum()
        mx = (w * xs).sum() / sw
        my = (w * ys).sum() / sw
        sxx = (w * (xs - mx) ** 2).sum()
        if sxx <= 1e-300:
            out[i] = my
        else:
            slope = (w * (xs - mx) * (ys - my)).sum() / sxx
            out[i] = my - slope * mx
    return out
