"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable; the compiled module in
``_ckernels.pyx`` implements the same contracts. ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Sample ``image`` (H, W, C) at fractional pixel coordinates.

    A coordinate is valid when it lies inside ``[0, W-1] x [0, H-1]`` so the
    sampled value is a convex combination of four in-bounds taps. Invalid
    coordinates produce zeros.

    Returns ``(values (N, C), valid (N,) bool)``.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    h, w = image.shape[0], image.shape[1]

    valid = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    valid &= np.isfinite(xs) & np.isfinite(ys)

    x = np.where(valid, xs, 0.0)
    y = np.where(valid, ys, 0.0)
    x0 = np.clip(np.floor(x).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.intp), 0, max(h - 2, 0))
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]

    v00 = image[y0, x0]
    v01 = image[y0, x0 + 1]
    v10 = image[y0 + 1, x0]
    v11 = image[y0 + 1, x0 + 1]
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    out = top * (1.0 - fy) + bot * fy
    out[~valid] = 0.0
    return out, valid


def covariance_chain(phis: np.ndarray, qds: np.ndarray, p0: np.ndarray) -> np.ndarray:
    """Run the covariance recursion ``P <- Phi P Phi^T + Qd`` over a step stack.

    ``phis`` and ``qds`` are (T, n, n); ``p0`` is (n, n). Each step is
    re-symmetrized. Returns the full (T+1, n, n) trajectory with the prior
    at index 0.
    """
    phis = np.asarray(phis, dtype=np.float64)
    qds = np.asarray(qds, dtype=np.float64)
    t, n = phis.shape[0], phis.shape[1]
    out = np.empty((t + 1, n, n))
    out[0] = p0
    p = np.array(p0, dtype=np.float64)
    for k in range(t):
        p = phis[k] @ p @ phis[k].T + qds[k]
        p = 0.5 * (p + p.T)
        out[k + 1] = p
    return out
