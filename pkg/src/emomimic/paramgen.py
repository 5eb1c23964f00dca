"""Maximum-likelihood parameter generation: smooth static trajectories from
predicted static + delta + delta-delta means.

Per scalar stream the generated trajectory minimizes the variance-weighted
squared error between its own (static, delta, delta-delta) expansion and
the predicted means. The normal equations form a pentadiagonal SPD system
solved in banded form; tests cross-check against a dense solve.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solveh_banded

DELTA_WINDOW = (-0.5, 0.0, 0.5)
DELTA2_WINDOW = (1.0, -2.0, 1.0)


def window_matrix(window: tuple, n_frames: int) -> np.ndarray:
    """Dense (T, T) matrix applying a 3-tap window with replicated edges.

    Row t computes w[0]*x[t-1] + w[1]*x[t] + w[2]*x[t+1], with x[-1] := x[0]
    and x[T] := x[T-1]. Used directly by the dense test oracle; the banded
    solver accumulates the same rows without materializing the matrix.
    """
    w = np.asarray(window, dtype=np.float64)
    m = np.zeros((n_frames, n_frames))
    for t in range(n_frames):
        for tap, col in zip(w, (t - 1, t, t + 1)):
            c = min(max(col, 0), n_frames - 1)
            m[t, c] += tap
    return m


def _window_rows(window: tuple, n_frames: int):
    """Yield (t, cols, taps) for each row of the window matrix."""
    w = np.asarray(window, dtype=np.float64)
    for t in range(n_frames):
        cols, taps = [], []
        for tap, col in zip(w, (t - 1, t, t + 1)):
            c = min(max(col, 0), n_frames - 1)
            if cols and cols[-1] == c:
                taps[-1] += tap
            else:
                cols.append(c)
                taps.append(tap)
        yield t, cols, taps


def mlpg_stream(
    static_mean: np.ndarray,
    delta_mean: np.ndarray,
    delta2_mean: np.ndarray,
    variances: tuple[float, float, float],
) -> np.ndarray:
    """Generate one scalar stream's static trajectory.

    ``variances`` are the (static, delta, delta-delta) model variances;
    they must be positive.
    """
    vs, vd, va = variances
    if vs <= 0 or vd <= 0 or va <= 0:
        raise ValueError(f"variances must be positive, got {variances}")
    ms = np.asarray(static_mean, dtype=np.float64)
    md = np.asarray(delta_mean, dtype=np.float64)
    ma = np.asarray(delta2_mean, dtype=np.float64)
    n = len(ms)
    if len(md) != n or len(ma) != n:
        raise ValueError("stream means must share one frame count")
    if n == 0:
        raise ValueError("empty stream")

    # ab holds the upper band form for solveh_banded: ab[2-d, j] = A[j-d, j]
    bandwidth = 2
    ab = np.zeros((bandwidth + 1, n))
    rhs = np.zeros(n)

    ab[bandwidth, :] += 1.0 / vs
    rhs += ms / vs

    for window, mean, var in ((DELTA_WINDOW, md, vd), (DELTA2_WINDOW, ma, va)):
        for t, cols, taps in _window_rows(window, n):
            for ci, tci in zip(cols, taps):
                rhs[ci] += tci * mean[t] / var
                for cj, tcj in zip(cols, taps):
                    d = cj - ci
                    if 0 <= d <= bandwidth:
                        ab[bandwidth - d, cj] += tci * tcj / var
    return solveh_banded(ab, rhs)


def mlpg(
    means: np.ndarray, variances: np.ndarray, n_static: int
) -> np.ndarray:
    """Generate all static trajectories from stacked (static, delta,
    delta-delta) mean frames.

    ``means`` has shape (T, 3 * n_static); columns are the static block,
    then delta, then delta-delta. ``variances`` is the matching global
    diagonal, shape (3 * n_static,). Returns (T, n_static).
    """
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if means.ndim != 2 or means.shape[1] != 3 * n_static:
        raise ValueError(f"means shape {means.shape} does not match 3*{n_static} columns")
    if variances.shape != (3 * n_static,):
        raise ValueError(f"variances shape {variances.shape} does not match {3 * n_static}")
    if np.any(variances <= 0):
        raise ValueError("variances must be positive")
    out = np.empty((means.shape[0], n_static))
    for d in range(n_static):
        out[:, d] = mlpg_stream(
            means[:, d],
            means[:, n_static + d],
            means[:, 2 * n_static + d],
            (variances[d], variances[n_static + d], variances[2 * n_static + d]),
        )
    return out


def dynamic_features(statics: np.ndarray) -> np.ndarray:
    """Append delta and delta-delta blocks to a (T, D) static matrix."""
    statics = np.atleast_2d(np.asarray(statics, dtype=np.float64))
    padded = np.vstack([statics[:1], statics, statics[-1:]])
    delta = 0.5 * (padded[2:] - padded[:-2])
    delta2 = padded[:-2] - 2.0 * padded[1:-1] + padded[2:]
    return np.hstack([statics, delta, delta2])
