"""Chebyshev-Gauss-Lobatto nodes, barycentric interpolation and differentiation.

Nodes are ``x_j = cos(pi j / (M - 1))`` for ``j = 0..M-1`` (descending, so
``x_0 = 1`` and ``x_{M-1} = -1``).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def nodes(M: int) -> np.ndarray:
    x = np.cos(np.pi * np.arange(M) / (M - 1))
    x[np.abs(x) < 1e-15] = 0.0
    if M % 2 == 1:
        x[M // 2] = 0.0
    x.setflags(write=False)
    return x


@lru_cache(maxsize=32)
def _signed_weights(M: int) -> np.ndarray:
    w = np.where(np.arange(M) % 2 == 0, 1.0, -1.0)
    w[0] *= 0.5
    w[-1] *= 0.5
    w.setflags(write=False)
    return w


def interp_matrix(M: int, x) -> np.ndarray:
    """Rows of barycentric interpolation weights, shape ``(len(x), M)``.

    Row ``p`` maps node values to the value of the interpolant at ``x[p]``.
    Points that coincide with a node get the exact unit row.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xn = nodes(M)
    w = _signed_weights(M)
    diff = x[:, None] - xn[None, :]
    hit = diff == 0.0
    diff[hit] = 1.0
    c = w / diff
    rows = c / c.sum(axis=1, keepdims=True)
    on_node = hit.any(axis=1)
    if on_node.any():
        rows[on_node] = hit[on_node].astype(float)
    return rows


def diff_rows(M: int, rows) -> np.ndarray:
    """Selected rows of the spectral differentiation matrix, shape ``(R, M)``.

    Off-diagonal entries use the sine form of ``x_i - x_j`` to avoid
    cancellation for large ``M``; the diagonal is the negative row sum.
    """
    rows = np.atleast_1d(np.asarray(rows, dtype=int))
    j = np.arange(M)
    c = np.where(j % 2 == 0, 1.0, -1.0)
    c[0] *= 2.0
    c[-1] *= 2.0
    i = rows[:, None]
    h = np.pi / (2 * (M - 1))
    dx = 2.0 * np.sin(h * (i + j[None, :])) * np.sin(h * (j[None, :] - i))
    same = i == j[None, :]
    dx[same] = 1.0
    D = (c[rows][:, None] / c[None, :]) / dx
    D[same] = 0.0
    D[same] = -D.sum(axis=1)
    return D


@lru_cache(maxsize=8)
def diff_matrix(M: int) -> np.ndarray:
    D = diff_rows(M, np.arange(M))
    D.setflags(write=False)
    return D
