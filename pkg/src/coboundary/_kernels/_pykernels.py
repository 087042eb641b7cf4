"""Reference (numpy) implementations of the hot kernels.

Array conventions shared with the compiled module:

* series arrays have shape ``(J, P, n, n)``: J epsilon orders, P grid nodes;
* all arrays are C-contiguous ``complex128``.
"""
import numpy as np


def cauchy_matmul(u, v):
    """Truncated Cauchy product ``out[j] = sum_{a+b=j} u[a] @ v[b]``."""
    J = u.shape[0]
    out = np.zeros_like(u)
    for a in range(J):
        if not u[a].any():
            continue
        out[a:] += np.matmul(u[a], v[: J - a])
    return out


def series_inverse(u, w0):
    """Inverse of a matrix-valued power series given ``w0 = u[0]^{-1}``.

    ``w[j] = -w0 @ sum_{i=1..j} u[i] @ w[j-i]``.
    """
    J = u.shape[0]
    w = np.zeros_like(u)
    w[0] = w0
    for j in range(1, J):
        acc = np.zeros_like(w0)
        for i in range(1, j + 1):
            acc += u[i] @ w[j - i]
        w[j] = -(w0 @ acc)
    return w


def orbit_product(vals):
    """Ordered product along axis 1, latest factor leftmost.

    ``vals`` has shape ``(B, N, n, n)``; returns ``vals[:, N-1] @ ... @ vals[:, 0]``.
    """
    out = vals[:, 0].copy()
    for j in range(1, vals.shape[1]):
        out = vals[:, j] @ out
    return out
