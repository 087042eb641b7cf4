"""Complex square matrices as a Banach algebra / matrix Lie group.

Every function accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``
and acts elementwise over the leading axes, so the field module can apply
them at every grid node in one call.

The norm used throughout is the max row-sum (l-infinity operator) norm: it
is submultiplicative, exactly computable and equals 1 on the identity.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError, LogDomainError, SingularMatrixError

# exp: Taylor degree used after scaling ||A|| <= 1/2; remainder < 2e-20
_EXP_DEGREE = 16
_EXP_SCALE_NORM = 0.5
# log: square roots are taken until ||X|| <= this, then an atanh series
_LOG_ROOT_NORM = 0.1
_LOG_BALL = 0.5


def as_matrix(a, dim=None) -> np.ndarray:
    """Validate and return ``a`` as a complex array of square matrices."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 1:
        raise DomainError(f"expected square matrices, got shape {arr.shape}")
    if dim is not None and arr.shape[-1] != dim:
        raise DomainError(f"expected dimension {dim}, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("matrix entries must be finite")
    return arr


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def op_norm(a) -> np.ndarray | float:
    """Max row-sum norm; returns an array over the leading axes."""
    mag = np.abs(np.asarray(a))
    if mag.ndim >= 2 and mag.shape[-1] <= 8:
        # numpy reductions over a tiny trailing axis are slow; unroll them
        rows = mag[..., 0]
        for j in range(1, mag.shape[-1]):
            rows = rows + mag[..., j]
        out = rows[..., 0]
        for i in range(1, rows.shape[-1]):
            out = np.maximum(out, rows[..., i])
    else:
        out = mag.sum(axis=-1).max(axis=-1)
    return float(out) if out.ndim == 0 else out


def mat_mul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[-1] != b.shape[-1]:
        raise DomainError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return a @ b


def mat_inv(a, cond_limit: float = 1e14) -> np.ndarray:
    """Inverse by LU with partial pivoting.

    Raises :class:`SingularMatrixError` when any matrix in the stack is
    exactly singular or its norm condition number exceeds ``cond_limit``.
    """
    a = as_matrix(a)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    cond = np.asarray(op_norm(a)) * np.asarray(op_norm(inv))
    if not np.all(np.isfinite(inv)) or np.any(cond > cond_limit):
        raise SingularMatrixError("matrix is numerically rank deficient")
    return inv


def _taylor_expm1(x: np.ndarray) -> np.ndarray:
    # exp(x) - I = x (I + x/2 (I + x/3 (...)))
    eye = np.eye(x.shape[-1], dtype=x.dtype)
    acc = eye + x / _EXP_DEGREE
    for m in range(_EXP_DEGREE - 1, 1, -1):
        acc = eye + (x @ acc) / m
    return x @ acc


def mat_expm1(a) -> np.ndarray:
    """``exp(a) - Id`` with full relative accuracy for small ``a``."""
    a = as_matrix(a)
    norms = np.asarray(op_norm(a))
    steps = np.maximum(0, np.ceil(np.log2(np.maximum(norms, 1e-300) / _EXP_SCALE_NORM)))
    steps = steps.astype(int)
    scaled = a / (2.0 ** steps)[..., None, None]
    y = _taylor_expm1(scaled)
    # (I + y)^2 - I = y (2 I + y), applied only where squaring is pending
    for i in range(int(steps.max(initial=0))):
        active = (steps > i)[..., None, None]
        y = np.where(active, 2.0 * y + y @ y, y)
    return y


def mat_exp(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a Taylor polynomial."""
    a = as_matrix(a)
    return np.eye(a.shape[-1], dtype=np.complex128) + mat_expm1(a)


def _sqrt_near_identity(x: np.ndarray) -> np.ndarray:
    """Return ``y`` with ``(I + y)^2 = I + x`` (principal root)."""
    eye = np.eye(x.shape[-1], dtype=x.dtype)
    # Denman-Beavers for the root itself, then y = x (I + root)^{-1}
    # keeps full relative accuracy in y.
    y, z = eye + x, eye.copy()
    for _ in range(40):
        y_next = 0.5 * (y + np.linalg.inv(z))
        z = 0.5 * (z + np.linalg.inv(y))
        done = np.max(np.abs(y_next - y)) <= 1e-16 * max(1.0, np.max(np.abs(y_next)))
        y = y_next
        if done:
            break
    return np.swapaxes(np.linalg.solve(np.swapaxes(eye + y, -1, -2), np.swapaxes(x, -1, -2)), -1, -2)


def mat_log1p(x) -> np.ndarray:
    """Principal ``log(Id + x)`` for ``||x|| <= 1/2``."""
    x = as_matrix(x)
    norms = np.asarray(op_norm(x))
    if np.any(norms > _LOG_BALL + 1e-14):
        raise LogDomainError(
            f"|a - Id| = {float(norms.max()):.3g} exceeds {_LOG_BALL}; principal branch not guaranteed")
    roots = 0
    while float(np.max(op_norm(x), initial=0.0)) > _LOG_ROOT_NORM:
        x = _sqrt_near_identity(x)
        roots += 1
    eye = np.eye(x.shape[-1], dtype=x.dtype)
    # log(I + x) = 2 atanh(z), z = x (2I + x)^{-1}; |z| <= 0.053 here
    z = np.swapaxes(np.linalg.solve(np.swapaxes(2.0 * eye + x, -1, -2), np.swapaxes(x, -1, -2)), -1, -2)
    z2 = z @ z
    acc = eye / 21.0
    for m in range(19, 0, -2):
        acc = eye / m + z2 @ acc
    return (2.0 ** (roots + 1)) * (z @ acc)


def mat_log(a) -> np.ndarray:
    """Principal matrix logarithm, restricted to ``||a - Id|| <= 1/2``."""
    a = as_matrix(a)
    return mat_log1p(a - np.eye(a.shape[-1], dtype=np.complex128))
