"""Matrix-valued analytic families on T^d x [-1, 1]^d with an epsilon layer.

Storage
-------
An :class:`AngleActionField` holds Fourier coefficients in ``theta`` for all
modes ``|k|_inf <= K``; each coefficient is sampled at the tensor
Chebyshev-Gauss-Lobatto nodes in ``I``.  The coefficient array has shape::

    (2K+1,)*d + (M,)*d + (n, n)

and axis position ``p`` along a mode axis corresponds to ``k = p - K``.
An :class:`EpsSeriesField` stacks ``Lmax + 1`` such arrays along a leading
epsilon-order axis.

Products are formed on a uniform ``theta`` grid of ``2(2K+1)`` points per
dimension, which is free of aliasing for products of two (and three)
band-limited factors; modes beyond ``K`` are then discarded.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import numpy as np

from . import _kernels, chebyshev
from .algebra import as_matrix, op_norm
from .errors import DomainError, SpecMismatch

JSON_FORMAT = "coboundary.EpsSeriesField/1"
_MAX_DIM = 3
# dense differentiation matrices are used up to this size; FFT beyond
_DENSE_DIFF_LIMIT = 256
# points per chunk when mapping a function over grid points
_CHUNK = 16384


@dataclass(frozen=True)
class DomainSpec:
    """Discretization and analyticity parameters."""

    d: int
    rho0: float
    K: int
    M: int
    Lmax: int
    eps_radius: float

    def __post_init__(self):
        for name in ("d", "K", "M", "Lmax"):
            val = getattr(self, name)
            if int(val) != val:
                raise DomainError(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        object.__setattr__(self, "rho0", float(self.rho0))
        object.__setattr__(self, "eps_radius", float(self.eps_radius))
        if not 1 <= self.d <= _MAX_DIM:
            raise DomainError(f"d must be in 1..{_MAX_DIM}, got {self.d}")
        if self.K < 1 or self.M < 2 or self.Lmax < 1:
            raise DomainError("need K >= 1, M >= 2, Lmax >= 1")
        if not (self.rho0 > 0 and self.eps_radius > 0):
            raise DomainError("rho0 and eps_radius must be positive")
        if not (math.isfinite(self.rho0) and math.isfinite(self.eps_radius)):
            raise DomainError("rho0 and eps_radius must be finite")

    @property
    def n_modes(self) -> int:
        return 2 * self.K + 1

    @property
    def n_orders(self) -> int:
        return self.Lmax + 1

    @property
    def theta_size(self) -> int:
        """Dealiased uniform grid size per angle dimension."""
        return 2 * (2 * self.K + 1)

    @property
    def mode_shape(self) -> tuple:
        return (self.n_modes,) * self.d

    @property
    def node_shape(self) -> tuple:
        return (self.M,) * self.d

    def block_shape(self, dim: int) -> tuple:
        return self.mode_shape + self.node_shape + (dim, dim)

    def mode_index(self, k) -> tuple:
        k = tuple(int(x) for x in np.atleast_1d(k))
        if len(k) != self.d or max(abs(x) for x in k) > self.K:
            raise DomainError(f"mode {k} outside |k|_inf <= {self.K} in dimension {self.d}")
        return tuple(x + self.K for x in k)

    def nodes(self) -> np.ndarray:
        return chebyshev.nodes(self.M)

    def node_grid(self) -> np.ndarray:
        """Chebyshev tensor nodes, shape ``(M,)*d + (d,)``."""
        x = self.nodes()
        return np.stack(np.meshgrid(*([x] * self.d), indexing="ij"), axis=-1)

    def mode_grid(self) -> np.ndarray:
        """Integer mode vectors, shape ``(2K+1,)*d + (d,)``."""
        k = np.arange(-self.K, self.K + 1)
        return np.stack(np.meshgrid(*([k] * self.d), indexing="ij"), axis=-1)

    @property
    def norm_theta_size(self) -> int:
        """Default theta samples for sup norms: dealiased size rounded up to a multiple of 4."""
        return 4 * -(-self.theta_size // 4)

    def theta_grid(self, ntheta: int | None = None) -> np.ndarray:
        n = self.theta_size if ntheta is None else int(ntheta)
        return np.arange(n) / n

    def replace(self, **changes) -> "DomainSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"d": self.d, "rho0": self.rho0, "K": self.K, "M": self.M,
                "Lmax": self.Lmax, "eps_radius": self.eps_radius}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DomainSpec":
        try:
            return cls(**{key: data[key] for key in ("d", "rho0", "K", "M", "Lmax", "eps_radius")})
        except KeyError as exc:
            raise DomainError(f"domain spec missing field {exc}") from None


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True, order="C")
    arr.setflags(write=False)
    return arr


def _check_block(spec: DomainSpec, coeffs: np.ndarray, lead: int) -> None:
    core = coeffs.shape[lead:]
    if len(core) != 2 * spec.d + 2 or core[:-2] != spec.mode_shape + spec.node_shape:
        raise SpecMismatch(f"coefficient shape {coeffs.shape} does not match {spec}")
    if core[-1] != core[-2] or core[-1] < 1:
        raise SpecMismatch(f"coefficient blocks must be square, got {core[-2:]}")
    if not np.all(np.isfinite(coeffs)):
        raise DomainError("field coefficients must be finite")


@dataclass(frozen=True, eq=False)
class AngleActionField:
    """Matrix-valued function of ``(theta, I)`` (see module docstring)."""

    spec: DomainSpec
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        arr = _readonly(self.coeffs)
        _check_block(self.spec, arr, 0)
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[-1]

    @classmethod
    def zeros(cls, spec: DomainSpec, dim: int) -> "AngleActionField":
        return cls(spec, np.zeros(spec.block_shape(dim), dtype=np.complex128))

    @classmethod
    def constant(cls, spec: DomainSpec, matrix) -> "AngleActionField":
        a = as_matrix(matrix)
        c = np.zeros(spec.block_shape(a.shape[-1]), dtype=np.complex128)
        c[spec.mode_index((0,) * spec.d)] = a
        return cls(spec, c)

    @classmethod
    def identity(cls, spec: DomainSpec, dim: int) -> "AngleActionField":
        return cls.constant(spec, np.eye(dim))

    @classmethod
    def from_modes(cls, spec: DomainSpec, modes: Mapping, dim: int | None = None) -> "AngleActionField":
        """Build from ``{k: block}``; a block is a matrix, a node array, or ``g(I) -> array``.

        Callables receive a tuple of ``d`` coordinate arrays of shape
        ``(M,)*d`` and return ``(M,)*d + (n, n)`` values.
        """
        blocks = {}
        for k, value in modes.items():
            if callable(value):
                I = tuple(np.moveaxis(spec.node_grid(), -1, 0))
                value = value(I)
            value = np.asarray(value, dtype=np.complex128)
            if value.ndim == 2:
                value = np.broadcast_to(value, spec.node_shape + value.shape)
            blocks[spec.mode_index(k)] = value
        if dim is None:
            if not blocks:
                raise DomainError("dimension required for an empty mode map")
            dim = next(iter(blocks.values())).shape[-1]
        c = np.zeros(spec.block_shape(dim), dtype=np.complex128)
        for idx, value in blocks.items():
            c[idx] = value
        return cls(spec, c)

    @classmethod
    def from_function(cls, spec: DomainSpec, fn: Callable, ntheta: int | None = None) -> "AngleActionField":
        """Sample ``fn(theta, I)`` on a uniform-by-Chebyshev grid and project.

        ``theta`` and ``I`` are tuples of ``d`` arrays broadcastable to the
        grid ``(ntheta,)*d + (M,)*d``; ``fn`` returns values of shape
        ``grid + (n, n)``.  ``ntheta`` defaults to ``4(2K+1)``.
        """
        n = 2 * spec.theta_size if ntheta is None else int(ntheta)
        if n < spec.n_modes:
            raise DomainError(f"ntheta must be at least {spec.n_modes}")
        theta, I = _grid_coordinates(spec, n)
        vals = np.asarray(fn(theta, I), dtype=np.complex128)
        grid = (n,) * spec.d + spec.node_shape
        vals = np.broadcast_to(vals, grid + vals.shape[-2:])
        return cls(spec, _from_theta(vals, spec, n))

    def coeff(self, k) -> np.ndarray:
        return self.coeffs[self.spec.mode_index(k)]

    def on_grid(self, ntheta: int | None = None) -> np.ndarray:
        """Values on the uniform theta grid times the Chebyshev nodes."""
        n = self.spec.theta_size if ntheta is None else int(ntheta)
        return _to_theta(self.coeffs, self.spec, n)

    def evaluate(self, theta, I) -> np.ndarray:
        """Values at points ``(theta[p], I[p])``; both of shape ``(P, d)``."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        I = np.atleast_2d(np.asarray(I, dtype=float))
        out = np.empty((theta.shape[0], self.dim, self.dim), dtype=np.complex128)
        for p in range(theta.shape[0]):
            modes = interp_action(self.coeffs, self.spec, I[p])
            out[p] = fourier_eval(modes, self.spec, theta[p:p + 1])[0]
        return out

    def is_real_symmetric(self, tol: float = 1e-12) -> bool:
        flipped = self.coeffs[(slice(None, None, -1),) * self.spec.d]
        return bool(np.max(np.abs(flipped - np.conj(self.coeffs)), initial=0.0) <= tol)

    def as_series(self, order: int = 0) -> "EpsSeriesField":
        return EpsSeriesField.from_orders(self.spec, {order: self})

    def __add__(self, other):
        return field_add(self, other)

    def __sub__(self, other):
        return field_sub(self, other)

    def __neg__(self):
        return field_scale(self, -1.0)

    def __mul__(self, scalar):
        return field_scale(self, scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return field_mul(self, other)


@dataclass(frozen=True, eq=False)
class EpsSeriesField:
    """Truncated power series ``sum_j eps^j v^j`` for ``j = 0..Lmax``."""

    spec: DomainSpec
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        arr = _readonly(self.coeffs)
        if arr.ndim < 1 or arr.shape[0] != self.spec.n_orders:
            raise SpecMismatch(f"expected {self.spec.n_orders} orders, got shape {arr.shape}")
        _check_block(self.spec, arr, 1)
        object.__setattr__(self, "coeffs", arr)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def orders(self) -> list:
        return [AngleActionField(self.spec, c) for c in self.coeffs]

    def order(self, j: int) -> AngleActionField:
        return AngleActionField(self.spec, self.coeffs[j])

    def nonzero_orders(self, tol: float = 0.0) -> list:
        mags = np.abs(self.coeffs).reshape(self.spec.n_orders, -1).max(axis=1)
        return [j for j in range(self.spec.n_orders) if mags[j] > tol]

    @classmethod
    def zeros(cls, spec: DomainSpec, dim: int) -> "EpsSeriesField":
        return cls(spec, np.zeros((spec.n_orders,) + spec.block_shape(dim), dtype=np.complex128))

    @classmethod
    def identity(cls, spec: DomainSpec, dim: int) -> "EpsSeriesField":
        return AngleActionField.identity(spec, dim).as_series(0)

    @classmethod
    def from_orders(cls, spec: DomainSpec, orders) -> "EpsSeriesField":
        """Build from a list (index = order) or a ``{order: field-or-array}`` map."""
        items = orders.items() if isinstance(orders, Mapping) else enumerate(orders)
        blocks = {}
        for j, value in items:
            if not 0 <= j <= spec.Lmax:
                raise DomainError(f"order {j} outside 0..{spec.Lmax}")
            if isinstance(value, AngleActionField):
                if value.spec != spec:
                    raise SpecMismatch("order field has a different DomainSpec")
                value = value.coeffs
            blocks[j] = np.asarray(value, dtype=np.complex128)
        if not blocks:
            raise DomainError("at least one order is required")
        dim = next(iter(blocks.values())).shape[-1]
        c = np.zeros((spec.n_orders,) + spec.block_shape(dim), dtype=np.complex128)
        for j, value in blocks.items():
            c[j] = value
        return cls(spec, c)

    def with_spec(self, spec: DomainSpec) -> "EpsSeriesField":
        """Same coefficients under a spec differing only in ``eps_radius``/``rho0``."""
        same = (spec.d, spec.K, spec.M, spec.Lmax) == (self.spec.d, self.spec.K, self.spec.M, self.spec.Lmax)
        if not same:
            raise SpecMismatch("only rho0 and eps_radius may change")
        return EpsSeriesField(spec, self.coeffs)

    def on_grid(self, ntheta: int | None = None) -> np.ndarray:
        n = self.spec.theta_size if ntheta is None else int(ntheta)
        return _to_theta(self.coeffs, self.spec, n)

    def __add__(self, other):
        return field_add(self, other)

    def __sub__(self, other):
        return field_sub(self, other)

    def __neg__(self):
        return field_scale(self, -1.0)

    def __mul__(self, scalar):
        return field_scale(self, scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return field_mul(self, other)


Field = AngleActionField | EpsSeriesField


# --- grid transforms -------------------------------------------------------

def _lead(f: Field) -> int:
    return 1 if isinstance(f, EpsSeriesField) else 0


@lru_cache(maxsize=64)
def _embed_index(d: int, K: int, ntheta: int) -> tuple:
    idx = np.arange(-K, K + 1) % ntheta
    return tuple(idx.reshape([-1 if a == b else 1 for b in range(d)]) for a in range(d))


def _to_theta(coeffs: np.ndarray, spec: DomainSpec, ntheta: int) -> np.ndarray:
    if ntheta < spec.n_modes:
        raise DomainError(f"theta grid needs at least {spec.n_modes} points")
    d = spec.d
    lead = coeffs.shape[:coeffs.ndim - 2 * d - 2]
    c = coeffs.reshape((-1,) + coeffs.shape[len(lead):])
    g = np.zeros((c.shape[0],) + (ntheta,) * d + c.shape[1 + d:], dtype=np.complex128)
    g[(slice(None),) + _embed_index(d, spec.K, ntheta)] = c
    g = np.fft.ifftn(g, axes=tuple(range(1, d + 1))) * float(ntheta) ** d
    return g.reshape(lead + g.shape[1:])


def _from_theta(values: np.ndarray, spec: DomainSpec, ntheta: int) -> np.ndarray:
    d = spec.d
    lead = values.shape[:values.ndim - 2 * d - 2]
    g = values.reshape((-1,) + values.shape[len(lead):])
    g = np.fft.fftn(g, axes=tuple(range(1, d + 1))) / float(ntheta) ** d
    c = g[(slice(None),) + _embed_index(d, spec.K, ntheta)]
    return c.reshape(lead + c.shape[1:])


def _grid_coordinates(spec: DomainSpec, ntheta: int) -> tuple:
    d = spec.d
    t = np.arange(ntheta) / ntheta
    x = spec.nodes()
    theta, I = [], []
    for a in range(d):
        shape = [1] * (2 * d)
        shape[a] = ntheta
        theta.append(t.reshape(shape))
        shape = [1] * (2 * d)
        shape[d + a] = spec.M
        I.append(x.reshape(shape))
    return tuple(theta), tuple(I)


@lru_cache(maxsize=16)
def _shift_phase(spec_key: tuple) -> np.ndarray:
    d, K, M = spec_key
    k = np.arange(-K, K + 1)
    x = chebyshev.nodes(M)
    kI = np.zeros((2 * K + 1,) * d + (M,) * d)
    for a in range(d):
        shape = [1] * (2 * d)
        shape[a] = 2 * K + 1
        kk = k.reshape(shape)
        shape = [1] * (2 * d)
        shape[d + a] = M
        kI = kI + kk * x.reshape(shape)
    ph = np.exp(2j * np.pi * kI)
    ph.setflags(write=False)
    return ph


def shift_phase(spec: DomainSpec) -> np.ndarray:
    """``exp(2 pi i <k, I>)`` on modes x nodes, shape ``(2K+1,)*d + (M,)*d``."""
    return _shift_phase((spec.d, spec.K, spec.M))


def interp_action(coeffs: np.ndarray, spec: DomainSpec, I) -> np.ndarray:
    """Interpolate the node axes at one action point ``I`` (length ``d``).

    Works for any leading axes: input ``lead + modes + nodes + (n, n)``,
    output ``lead + modes + (n, n)``.
    """
    I = np.asarray(I, dtype=float).reshape(-1)
    d = spec.d
    out = coeffs
    # contract the last node axis repeatedly
    for a in range(d - 1, -1, -1):
        w = chebyshev.interp_matrix(spec.M, I[a:a + 1])[0]
        out = np.tensordot(out, w, axes=([out.ndim - 3], [0]))
    return out


def interp_points(coeffs: np.ndarray, spec: DomainSpec, points) -> np.ndarray:
    """Interpolate the node axes at many action points (shape ``(P, d)``).

    The node axes are the ``d`` axes before the trailing ``(n, n)``; any
    axes in front of them (orders, modes) are carried along, so the output
    is ``(P,) + leading axes + (n, n)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d, M = spec.d, spec.M
    P = points.shape[0]
    lead = coeffs.shape[:coeffs.ndim - d - 2]
    n = coeffs.shape[-1]
    # node axes last: (Q, M, ..., M) with Q = lead x n x n
    c = np.moveaxis(coeffs, tuple(range(len(lead), len(lead) + d)), tuple(range(-d, 0)))
    Q = int(np.prod(lead, dtype=int)) * n * n
    w = chebyshev.interp_matrix(M, points[:, d - 1])
    out = np.moveaxis(c.reshape(Q, M ** (d - 1), M) @ w.T, -1, 0)  # (P, Q, M^(d-1))
    for a in range(d - 2, -1, -1):
        w = chebyshev.interp_matrix(M, points[:, a])
        out = (out.reshape(P, -1, M) @ w[:, :, None])[..., 0]
    return out.reshape((P,) + lead + (n, n))


def fourier_eval(modes: np.ndarray, spec: DomainSpec, theta) -> np.ndarray:
    """Sum ``sum_k c_k exp(2 pi i <k, theta>)`` at points ``theta`` of shape ``(P, d)``.

    ``modes`` has shape ``lead + (2K+1,)*d + (n, n)``; result ``lead + (P, n, n)``.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    d = spec.d
    kvec = spec.mode_grid().reshape(-1, d)
    ph = np.exp(2j * np.pi * theta @ kvec.T)  # (P, nk)
    lead = modes.shape[:modes.ndim - d - 2]
    flat = modes.reshape(lead + (kvec.shape[0],) + modes.shape[-2:])
    return np.einsum("pk,...kab->...pab", ph, flat)


# --- algebraic operations ---------------------------------------------------

def _same_spec(u: Field, v: Field) -> None:
    if type(u) is not type(v):
        raise SpecMismatch(f"cannot combine {type(u).__name__} with {type(v).__name__}")
    if u.spec != v.spec:
        raise SpecMismatch(f"domain specs differ: {u.spec} vs {v.spec}")
    if u.dim != v.dim:
        raise SpecMismatch(f"matrix dimensions differ: {u.dim} vs {v.dim}")


def _like(u: Field, coeffs: np.ndarray) -> Field:
    return type(u)(u.spec, coeffs)


def field_add(u: Field, v: Field) -> Field:
    _same_spec(u, v)
    return _like(u, u.coeffs + v.coeffs)


def field_sub(u: Field, v: Field) -> Field:
    _same_spec(u, v)
    return _like(u, u.coeffs - v.coeffs)


def field_scale(u: Field, scalar) -> Field:
    return _like(u, u.coeffs * complex(scalar))


def _flat_grid(values: np.ndarray, lead: int) -> tuple:
    shape = values.shape
    n = shape[-1]
    head = shape[:lead]
    return values.reshape(head + (-1, n, n)), shape


def field_mul(u: Field, v: Field) -> Field:
    """Pointwise matrix product; Cauchy product in epsilon, truncated at ``Lmax``."""
    _same_spec(u, v)
    n = u.spec.theta_size
    gu, shape = _flat_grid(_to_theta(u.coeffs, u.spec, n), _lead(u))
    gv, _ = _flat_grid(_to_theta(v.coeffs, v.spec, n), _lead(v))
    if _lead(u):
        prod = _kernels.cauchy_matmul(gu, gv)
    else:
        prod = gu @ gv
    return _like(u, _from_theta(prod.reshape(shape), u.spec, n))


def _grid_inverse(g: np.ndarray) -> np.ndarray:
    """Series inverse at every grid point; ``g`` has shape ``(J, P, n, n)``."""
    from .algebra import mat_inv
    w0 = mat_inv(g[0])
    return _kernels.series_inverse(g, w0)


def field_inv(u: Field) -> Field:
    """Pointwise inverse (series inverse in epsilon), projected to ``|k| <= K``."""
    from .algebra import mat_inv
    n = u.spec.theta_size
    g, shape = _flat_grid(_to_theta(u.coeffs, u.spec, n), _lead(u))
    inv = _grid_inverse(g) if _lead(u) else mat_inv(g)
    return _like(u, _from_theta(inv.reshape(shape), u.spec, n))


def compose_f(v: Field) -> Field:
    """``v o f`` for the twist ``f(theta, I) = (theta + I, I)``; exact at the nodes."""
    ph = shift_phase(v.spec)[..., None, None]
    return _like(v, v.coeffs * ph)


def conjugate(eta: EpsSeriesField, phi: EpsSeriesField) -> EpsSeriesField:
    """``(phi o f)^{-1} eta phi`` with a single projection at the end."""
    _same_spec(eta, phi)
    spec = eta.spec
    # triple products of band-K data reach band 3K; 2(2K+1) points keep
    # |k| <= K alias-free
    n = spec.theta_size
    ge, shape = _flat_grid(_to_theta(eta.coeffs, spec, n), 1)
    gp, _ = _flat_grid(_to_theta(phi.coeffs, spec, n), 1)
    gpf, _ = _flat_grid(_to_theta(compose_f(phi).coeffs, spec, n), 1)
    inv = _grid_inverse(gpf)
    out = _kernels.cauchy_matmul(_kernels.cauchy_matmul(inv, ge), gp)
    return EpsSeriesField(spec, _from_theta(out.reshape(shape), spec, n))


def truncate_eps(v: EpsSeriesField, m: int, M: int) -> EpsSeriesField:
    """Keep orders ``m..M`` (inclusive) and zero the rest."""
    if m < 0 or m > M:
        raise DomainError(f"need 0 <= m <= M, got m={m}, M={M}")
    c = np.zeros_like(v.coeffs)
    hi = min(M, v.spec.Lmax)
    if m <= hi:
        c[m:hi + 1] = v.coeffs[m:hi + 1]
    return EpsSeriesField(v.spec, c)


def eps_eval(v: EpsSeriesField, eps: complex, check_disk: bool = True) -> AngleActionField:
    eps = complex(eps)
    if check_disk and abs(eps) > v.spec.eps_radius * (1 + 1e-12):
        raise DomainError(f"|eps| = {abs(eps):.6g} outside the disk of radius {v.spec.eps_radius}")
    acc = np.array(v.coeffs[-1])
    for j in range(v.spec.Lmax - 1, -1, -1):
        acc = acc * eps + v.coeffs[j]
    return AngleActionField(v.spec, acc)


def map_pointwise_eps(v: EpsSeriesField, fn: Callable, radius: float, points: int | None = None,
                      ntheta: int | None = None) -> EpsSeriesField:
    """Apply a pointwise matrix function to the family and re-expand in epsilon.

    The family is evaluated at ``points`` equispaced values on the circle
    ``|eps| = radius`` at every grid point, ``fn`` is applied to each matrix
    and the epsilon orders ``0..Lmax`` are recovered by a discrete Fourier
    transform.  Orders beyond ``points`` alias back with relative weight
    ``(radius / R)^points`` where ``R`` is the convergence radius of the
    result.
    """
    spec = v.spec
    J = spec.n_orders
    P = 4 * J if points is None else int(points)
    if P < J:
        raise DomainError("need at least Lmax + 1 collocation points")
    n = spec.theta_size if ntheta is None else int(ntheta)
    g, shape = _flat_grid(_to_theta(v.coeffs, spec, n), 1)
    z = radius * np.exp(2j * np.pi * np.arange(P) / P)
    powers = z[:, None] ** np.arange(J)[None, :]  # (P, J)
    inv_scale = radius ** -np.arange(J, dtype=float)
    out = np.empty_like(g)
    for start in range(0, g.shape[1], _CHUNK):
        blk = g[:, start:start + _CHUNK]
        samples = np.einsum("pj,jqab->pqab", powers, blk)
        vals = fn(samples)
        coef = np.fft.fft(vals, axis=0)[:J] / P
        out[:, start:start + _CHUNK] = coef * inv_scale[:, None, None, None]
    return EpsSeriesField(spec, _from_theta(out.reshape(shape), spec, n))


# --- norms and estimates ----------------------------------------------------

def _grid_norms(coeffs: np.ndarray, spec: DomainSpec, theta_samples: int | None, lead: int) -> np.ndarray:
    n = spec.norm_theta_size if theta_samples is None else int(theta_samples)
    if n < spec.theta_size:
        raise DomainError(f"theta_samples must be at least {spec.theta_size}")
    vals = _to_theta(coeffs, spec, n)
    norms = np.asarray(op_norm(vals))
    return norms.reshape(norms.shape[:lead] + (-1,)).max(axis=-1)


def norm_sup_real(v: AngleActionField, theta_samples: int | None = None) -> float:
    """Max operator norm over the uniform theta grid times the Chebyshev nodes."""
    return float(_grid_norms(v.coeffs, v.spec, theta_samples, 0))


def order_norms(v: EpsSeriesField, theta_samples: int | None = None) -> np.ndarray:
    """``norm_sup_real`` of every epsilon order."""
    return _grid_norms(v.coeffs, v.spec, theta_samples, 1)


def series_norm(v: EpsSeriesField, radius: float | None = None, theta_samples: int | None = None) -> float:
    """``sum_j radius^j * norm_sup_real(v^j)``; radius defaults to ``eps_radius``."""
    r = v.spec.eps_radius if radius is None else float(radius)
    norms = order_norms(v, theta_samples)
    return float(np.sum(norms * r ** np.arange(v.spec.n_orders)))


def norm_rho_estimate(v: AngleActionField, rho: float) -> float:
    """Coefficient estimate ``sum_k max_I |v_k(I)| exp(2 pi |k|_1 rho)``.

    An upper proxy for the sup norm on the complex strip of width ``rho``;
    exact for single-mode data up to the resolution of the action grid.
    """
    if not 0 < rho <= v.spec.rho0 * (1 + 1e-12):
        raise DomainError(f"rho must lie in (0, {v.spec.rho0}], got {rho}")
    d = v.spec.d
    block_norms = np.asarray(op_norm(v.coeffs))
    per_mode = block_norms.reshape(v.spec.mode_shape + (-1,)).max(axis=-1)
    k1 = np.abs(v.spec.mode_grid()).sum(axis=-1)
    return float(np.sum(per_mode * np.exp(2 * np.pi * k1 * rho)))


def tail_bound(norm_rho0: float, Mcut: int, delta: float, rho0: float) -> float:
    """Bound ``rho0/delta * exp(-Mcut delta / rho0) * norm`` on a series tail."""
    if not 0 < delta < rho0:
        raise DomainError(f"need 0 < delta < rho0, got delta={delta}, rho0={rho0}")
    if Mcut < 0 or norm_rho0 < 0:
        raise DomainError("Mcut and norm_rho0 must be non-negative")
    return rho0 / delta * math.exp(-Mcut * delta / rho0) * norm_rho0


# --- action derivative -----------------------------------------------------

def _fft_derivative(values: np.ndarray) -> np.ndarray:
    """Derivative of the Chebyshev interpolant along axis 0 via DCT-I."""
    M = values.shape[0]
    N = M - 1
    col = (-1,) + (1,) * (values.ndim - 1)
    ext = np.concatenate([values, values[-2:0:-1]], axis=0)
    a = np.fft.fft(ext, axis=0)[:M] / N
    a[0] /= 2
    a[N] /= 2
    # b_i = sum over m > i, m - i odd, of 2 m a_m
    s = 2 * np.arange(M).reshape(col) * a
    r = np.zeros_like(s)
    for parity in (0, 1):
        r[parity::2] = np.cumsum(s[parity::2][::-1], axis=0)[::-1]
    b = np.zeros_like(a)
    b[:N] = r[1:]
    b[0] /= 2
    ext = np.concatenate([b, b[-2:0:-1]], axis=0)
    sign = np.where(np.arange(M) % 2 == 0, 1.0, -1.0).reshape(col)
    return (np.fft.fft(ext, axis=0)[:M] + b[0] + b[N] * sign) / 2


def _axis_derivative(block: np.ndarray, axis: int) -> np.ndarray:
    M = block.shape[axis]
    moved = np.moveaxis(block, axis, 0)
    if M <= _DENSE_DIFF_LIMIT:
        out = np.tensordot(chebyshev.diff_matrix(M), moved, axes=([1], [0]))
    else:
        out = _fft_derivative(moved)
    return np.moveaxis(out, 0, axis)


def cheb_directional_derivative(block, k, nodes=None) -> np.ndarray:
    """``<grad_I b(I), k>`` for an action block ``b`` of shape ``(M,)*d + (n, n)``.

    With ``nodes`` (integer array ``(R, d)``) only those node values are
    computed and an ``(R, n, n)`` array is returned; this uses single rows of
    the differentiation matrix and scales to very fine grids.
    """
    block = np.asarray(block, dtype=np.complex128)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    d = k.shape[0]
    if block.ndim != d + 2:
        raise SpecMismatch(f"block of shape {block.shape} does not match d = {d}")
    M = block.shape[0]
    if nodes is None:
        out = np.zeros_like(block)
        for a in range(d):
            if k[a] != 0:
                out += k[a] * _axis_derivative(block, a)
        return out
    nodes = np.atleast_2d(np.asarray(nodes, dtype=int))
    out = np.zeros((nodes.shape[0],) + block.shape[-2:], dtype=np.complex128)
    for a in range(d):
        if k[a] == 0:
            continue
        rows = chebyshev.diff_rows(M, nodes[:, a])  # (R, M)
        moved = np.moveaxis(block, a, d - 1)
        others = tuple(nodes[:, b] for b in range(d) if b != a)
        lines = moved[others] if others else np.broadcast_to(moved, (nodes.shape[0],) + moved.shape)
        out += k[a] * np.einsum("rm,rmab->rab", rows, lines)
    return out


# --- serialization ---------------------------------------------------------

def to_json_dict(v: EpsSeriesField) -> dict:
    spec = v.spec
    kvecs = spec.mode_grid().reshape(-1, spec.d)
    orders = []
    for j in range(spec.n_orders):
        blocks = v.coeffs[j].reshape((kvecs.shape[0], -1))
        entries = []
        for i, kv in enumerate(kvecs):
            vals = blocks[i]
            if not np.any(vals):
                continue
            entries.append({"k": [int(x) for x in kv],
                            "values": [[float(z.real), float(z.imag)] for z in vals]})
        orders.append(entries)
    return {"format": JSON_FORMAT, "spec": spec.to_dict(), "dim": v.dim, "orders": orders}


def from_json_dict(data: Mapping) -> EpsSeriesField:
    if data.get("format") != JSON_FORMAT:
        raise DomainError(f"not a {JSON_FORMAT} document")
    spec = DomainSpec.from_dict(data["spec"])
    dim = int(data["dim"])
    orders = data["orders"]
    if len(orders) != spec.n_orders:
        raise SpecMismatch(f"expected {spec.n_orders} orders, got {len(orders)}")
    c = np.zeros((spec.n_orders,) + spec.block_shape(dim), dtype=np.complex128)
    block_shape = spec.node_shape + (dim, dim)
    for j, entries in enumerate(orders):
        for entry in entries:
            vals = np.asarray(entry["values"], dtype=float)
            block = (vals[:, 0] + 1j * vals[:, 1]).reshape(block_shape)
            c[(j,) + spec.mode_index(entry["k"])] = block
    return EpsSeriesField(spec, c)


def dumps(v: EpsSeriesField) -> str:
    return json.dumps(to_json_dict(v))


def loads(text: str) -> EpsSeriesField:
    return from_json_dict(json.loads(text))


def save(v: EpsSeriesField, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(v), fh)


def load(path) -> EpsSeriesField:
    with open(path, encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))


def stack_orders(fields: Iterable[AngleActionField]) -> np.ndarray:
    return np.stack([f.coeffs for f in fields])
