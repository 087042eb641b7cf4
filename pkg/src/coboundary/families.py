"""Generators for test families: coboundaries, random conjugacies, perturbations."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .algebra import as_matrix, mat_expm1
from .errors import DomainError
from .field import AngleActionField, DomainSpec, EpsSeriesField, conjugate, map_pointwise_eps, norm_sup_real


def make_coboundary_family(phi_star: EpsSeriesField) -> EpsSeriesField:
    """``(phi o f)^{-1} phi``, truncated at ``Lmax``."""
    eye = EpsSeriesField.identity(phi_star.spec, phi_star.dim)
    dev = float(np.max(np.abs(phi_star.coeffs[0] - eye.coeffs[0])))
    if dev > 1e-12:
        raise DomainError(f"phi must equal Id at eps = 0 (deviation {dev:.3g})")
    return conjugate(eye, phi_star)


def _half_space_modes(d: int, k0: int) -> list:
    """Nonzero modes with ``|k|_inf <= k0`` modulo ``k ~ -k``, plus ``k = 0``."""
    grid = np.stack(np.meshgrid(*([np.arange(-k0, k0 + 1)] * d), indexing="ij"), -1).reshape(-1, d)
    modes = []
    for k in grid:
        nz = np.flatnonzero(k)
        if nz.size == 0 or k[nz[0]] > 0:
            modes.append(tuple(int(x) for x in k))
    return modes


def _random_real_order(spec: DomainSpec, rng: np.random.Generator, dim: int, k0: int, decay: float) -> np.ndarray:
    """Real trig polynomial in theta with quadratic polynomial coefficients in I."""
    d = spec.d
    nodes = np.moveaxis(spec.node_grid(), -1, 0)  # (d, M, ..., M)
    c = np.zeros(spec.block_shape(dim), dtype=np.complex128)
    for k in _half_space_modes(d, k0):
        weight = decay ** sum(abs(x) for x in k)
        # sum over monomials 1, I_a, I_a I_b of random matrices
        poly = np.zeros(spec.node_shape + (dim, dim), dtype=np.complex128)
        monomials = [np.ones(spec.node_shape)] + [nodes[a] for a in range(d)]
        monomials += [nodes[a] * nodes[b] for a in range(d) for b in range(a, d)]
        for mono in monomials:
            re = rng.standard_normal((dim, dim))
            im = rng.standard_normal((dim, dim)) if any(k) else np.zeros((dim, dim))
            poly += mono[..., None, None] * (re + 1j * im) / len(monomials)
        poly *= weight
        c[spec.mode_index(k)] += poly
        if any(k):
            c[spec.mode_index(tuple(-x for x in k))] += np.conj(poly)
    return c


def make_random_phi(spec: DomainSpec, seed: int, amplitude: float, dim: int = 2, orders: int = 3,
                    k0: int = 1, decay: float = 0.5) -> EpsSeriesField:
    """``Id + sum_j eps^j phi_j`` with random real-valued ``phi_j``.

    ``phi_j`` is a trigonometric polynomial of degree ``k0`` in ``theta``
    whose coefficients are polynomials of degree at most 2 in ``I``; mode
    ``k`` is weighted by ``decay^|k|_1`` and order ``j`` is normalized to a
    real-grid sup norm of ``amplitude * decay^(j-1)``.
    """
    if amplitude < 0 or not 0 < decay <= 1:
        raise DomainError("need amplitude >= 0 and 0 < decay <= 1")
    if not 1 <= k0 <= spec.K:
        raise DomainError(f"k0 must lie in 1..{spec.K}")
    rng = np.random.default_rng(seed)
    out = {0: AngleActionField.identity(spec, dim)}
    for j in range(1, min(orders, spec.Lmax) + 1):
        raw = AngleActionField(spec, _random_real_order(spec, rng, dim, k0, decay))
        size = norm_sup_real(raw)
        scale = 0.0 if size == 0 else amplitude * decay ** (j - 1) / size
        out[j] = raw * scale
    return EpsSeriesField.from_orders(spec, out)


def trig_field(spec: DomainSpec, k, kind: str, matrix) -> AngleActionField:
    """``cos`` or ``sin`` of ``2 pi <k, theta>`` times a constant matrix."""
    a = as_matrix(matrix)
    k = tuple(int(x) for x in np.atleast_1d(k))
    if not any(k):
        if kind == "sin":
            return AngleActionField.zeros(spec, a.shape[-1])
        return AngleActionField.constant(spec, a)
    minus = tuple(-x for x in k)
    if kind == "cos":
        modes = {k: 0.5 * a, minus: 0.5 * a}
    elif kind == "sin":
        modes = {k: -0.5j * a, minus: 0.5j * a}
    else:
        raise DomainError(f"trig kind must be 'sin' or 'cos', got {kind!r}")
    return AngleActionField.from_modes(spec, modes)


def series_exp(psi: EpsSeriesField, radius: float | None = None) -> EpsSeriesField:
    """``exp(psi)`` for a family with ``psi^0 = 0``, re-expanded in epsilon."""
    r = psi.spec.eps_radius if radius is None else radius
    return EpsSeriesField.identity(psi.spec, psi.dim) + map_pointwise_eps(psi, mat_expm1, r)


def make_trig_phi(spec: DomainSpec, terms, use_exp: bool = False) -> EpsSeriesField:
    """``Id + psi`` (or ``exp(psi)``) with ``psi = sum eps^order trig(k theta) matrix``."""
    if not terms:
        raise DomainError("at least one term is required")
    dims = {as_matrix(t["matrix"]).shape[-1] for t in terms}
    if len(dims) != 1:
        raise DomainError("all term matrices must share one dimension")
    dim = dims.pop()
    coeffs = np.zeros((spec.n_orders,) + spec.block_shape(dim), dtype=np.complex128)
    for t in terms:
        order = int(t["order"])
        if not 1 <= order <= spec.Lmax:
            raise DomainError(f"term order must lie in 1..{spec.Lmax}")
        coeffs[order] += trig_field(spec, t["k"], t.get("kind", "sin"), t["matrix"]).coeffs
    psi = EpsSeriesField(spec, coeffs)
    if use_exp:
        return series_exp(psi)
    return EpsSeriesField.identity(spec, dim) + psi


def perturb(eta: EpsSeriesField, matrix, order: int = 1) -> EpsSeriesField:
    """``eta + eps^order C`` with a constant matrix ``C``."""
    c = AngleActionField.constant(eta.spec, matrix)
    return eta + c.as_series(order)


def phi_from_descriptor(spec: DomainSpec, desc: Mapping, seed: int, dim: int) -> EpsSeriesField:
    kind = desc.get("kind", "random")
    if kind == "random":
        return make_random_phi(spec, seed=int(desc.get("seed", seed)), amplitude=float(desc.get("amplitude", 0.05)),
                               dim=int(desc.get("dim", dim)), orders=int(desc.get("orders", 3)),
                               k0=int(desc.get("k0", 1)), decay=float(desc.get("decay", 0.5)))
    if kind == "trig":
        return make_trig_phi(spec, desc["terms"], use_exp=bool(desc.get("exp", False)))
    raise DomainError(f"unknown conjugacy kind {kind!r}")


def family_from_descriptor(spec: DomainSpec, desc: Mapping, seed: int = 0, dim: int = 2) -> tuple:
    """Build ``(eta, phi_star)`` from a descriptor; ``phi_star`` is ``None`` when not applicable."""
    kind = desc.get("kind", "coboundary")
    if kind == "identity":
        return EpsSeriesField.identity(spec, int(desc.get("dim", dim))), None
    if kind in ("coboundary", "perturbed"):
        phi = phi_from_descriptor(spec, desc.get("phi", {"kind": "random"}), seed, int(desc.get("dim", dim)))
        eta = make_coboundary_family(phi)
        if kind == "perturbed":
            C = desc.get("C")
            if C is None:
                raise DomainError("perturbed family needs a matrix 'C'")
            eta = perturb(eta, np.asarray(C, dtype=complex), int(desc.get("order", 1)))
        return eta, phi
    raise DomainError(f"unknown family kind {kind!r}")
