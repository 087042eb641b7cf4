"""Periodic-orbit obstructions for cocycles over the twist map.

A point ``(theta, I)`` is N-periodic exactly when ``N I`` is an integer
vector, so the periodic structure up to period ``Nmax`` is the set of
reduced fractions ``l/N`` in the action box.  Three checks are offered:

* ``poc``  - ordered products of the matrix cocycle along orbits equal Id,
* ``cpoc`` - sums of an additive cocycle along orbits vanish,
* ``fc``   - Fourier coefficients vanish on the resonant planes
  ``<k, I> = n``.

Each check returns the worst defect found; the ``*_report`` variants also
return the location of that worst case.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .algebra import op_norm
from .errors import DomainError, PreconditionViolation
from .field import (AngleActionField, DomainSpec, EpsSeriesField, fourier_eval,
                    interp_points, order_norms)

DEFAULT_NMAX = 12
DEFAULT_RESONANCE_SAMPLES = 32
DEFAULT_ORDER_TOL = 1e-9


@dataclass(frozen=True)
class PeriodicActionSet:
    """Reduced rational actions ``l/N`` in ``[-1, 1]^d`` with ``N <= Nmax``."""

    d: int
    Nmax: int
    entries: tuple

    def __post_init__(self):
        seen = set()
        for ell, N in self.entries:
            if len(ell) != self.d or N < 1:
                raise DomainError(f"bad periodic entry {(ell, N)}")
            if math.gcd(N, *ell) != 1:
                raise DomainError(f"entry {(ell, N)} is not reduced")
            if any(abs(x) > N for x in ell):
                raise DomainError(f"entry {(ell, N)} lies outside the action box")
            if (ell, N) in seen:
                raise DomainError(f"duplicate entry {(ell, N)}")
            seen.add((ell, N))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def actions(self) -> np.ndarray:
        return np.array([np.asarray(ell, dtype=float) / N for ell, N in self.entries]).reshape(-1, self.d)

    def periods(self) -> np.ndarray:
        return np.array([N for _, N in self.entries], dtype=int)


def enumerate_periodic_actions(d: int, Nmax: int) -> PeriodicActionSet:
    if Nmax < 1 or d < 1:
        raise DomainError("need d >= 1 and Nmax >= 1")
    entries = []
    for N in range(1, Nmax + 1):
        for ell in itertools.product(range(-N, N + 1), repeat=d):
            if math.gcd(N, *ell) == 1:
                entries.append((tuple(ell), N))
    return PeriodicActionSet(d, Nmax, tuple(entries))


def _orbits_or_default(orbits, d: int) -> PeriodicActionSet:
    if orbits is None:
        return enumerate_periodic_actions(d, DEFAULT_NMAX)
    if isinstance(orbits, int):
        return enumerate_periodic_actions(d, orbits)
    return orbits


def _theta_points(d: int, per_dim: int) -> np.ndarray:
    t = np.arange(per_dim) / per_dim
    return np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)


def default_theta_samples(d: int, nonlinear: bool = False) -> int:
    """Theta samples per dimension: 64, or 8 per dimension for products with d >= 2."""
    return 8 if (nonlinear and d >= 2) else 64


def default_eps_samples(radius: float) -> list:
    ring = np.exp(2j * np.pi * np.arange(8) / 8)
    return [complex(x) for x in np.concatenate([0.5 * radius * ring, radius * ring])]


@dataclass
class DefectReport:
    """Worst defect of a condition together with where it occurs."""

    condition: str
    Nmax: int | None
    K: int
    defect: float
    argmax_witness: dict | None = None
    per_period: dict = dc_field(default_factory=dict)
    per_period_first_order: dict = dc_field(default_factory=dict)
    first_order: int | None = None

    def to_dict(self) -> dict:
        out = {"condition": self.condition, "Nmax": self.Nmax, "K": self.K,
               "defect": float(self.defect), "argmax_witness": self.argmax_witness}
        if self.per_period:
            out["per_period"] = {str(k): float(v) for k, v in sorted(self.per_period.items())}
        if self.per_period_first_order:
            out["first_order"] = self.first_order
            out["per_period_first_order"] = {
                str(k): float(v) for k, v in sorted(self.per_period_first_order.items())}
        return out


def _resonant_mask(spec: DomainSpec, ell, N: int) -> np.ndarray:
    kdot = spec.mode_grid() @ np.asarray(ell)
    return (kdot % N) == 0


# --- CPOC ------------------------------------------------------------------

def _theta_phases(spec: DomainSpec, theta: np.ndarray) -> np.ndarray:
    """``exp(2 pi i <k, theta>)`` with shape ``(P, number of modes)``."""
    kvec = spec.mode_grid().reshape(-1, spec.d)
    return np.exp(2j * np.pi * theta @ kvec.T)


def _cpoc_scan(coeffs: np.ndarray, spec: DomainSpec, orbits: PeriodicActionSet, per_dim: int):
    """Yield ``(entry, orbit-sum norms over theta, theta points)`` for every orbit.

    Orbit sums are formed spectrally: only modes with ``<k, l> = 0 mod N``
    survive, each multiplied by ``N``.
    """
    theta = _theta_points(spec.d, per_dim)
    ph = _theta_phases(spec, theta)
    n = coeffs.shape[-1]
    at_actions = interp_points(coeffs, spec, orbits.actions()).reshape(len(orbits), -1, n * n)
    zero = int(np.ravel_multi_index(spec.mode_index((0,) * spec.d), spec.mode_shape))
    kvec = spec.mode_grid().reshape(-1, spec.d)
    for idx, (ell, N) in enumerate(orbits):
        mask = (kvec @ np.asarray(ell)) % N == 0
        if mask.sum() == 1:  # only k = 0 survives: the sum does not depend on theta
            value = float(op_norm(N * at_actions[idx][zero].reshape(n, n)))
            yield (ell, N), np.full(theta.shape[0], value), theta
            continue
        sums = N * (ph[:, mask] @ at_actions[idx][mask])
        yield (ell, N), np.asarray(op_norm(sums.reshape(-1, n, n))), theta


def cpoc_report(beta: AngleActionField, orbits=None, theta_samples: int | None = None) -> DefectReport:
    spec = beta.spec
    orbits = _orbits_or_default(orbits, spec.d)
    per_dim = theta_samples or default_theta_samples(spec.d)
    best, witness, per_period = 0.0, None, {}
    for (ell, N), norms, theta in _cpoc_scan(beta.coeffs, spec, orbits, per_dim):
        i = int(np.argmax(norms))
        val = float(norms[i])
        per_period[N] = max(per_period.get(N, 0.0), val)
        if witness is None or val > best:
            best = val
            witness = {"ell": list(ell), "N": N, "theta": theta[i].tolist()}
    return DefectReport("cpoc", orbits.Nmax, spec.K, best, witness, per_period)


def cpoc_defect(beta: AngleActionField, orbits=None, theta_samples: int | None = None) -> float:
    """Worst op-norm of ``sum_j beta(theta + j l/N, l/N)`` over orbits and theta samples."""
    return cpoc_report(beta, orbits, theta_samples).defect


def orbit_sum(beta: AngleActionField, ell, N: int, theta) -> np.ndarray:
    """Direct orbit sum ``sum_{j<N} beta(theta + j l/N, l/N)`` at points ``theta`` ``(P, d)``."""
    spec = beta.spec
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    I = np.asarray(ell, dtype=float) / N
    modes = interp_points(beta.coeffs, spec, I[None, :])[0]
    shifts = np.arange(N)[:, None] * I[None, :]
    pts = (theta[:, None, :] + shifts[None, :, :]).reshape(-1, spec.d)
    vals = fourier_eval(modes, spec, pts).reshape(theta.shape[0], N, beta.dim, beta.dim)
    return vals.sum(axis=1)


# --- FC --------------------------------------------------------------------

def _hyperplane_points(k: np.ndarray, n: int, samples: int) -> np.ndarray:
    """Sample points of ``{<k, I> = n}`` inside ``[-1, 1]^d``."""
    d = k.shape[0]
    a = int(np.argmax(np.abs(k)))
    free = [b for b in range(d) if b != a]
    if d == 1:
        pts = np.array([[n / k[0]]])
    elif d == 2:
        b = free[0]
        # I_a = (n - k_b t) / k_a must lie in [-1, 1]
        ends = sorted([(n - k[a]) / k[b], (n + k[a]) / k[b]]) if k[b] != 0 else [-1.0, 1.0]
        lo, hi = max(-1.0, ends[0]), min(1.0, ends[1])
        if lo > hi:
            return np.empty((0, d))
        t = np.linspace(lo, hi, samples)
        pts = np.empty((samples, 2))
        pts[:, b] = t
        pts[:, a] = (n - k[b] * t) / k[a]
    else:
        per = max(2, int(math.ceil(samples ** (1.0 / (d - 1)))))
        grids = np.meshgrid(*([np.linspace(-1.0, 1.0, per)] * (d - 1)), indexing="ij")
        pts = np.empty((per ** (d - 1), d))
        for g, b in zip(grids, free):
            pts[:, b] = g.reshape(-1)
        pts[:, a] = (n - pts[:, free] @ k[free]) / k[a]
    inside = np.all(np.abs(pts) <= 1.0 + 1e-12, axis=1)
    return np.clip(pts[inside], -1.0, 1.0)


def fc_report(beta: AngleActionField, resonance_samples: int = DEFAULT_RESONANCE_SAMPLES) -> DefectReport:
    spec = beta.spec
    d = spec.d
    zero = spec.mode_index((0,) * d)
    norms0 = np.asarray(op_norm(beta.coeffs[zero])).reshape(-1)
    i0 = int(np.argmax(norms0))
    best = float(norms0[i0])
    node = np.unravel_index(i0, spec.node_shape)
    witness = {"k": [0] * d, "n": 0, "I": [float(spec.nodes()[j]) for j in node]}
    for kvec in spec.mode_grid().reshape(-1, d):
        if not np.any(kvec):
            continue
        block = beta.coeffs[spec.mode_index(kvec)]
        if not np.any(block):
            continue
        kf = kvec.astype(float)
        span = int(np.abs(kvec).sum())
        for n in range(-span, span + 1):
            pts = _hyperplane_points(kf, n, resonance_samples)
            if pts.shape[0] == 0:
                continue
            vals = np.asarray(op_norm(interp_points(block, spec, pts))).reshape(-1)
            j = int(np.argmax(vals))
            if vals[j] > best:
                best = float(vals[j])
                witness = {"k": kvec.tolist(), "n": n, "I": pts[j].tolist()}
    return DefectReport("fc", None, spec.K, best, witness)


def fc_defect(beta: AngleActionField, resonance_samples: int = DEFAULT_RESONANCE_SAMPLES) -> float:
    """Worst ``|beta_k(I)|`` on resonant planes ``<k, I> = n`` (all of ``k = 0`` included)."""
    return fc_report(beta, resonance_samples).defect


# --- POC -------------------------------------------------------------------

def poc_report(eta: EpsSeriesField, orbits=None, theta_samples: int | None = None,
               eps_samples=None) -> DefectReport:
    """Ordered orbit products ``eta(f^{N-1} p) ... eta(f p) eta(p) - Id``.

    Besides the worst defect, the report records the worst defect per period
    and the orbit-sum defect of the lowest non-trivial epsilon order, which
    is the first-order part of the product.
    """
    spec = eta.spec
    d, n = spec.d, eta.dim
    orbits = _orbits_or_default(orbits, d)
    per_dim = theta_samples or default_theta_samples(d, nonlinear=True)
    eps = np.asarray(default_eps_samples(spec.eps_radius) if eps_samples is None else eps_samples,
                     dtype=complex).reshape(-1)
    if np.any(np.abs(eps) > spec.eps_radius * (1 + 1e-12)):
        raise DomainError("epsilon samples must lie in the disk")
    theta = _theta_points(d, per_dim)
    ph = _theta_phases(spec, theta)  # (T, nk)
    kvec = spec.mode_grid().reshape(-1, d)
    powers = eps[:, None] ** np.arange(spec.n_orders)[None, :]
    at_actions = interp_points(eta.coeffs, spec, orbits.actions())  # (O, J, modes, n, n)
    at_actions = at_actions.reshape(len(orbits), spec.n_orders, kvec.shape[0], n * n)
    eye = np.eye(n)
    T, E = theta.shape[0], eps.size
    best, witness, per_period = 0.0, None, {}
    for idx, (ell, N) in enumerate(orbits):
        I = np.asarray(ell, dtype=float) / N
        modes = np.tensordot(powers, at_actions[idx], axes=([1], [0]))  # (E, nk, n*n)
        # value at theta + j I: sum_k e^{2 pi i k theta} e^{2 pi i j <k, I>} c_k
        shift = np.exp(2j * np.pi * np.outer(np.arange(N), kvec @ I))  # (N, nk)
        shifted = shift[None, :, :, None] * modes[:, None, :, :]  # (E, N, nk, n*n)
        vals = np.einsum("tk,ejkq->etjq", ph, shifted, optimize=True)
        prods = _kernels.orbit_product(vals.reshape(E * T, N, n, n))
        norms = np.asarray(op_norm(prods - eye)).reshape(E, T)
        e, t = np.unravel_index(int(np.argmax(norms)), norms.shape)
        val = float(norms[e, t])
        per_period[N] = max(per_period.get(N, 0.0), val)
        if witness is None or val > best:
            best = val
            witness = {"ell": list(ell), "N": N, "theta": theta[t].tolist(),
                       "eps": [float(eps[e].real), float(eps[e].imag)]}
    report = DefectReport("poc", orbits.Nmax, spec.K, best, witness, per_period)
    lead = _leading_order(eta)
    if lead is not None:
        first = cpoc_report(eta.order(lead), orbits, default_theta_samples(d, nonlinear=True))
        report.first_order = lead
        report.per_period_first_order = first.per_period
    return report


def poc_defect(eta: EpsSeriesField, orbits=None, theta_samples: int | None = None,
               eps_samples=None) -> float:
    return poc_report(eta, orbits, theta_samples, eps_samples).defect


def _leading_order(eta: EpsSeriesField, tol: float = 0.0):
    spec = eta.spec
    rest = [j for j in eta.nonzero_orders(tol) if j >= 1]
    return rest[0] if rest else None


def check_low_orders(eta: EpsSeriesField, L: int, order_tol: float = DEFAULT_ORDER_TOL) -> None:
    """Raise unless ``eta = Id + O(eps^L)`` orderwise up to ``order_tol``."""
    spec = eta.spec
    eye_field = AngleActionField.identity(spec, eta.dim)
    norms = order_norms(eta)
    zero_dev = float(np.max(op_norm((eta.coeffs[0] - eye_field.coeffs))))
    if zero_dev > order_tol:
        raise PreconditionViolation(f"order 0 differs from Id by {zero_dev:.3g}", reason="identity")
    for j in range(1, min(L, spec.n_orders)):
        if norms[j] > order_tol:
            raise PreconditionViolation(
                f"order {j} has norm {norms[j]:.3g} > {order_tol:g} but the step expects Id + O(eps^{L})",
                reason="order")


def poc_per_order_report(eta: EpsSeriesField, L: int, orbits=None, theta_samples: int | None = None,
                         order_tol: float = DEFAULT_ORDER_TOL) -> DefectReport:
    if L < 1:
        raise DomainError("L must be at least 1")
    check_low_orders(eta, L, order_tol)
    spec = eta.spec
    orbits = _orbits_or_default(orbits, spec.d)
    best = DefectReport("poc_per_order", orbits.Nmax, spec.K, 0.0, None)
    for j in range(L, min(2 * L - 1, spec.Lmax) + 1):
        rep = cpoc_report(eta.order(j), orbits, theta_samples)
        for N, v in rep.per_period.items():
            best.per_period[N] = max(best.per_period.get(N, 0.0), v)
        if best.argmax_witness is None or rep.defect > best.defect:
            best.defect = rep.defect
            best.argmax_witness = dict(rep.argmax_witness or {}, order=j)
    return best


def poc_per_order_defect(eta: EpsSeriesField, L: int, orbits=None, theta_samples: int | None = None,
                         order_tol: float = DEFAULT_ORDER_TOL) -> float:
    """CPOC defect of each order in ``[L, 2L-1]``, maximized; requires ``eta = Id + O(eps^L)``."""
    return poc_per_order_report(eta, L, orbits, theta_samples, order_tol).defect
