"""Independent constructions with known answers, shared by the unit and acceptance tests."""
import numpy as np

from coboundary.field import AngleActionField, DomainSpec, compose_f, shift_phase


def random_poly_block(spec, rng, dim, degree=2):
    """Random matrix polynomial of total degree <= ``degree`` in I at the nodes."""
    nodes = np.moveaxis(spec.node_grid(), -1, 0)
    block = np.zeros(spec.node_shape + (dim, dim), dtype=complex)
    exps = np.stack(np.meshgrid(*[np.arange(degree + 1)] * spec.d, indexing="ij"), -1).reshape(-1, spec.d)
    for e in exps[exps.sum(axis=1) <= degree]:
        mono = np.prod([nodes[a] ** e[a] for a in range(spec.d)], axis=0)
        mat = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        block += mono[..., None, None] * mat
    return block


def random_alpha(spec, rng, dim, k0=1, size=1.0):
    """Real trig polynomial with random quadratic-in-I coefficients, sup norm ``size``."""
    from coboundary.field import norm_sup_real
    modes = {}
    grid = np.stack(np.meshgrid(*[np.arange(-k0, k0 + 1)] * spec.d, indexing="ij"), -1).reshape(-1, spec.d)
    for k in grid:
        nz = np.flatnonzero(k)
        if nz.size and k[nz[0]] < 0:
            continue
        block = random_poly_block(spec, rng, dim)
        if not nz.size:
            block = block.real.astype(complex)
        modes[tuple(int(x) for x in k)] = block
        if nz.size:
            modes[tuple(int(-x) for x in k)] = np.conj(block)
    alpha = AngleActionField.from_modes(spec, modes)
    return alpha * (size / norm_sup_real(alpha))


def coboundary(alpha):
    return compose_f(alpha) - alpha


def factor_form(spec, rng, dim, k0=1, normalize=False):
    """``beta_k(I) = (e^{2 pi i <k, I>} - 1) g_k(I)`` with random polynomial ``g_k``; returns ``(beta, g)``.

    With ``normalize`` the entries of ``g`` are scaled to a maximum modulus of 1.
    """
    ph = shift_phase(spec)
    g = np.zeros(spec.block_shape(dim), dtype=complex)
    for k in np.stack(np.meshgrid(*[np.arange(-k0, k0 + 1)] * spec.d, indexing="ij"), -1).reshape(-1, spec.d):
        if not k.any():
            continue
        idx = spec.mode_index(tuple(int(x) for x in k))
        g[idx] = random_poly_block(spec, rng, dim)
    if normalize:
        g /= np.max(np.abs(g))
    beta = AngleActionField(spec, (ph - 1)[..., None, None] * g)
    return beta, g


def tame_case(delta, M=32769):
    """Single-mode ``beta_1 = (e - 1)/(e - q)``, ``e = e^{2 pi i I}``, ``q = e^{-2 pi delta}``.

    It vanishes on every resonance, and its solution ``alpha_1 = 1/(e - q)``
    has a pole at distance ``delta`` from the real axis, so ``|alpha_1|``
    peaks at ``1/(1 - q) ~ 1/(2 pi delta)`` while ``|beta_1| <= 2/(1 + q)``.
    """
    spec = DomainSpec(d=1, rho0=0.5, K=1, M=M, Lmax=1, eps_radius=1.0)
    q = np.exp(-2 * np.pi * delta)

    def block(I):
        e = np.exp(2j * np.pi * I[0])
        return ((e - 1) / (e - q))[..., None, None] * np.eye(1)

    return AngleActionField.from_modes(spec, {(1,): block}), spec
