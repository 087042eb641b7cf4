import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coboundary.field import AngleActionField, DomainSpec, EpsSeriesField

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def spec1():
    return DomainSpec(d=1, rho0=0.5, K=4, M=41, Lmax=6, eps_radius=0.5)


@pytest.fixture
def spec2():
    return DomainSpec(d=2, rho0=0.5, K=2, M=17, Lmax=4, eps_radius=0.5)


def scalar_times(spec, fn, matrix):
    """Field ``fn(theta, I) * matrix`` for a scalar function ``fn``."""
    matrix = np.asarray(matrix, dtype=complex)
    return AngleActionField.from_function(spec, lambda th, I: np.asarray(fn(th, I))[..., None, None] * matrix)


def random_trig(spec, rng, dim, k0=1, degree=2, scale=1.0):
    """Real trig polynomial with polynomial-in-I coefficients."""
    nodes = np.moveaxis(spec.node_grid(), -1, 0)
    modes = {}
    grid = np.stack(np.meshgrid(*([np.arange(-k0, k0 + 1)] * spec.d), indexing="ij"), -1).reshape(-1, spec.d)
    for k in grid:
        nz = np.flatnonzero(k)
        if nz.size and k[nz[0]] < 0:
            continue
        block = np.zeros(spec.node_shape + (dim, dim), dtype=complex)
        for p in range(degree + 1):
            for a in range(spec.d):
                mat = rng.standard_normal((dim, dim)) + (1j * rng.standard_normal((dim, dim)) if nz.size else 0)
                block += (nodes[a] ** p)[..., None, None] * mat
        block *= scale
        modes[tuple(int(x) for x in k)] = block
        if nz.size:
            modes[tuple(int(-x) for x in k)] = np.conj(block)
    return AngleActionField.from_modes(spec, modes)


def normalized(field, size=1.0):
    from coboundary.field import norm_sup_real
    n = norm_sup_real(field)
    return field * (size / n) if n > 0 else field


def identity_series(spec, dim):
    return EpsSeriesField.identity(spec, dim)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
