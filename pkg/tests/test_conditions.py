import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coboundary.algebra import op_norm
from coboundary.conditions import (PeriodicActionSet, cpoc_defect, cpoc_report, enumerate_periodic_actions, fc_defect,
                                   fc_report, orbit_sum, poc_defect, poc_per_order_defect, poc_per_order_report,
                                   poc_report)
from coboundary.errors import DomainError, PreconditionViolation
from coboundary.families import make_coboundary_family, make_random_phi, perturb, trig_field
from coboundary.field import AngleActionField, DomainSpec, EpsSeriesField, compose_f, conjugate

from conftest import random_trig

C = np.array([[0.0, 0.06], [-0.08, 0.02]])


@pytest.fixture(scope="module")
def spec():
    return DomainSpec(d=1, rho0=0.5, K=8, M=33, Lmax=12, eps_radius=0.5)


def coboundary_of(alpha):
    return compose_f(alpha) - alpha


class TestEnumeration:
    def test_examples(self):
        assert [ell for ell, _ in enumerate_periodic_actions(1, 1)] == [(-1,), (0,), (1,)]
        assert sorted(Fraction(l[0], N) for l, N in enumerate_periodic_actions(1, 2)) == \
            [Fraction(-1), Fraction(-1, 2), Fraction(0), Fraction(1, 2), Fraction(1)]
        assert len(enumerate_periodic_actions(1, 5)) == 21

    @given(st.integers(1, 3), st.integers(1, 7))
    def test_matches_brute_force(self, d, Nmax):
        got = {tuple(Fraction(x, N) for x in ell) for ell, N in enumerate_periodic_actions(d, Nmax)}
        assert len(got) == len(enumerate_periodic_actions(d, Nmax))
        brute = set()
        for N in range(1, Nmax + 1):
            axis = sorted({Fraction(l, N) for l in range(-N, N + 1)})
            for point in np.array(np.meshgrid(*[range(len(axis))] * d)).reshape(d, -1).T:
                q = tuple(axis[i] for i in point)
                brute.add(q)
        assert got == brute
        for ell, N in enumerate_periodic_actions(d, Nmax):
            assert np.allclose(N * (np.array(ell) / N), np.round(N * (np.array(ell) / N)))

    def test_guards(self):
        with pytest.raises(DomainError):
            PeriodicActionSet(1, 4, (((2,), 4),))
        with pytest.raises(DomainError):
            PeriodicActionSet(1, 4, (((1,), 2), ((1,), 2)))
        with pytest.raises(DomainError):
            enumerate_periodic_actions(1, 0)


class TestCommutativeConditions:
    def test_cpoc_examples(self, spec):
        assert cpoc_defect(AngleActionField.zeros(spec, 2)) == 0
        sine = trig_field(spec, (1,), "sin", np.eye(2))
        assert cpoc_defect(coboundary_of(sine)) <= 1e-10
        rep = cpoc_report(AngleActionField.identity(spec, 2))
        assert all(abs(v - N) < 1e-12 for N, v in rep.per_period.items())

    def test_orbit_sum_agrees_with_spectral_scan(self, spec):
        rng = np.random.default_rng(0)
        beta = random_trig(spec, rng, 2, k0=2)
        rep = cpoc_report(beta)
        w = rep.argmax_witness
        direct = orbit_sum(beta, w["ell"], w["N"], [w["theta"]])
        assert abs(float(op_norm(direct[0])) - rep.defect) < 1e-11

    def test_fc_examples(self, spec):
        assert fc_defect(AngleActionField.zeros(spec, 2)) == 0
        factor = AngleActionField.from_modes(spec, {(1,): lambda I: np.multiply.outer(np.exp(2j * np.pi * I[0]) - 1, np.eye(2))})
        assert fc_defect(factor) <= 1e-12
        rep = fc_report(trig_field(spec, (1,), "cos", np.eye(2)))
        assert abs(rep.defect - 0.5) <= 1e-12
        assert set(rep.argmax_witness) == {"k", "n", "I"}

    def test_fc_counts_the_mean(self, spec):
        assert fc_defect(AngleActionField.constant(spec, 0.3 * np.eye(2))) == pytest.approx(0.3)

    @pytest.mark.parametrize("d", [1, 2])
    def test_cpoc_and_fc_hold_for_coboundaries(self, d):
        # the I-grid must resolve e^{2 pi i <k, I>} for the modes present
        spec = DomainSpec(d=d, rho0=0.5, K=4, M=41 if d == 1 else 33, Lmax=2, eps_radius=1.0)
        rng = np.random.default_rng(d)
        for _ in range(3):
            beta = coboundary_of(random_trig(spec, rng, 2, k0=2 if d == 1 else 1))
            assert cpoc_defect(beta, 8) <= 1e-9
            assert fc_defect(beta) <= 1e-9

    def test_fc_violation_is_seen_by_cpoc(self, spec):
        beta = trig_field(spec, (2,), "cos", np.eye(2))
        assert cpoc_report(beta).per_period[2] >= 1.0 - 1e-12
        assert fc_defect(beta) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("d", [1, 2])
    def test_reduced_torus_identity(self, d):
        spec = DomainSpec(d=d, rho0=0.5, K=3, M=13, Lmax=2, eps_radius=1.0)
        beta = random_trig(spec, np.random.default_rng(9), 2, k0=3)
        T = 2 * spec.K + 1
        grid = np.stack(np.meshgrid(*[np.arange(T) / T] * d, indexing="ij"), -1).reshape(-1, d)
        for ell, N in enumerate_periodic_actions(d, 4):
            I = np.array(ell) / N
            sums = orbit_sum(beta, ell, N, grid)
            for k in spec.mode_grid().reshape(-1, d):
                if abs(round(k @ I) - k @ I) > 1e-12:
                    continue
                quad = np.tensordot(np.exp(-2j * np.pi * grid @ k), sums, axes=(0, 0)) / grid.shape[0]
                value = AngleActionField.from_modes(spec, {tuple(k): beta.coeff(tuple(k))}).evaluate(
                    np.zeros((1, d)), I[None, :])[0]
                assert np.max(np.abs(N * value - quad)) < 1e-9


class TestPOC:
    def test_identity(self, spec):
        assert poc_defect(EpsSeriesField.identity(spec, 2), 6) <= 1e-13

    def test_constant_perturbation_binomial(self, spec):
        eta = perturb(EpsSeriesField.identity(spec, 2), C)
        eps = [0.25, 0.5j, -0.5]
        rep = poc_report(eta, 6, eps_samples=eps)
        for N, value in rep.per_period.items():
            expect = max(float(op_norm(np.linalg.matrix_power(np.eye(2) + e * C, N) - np.eye(2))) for e in eps)
            assert value == pytest.approx(expect, rel=1e-12)
            assert value >= N * 0.5 * op_norm(C) - 0.5 ** 2 * N ** 2 * op_norm(C) ** 2
        assert rep.first_order == 1
        for N, value in rep.per_period_first_order.items():
            assert value == pytest.approx(N * op_norm(C), abs=1e-12)
        assert set(rep.argmax_witness) == {"ell", "N", "theta", "eps"}

    def test_coboundary_passes(self, spec):
        eta = make_coboundary_family(make_random_phi(spec, seed=3, amplitude=0.05))
        assert poc_defect(eta, 12) <= 1e-9

    def test_eps_samples_must_be_in_disk(self, spec):
        with pytest.raises(DomainError):
            poc_defect(EpsSeriesField.identity(spec, 2), 2, eps_samples=[1.0])

    def test_conjugation_invariance(self, spec):
        eye = EpsSeriesField.identity(spec, 2)
        psi = make_random_phi(spec, seed=4, amplitude=0.05)
        eta = make_coboundary_family(psi)
        phi = make_random_phi(spec, seed=5, amplitude=0.05)
        assert poc_defect(eye, 8) <= 1e-10
        assert poc_defect(conjugate(eye, phi), 8) <= 1e-8
        assert poc_defect(conjugate(eta, phi), 8) <= 1e-8

    def test_non_commuting_order_matters(self, spec):
        # eta depends on theta so the orbit product is ordered; a coboundary
        # passes only with latest points on the left
        phi = make_random_phi(spec, seed=6, amplitude=0.05)
        eta = make_coboundary_family(phi)
        reverse = EpsSeriesField(spec, np.swapaxes(eta.coeffs, -1, -2))
        assert poc_defect(eta, 4) < 1e-9 < poc_defect(reverse, 4)


class TestPerOrder:
    def test_examples(self, spec):
        L = 2
        assert poc_per_order_defect(EpsSeriesField.identity(spec, 2), L, 6) == 0
        alpha = random_trig(spec, np.random.default_rng(1), 2, scale=0.05)
        phi = EpsSeriesField.identity(spec, 2) + alpha.as_series(L)
        assert poc_per_order_defect(conjugate(EpsSeriesField.identity(spec, 2), phi), L, 12) <= 1e-9
        bad = EpsSeriesField.identity(spec, 2) + AngleActionField.identity(spec, 2).as_series(L)
        rep = poc_per_order_report(bad, L, 12)
        assert all(abs(v - N) < 1e-12 for N, v in rep.per_period.items())
        assert rep.argmax_witness["order"] == L

    def test_low_orders_checked(self, spec):
        eta = perturb(EpsSeriesField.identity(spec, 2), C, order=1)
        with pytest.raises(PreconditionViolation) as err:
            poc_per_order_defect(eta, 2, 4)
        assert err.value.reason == "order"
        shifted = EpsSeriesField.identity(spec, 2) * 2.0
        with pytest.raises(PreconditionViolation) as err:
            poc_per_order_defect(shifted, 1, 4)
        assert err.value.reason == "identity"
