import numpy as np
import pytest
from hypothesis import given, strategies as st

from coboundary.cohomology import residual_commutative, solve_commutative, solve_commutative_series
from coboundary.errors import FCViolation, NonSolvable
from coboundary.families import trig_field
from coboundary.field import AngleActionField, DomainSpec, EpsSeriesField, norm_sup_real, shift_phase

from oracles import coboundary, factor_form, random_alpha, tame_case


@pytest.fixture(scope="module")
def spec():
    return DomainSpec(d=1, rho0=0.5, K=4, M=41, Lmax=6, eps_radius=1.0)


def gauge_free(alpha):
    """``alpha`` with the k = 0 block removed."""
    c = alpha.coeffs.copy()
    c[alpha.spec.mode_index((0,) * alpha.spec.d)] = 0
    return AngleActionField(alpha.spec, c)


class TestSolve:
    def test_zero(self, spec):
        assert not np.any(solve_commutative(AngleActionField.zeros(spec, 2)).coeffs)

    def test_sine_round_trip(self, spec):
        a0 = trig_field(spec, (1,), "sin", np.eye(2))
        beta = coboundary(a0)
        alpha = solve_commutative(beta)
        assert residual_commutative(alpha, beta) <= 1e-10
        assert not np.any(alpha.coeff((0,)))
        assert np.max(np.abs(alpha.coeffs - a0.coeffs)) <= 1e-9

    def test_mean_is_obstruction(self, spec):
        with pytest.raises(NonSolvable):
            solve_commutative(AngleActionField.identity(spec, 2))

    def test_fc_violation(self, spec):
        with pytest.raises(FCViolation) as err:
            solve_commutative(trig_field(spec, (1,), "cos", np.eye(2)))
        assert err.value.defect == pytest.approx(0.5)
        assert err.value.witness["k"] in ([1], [-1])

    def test_fc_check_can_be_skipped(self, spec):
        alpha = solve_commutative(trig_field(spec, (1,), "cos", np.eye(2)), check_fc=False)
        assert np.all(np.isfinite(alpha.coeffs))

    @pytest.mark.parametrize("d,M", [(1, 41), (2, 33)])
    def test_random_round_trip(self, d, M):
        spec = DomainSpec(d=d, rho0=0.5, K=3, M=M, Lmax=1, eps_radius=1.0)
        rng = np.random.default_rng(d)
        for _ in range(3):
            a0 = random_alpha(spec, rng, 2)
            beta = coboundary(a0)
            alpha = solve_commutative(beta)
            assert residual_commutative(alpha, beta) <= 1e-9 * max(1.0, norm_sup_real(beta))
            assert np.max(np.abs((alpha - gauge_free(a0)).coeffs)) <= 1e-8


class TestSeries:
    def test_zero(self, spec):
        out = solve_commutative_series(EpsSeriesField.zeros(spec, 2), 2, 3)
        assert not np.any(out.coeffs)

    def test_single_order(self, spec):
        a0 = gauge_free(random_alpha(spec, np.random.default_rng(0), 2))
        L = 3
        beta = coboundary(a0).as_series(L)
        alpha = solve_commutative_series(beta, L, 2 * L - 1)
        assert alpha.nonzero_orders() == [L]
        assert residual_commutative(alpha.order(L), beta.order(L)) <= 1e-10
        assert np.max(np.abs(alpha.order(L).coeffs - a0.coeffs)) <= 1e-8

    def test_window_only(self, spec):
        rng = np.random.default_rng(1)
        beta = coboundary(random_alpha(spec, rng, 2)).as_series(1) + coboundary(random_alpha(spec, rng, 2)).as_series(4)
        assert solve_commutative_series(beta, 2, 3).nonzero_orders() == []

    def test_error_names_order(self, spec):
        beta = coboundary(random_alpha(spec, np.random.default_rng(2), 2)).as_series(2)
        beta = beta + trig_field(spec, (1,), "cos", np.eye(2)).as_series(3)
        with pytest.raises(FCViolation) as err:
            solve_commutative_series(beta, 2, 3)
        assert err.value.order == 3 and "order 3" in str(err.value)
        with pytest.raises(NonSolvable) as err:
            solve_commutative_series(AngleActionField.identity(spec, 2).as_series(2), 2, 3)
        assert err.value.order == 2


class TestResidual:
    def test_examples(self, spec):
        zero = AngleActionField.zeros(spec, 2)
        assert residual_commutative(zero, zero) == 0
        a0 = random_alpha(spec, np.random.default_rng(3), 2)
        assert residual_commutative(a0, coboundary(a0)) <= 1e-12
        beta = trig_field(spec, (2,), "sin", np.diag([1.0, 2.0]))
        assert residual_commutative(zero, beta) == pytest.approx(norm_sup_real(beta))


class TestProperties:
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2), st.sampled_from([1, 2]))
    def test_residual_contract(self, seed, k0, dim):
        spec = DomainSpec(d=1, rho0=0.5, K=3, M=49, Lmax=1, eps_radius=1.0)
        beta, _ = factor_form(spec, np.random.default_rng(seed), dim, k0)
        alpha = solve_commutative(beta, tol=1e-11)
        assert residual_commutative(alpha, beta) <= 1e-9 * max(1.0, norm_sup_real(beta))

    @given(st.integers(0, 2 ** 32 - 1))
    def test_gauge_freedom(self, seed):
        spec = DomainSpec(d=1, rho0=0.5, K=2, M=25, Lmax=1, eps_radius=1.0)
        rng = np.random.default_rng(seed)
        beta = coboundary(random_alpha(spec, rng, 2))
        alpha = solve_commutative(beta)
        shift = AngleActionField.from_modes(spec, {(0,): rng.standard_normal(spec.node_shape + (2, 2))})
        assert abs(residual_commutative(alpha + shift, beta) - residual_commutative(alpha, beta)) <= 1e-12

    @pytest.mark.parametrize("d,M", [(1, 25), (2, 25)])
    def test_removable_singularity(self, d, M):
        spec = DomainSpec(d=d, rho0=0.5, K=2, M=M, Lmax=1, eps_radius=1.0)
        rng = np.random.default_rng(10 + d)
        beta, g = factor_form(spec, rng, 2)
        alpha = solve_commutative(beta)
        near = np.abs(shift_phase(spec) - 1) <= 1e-6
        near[spec.mode_index((0,) * d)] = False
        assert near.sum() >= 3
        assert np.max(np.abs(alpha.coeffs[near] - g[near])) <= 1e-8

    def test_continuity_across_threshold(self):
        # the node next to I = 1 sits at |e - 1| ~ 1.85e-6 for M = 4097
        spec = DomainSpec(d=1, rho0=0.5, K=1, M=4097, Lmax=1, eps_radius=1.0)
        beta, _ = factor_form(spec, np.random.default_rng(4), 2, normalize=True)
        dist = np.abs(shift_phase(spec) - 1)[spec.mode_index((1,))]
        node = 1
        assert 1e-6 < dist[node] < 2e-6
        divided = solve_commutative(beta, resonance_tol=1e-6).coeff((1,))[node]
        limit = solve_commutative(beta, resonance_tol=2e-6).coeff((1,))[node]
        assert np.max(np.abs(divided - limit)) <= 1e-6

    def test_tame_growth_rate(self):
        ratios = []
        for delta in (1e-1, 1e-2, 1e-3):
            beta, spec = tame_case(delta)
            alpha = solve_commutative(beta)
            ratios.append(norm_sup_real(alpha, 8) / norm_sup_real(beta, 8))
            assert ratios[-1] <= 1.0 / delta  # |alpha_1| <= |beta_1|_rho / (delta |k|)
        fitted = np.array(ratios) * np.array([1e-1, 1e-2, 1e-3])
        assert fitted.max() / fitted.min() <= 5
