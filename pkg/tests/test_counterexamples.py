import numpy as np
import pytest

from congestio import duality as dual
from congestio.counterexamples import (concrete_family, family_general,
                                       nonuniqueness_gap, pair_remark,
                                       validity_horizon, weak_residual)
from congestio.grid import DomainError, GridField

X = np.linspace(-1.0, 1.0, 181)


@pytest.fixture(scope="module")
def concrete():
    return concrete_family(T=1.0, x_half=1.0)


class TestFamilyGeneral:
    def test_zero_velocity_collapses_pair(self):
        f = lambda x: np.exp(np.asarray(x) ** 2)
        fp = lambda x: 2.0 * np.asarray(x) * np.exp(np.asarray(x) ** 2)
        s1, s2 = family_general(f, fp, lambda t: 0.0, 1.0, 1.0)
        for t in (0.0, 0.5, 1.0):
            assert np.allclose(s1.m(t, X), s2.m(t, X))
            assert np.allclose(s1.pi(t, X), s2.pi(t, X))
            assert np.allclose(s1.u(t, X), 0.0)

    def test_nonvanishing_initial_velocity_rejected(self):
        f = lambda x: np.exp(np.asarray(x) ** 2)
        fp = lambda x: 2.0 * np.asarray(x) * np.exp(np.asarray(x) ** 2)
        with pytest.raises(DomainError, match="c\\(0\\)"):
            family_general(f, fp, lambda t: 1.0, 1.0, 1.0)

    def test_positivity_precondition_sampled(self):
        # c large enough that f(x) - c(t) x dips negative on the window
        f = lambda x: np.exp(np.asarray(x) ** 2)
        fp = lambda x: 2.0 * np.asarray(x) * np.exp(np.asarray(x) ** 2)
        with pytest.raises(DomainError, match="positivity"):
            family_general(f, fp, lambda t: -10.0 * t, 1.0, 1.0)

    def test_adaptive_velocity_integral(self):
        # no closed-form integral supplied: quadrature path
        f = lambda x: np.exp(np.asarray(x) ** 2)
        fp = lambda x: 2.0 * np.asarray(x) * np.exp(np.asarray(x) ** 2)
        s1, _ = family_general(f, fp, lambda t: -t, 1.0, 1.0)
        ref, _ = concrete_family(T=1.0, x_half=1.0)
        for t in (0.3, 0.9):
            assert np.allclose(s1.m(t, X), ref.m(t, X), rtol=1e-10)


class TestConcreteFamily:
    def test_shared_initial_data_explicit_values(self, concrete):
        s1, s2 = concrete
        assert np.array_equal(s1.rho(0.0, X), np.ones_like(X))
        assert np.allclose(s1.m(0.0, X), 2.0 * X * np.exp(X**2), rtol=0, atol=0)
        assert np.allclose(s1.pi(0.0, X), np.exp(X**2), rtol=0, atol=0)
        assert np.max(np.abs(s1.m(0.0, X) - s2.m(0.0, X))) <= 1e-14
        assert np.max(np.abs(s1.pi(0.0, X) - s2.pi(0.0, X))) <= 1e-14

    def test_moving_branch_closed_form(self, concrete):
        s1, _ = concrete
        for t in (0.25, 0.6, 1.0):
            shift = t**2 / 2.0
            assert np.allclose(s1.m(t, X), 2.0 * (X + shift) * np.exp((X + shift) ** 2))
            assert np.allclose(s1.pi(t, X), np.exp((X + shift) ** 2) + t * X)
            assert np.allclose(s1.u(t, X), -t)

    def test_weak_residuals_below_quadrature_tolerance(self, concrete):
        s1, s2 = concrete
        r1 = weak_residual(s1, 1.0, 1.0, order=12)
        r2 = weak_residual(s2, 1.0, 1.0, order=12)
        assert max(r1) <= 1e-8
        assert max(r2[:2]) <= 1e-10  # static branch: analytically zero
        assert r1[2] == 0.0 and r2[2] == 0.0  # fully congested constraint

    def test_potential_positive_on_window(self, concrete):
        for sol in concrete:
            ts = np.linspace(0.0, 1.0, 60)
            assert min(float(np.min(sol.pi(t, X))) for t in ts) >= -1e-12
            assert validity_horizon(sol, 1.0, 1.0) == 1.0


class TestNonuniquenessGap:
    def test_zero_at_shared_initial_data(self, concrete):
        assert nonuniqueness_gap(*concrete, 0.0, 1.0) == pytest.approx(0.0, abs=1e-13)

    def test_positive_at_final_time(self, concrete):
        gap = nonuniqueness_gap(*concrete, 1.0, 1.0)
        assert gap > 0.1
        assert gap == pytest.approx(0.5694, abs=2e-3)  # frozen regression value

    def test_self_distance_vanishes(self, concrete):
        s1, _ = concrete
        assert nonuniqueness_gap(s1, s1, 1.0, 1.0) == 0.0


class TestPairRemark:
    def test_both_members_solve_weakly(self):
        sa, sb = pair_remark(T=1.0)
        assert max(weak_residual(sa, 1.0, 1.0)) <= 1e-8
        assert max(weak_residual(sb, 1.0, 1.0)) <= 1e-8

    def test_shared_initial_momentum_only(self):
        sa, sb = pair_remark(T=1.0)
        assert np.max(np.abs(sa.m(0.0, X) - sb.m(0.0, X))) <= 1e-14
        # the potentials differ from t = 0: nonuniqueness of the pair (rho, m)
        assert np.max(np.abs(sa.pi(0.0, X) - sb.pi(0.0, X))) > 0.1

    def test_gap_grows_from_zero(self):
        sa, sb = pair_remark(T=1.0)
        assert nonuniqueness_gap(sa, sb, 0.0, 1.0) == pytest.approx(0.0, abs=1e-13)
        assert nonuniqueness_gap(sa, sb, 1.0, 1.0) > 0.1

    def test_needs_positive_horizon(self):
        with pytest.raises(DomainError):
            pair_remark(0.0)


class TestDualityCrossCheck:
    def test_sampled_family_passes_hcl_check(self, concrete):
        # sample (rho, m, pi, u) of the moving branch on a grid and verify the
        # four duality-solution conditions at sampling tolerance
        s1, _ = concrete
        L, N = 1.5, 300
        h = 2 * L / N
        grid = GridField(np.zeros(N), h)
        x = grid.centers()
        times = np.linspace(0.0, 1.0, 11)
        u = dual.VelocityField(times, grid,
                               np.stack([s1.u(t, x) for t in times]),
                               osl_bound=0.0, sup_bound=1.0)
        rho_traj = [GridField(s1.rho(t, x), h) for t in times]
        m_traj = [dual.Measure1D(GridField(s1.m(t, x), h)) for t in times]
        pi_traj = [GridField(s1.pi(t, x), h) for t in times]
        # profiles whose flow pullback (drift up to 1/2) stays in the window
        from congestio.testbank import hat_bank
        rep = dual.hcl_duality_check(rho_traj, m_traj, pi_traj, u, tol=0.02,
                                     profile_bank=hat_bank(0.6))
        assert rep.all_passed, rep

    def test_free_potential_violation_detected(self, concrete):
        s1, _ = concrete
        L, N = 1.5, 120
        h = 2 * L / N
        grid = GridField(np.zeros(N), h)
        x = grid.centers()
        times = np.linspace(0.0, 1.0, 5)
        u = dual.VelocityField(times, grid, np.zeros((5, N)), 0.0, 1e-12)
        rho_traj = [GridField(np.full(N, 0.5), h)] * 5   # free phase
        m_traj = [dual.Measure1D(GridField(np.zeros(N), h))] * 5
        pi_traj = [GridField(np.full(N, 1.0), h)] * 5    # but pi > 0
        rep = dual.hcl_duality_check(rho_traj, m_traj, pi_traj, u, tol=0.1)
        assert rep.switching_sup > 0.1
        assert not rep.all_passed


def test_runtime_budget(concrete):
    import time
    t0 = time.perf_counter()
    s1, s2 = concrete_family(T=1.0, x_half=1.0)
    weak_residual(s1, 1.0, 1.0)
    weak_residual(s2, 1.0, 1.0)
    nonuniqueness_gap(s1, s2, 1.0, 1.0)
    sa, sb = pair_remark(T=1.0)
    weak_residual(sa, 1.0, 1.0)
    weak_residual(sb, 1.0, 1.0)
    assert time.perf_counter() - t0 < 5.0
