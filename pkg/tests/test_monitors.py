from types import SimpleNamespace

import numpy as np
import pytest

from congestio import monitors
from congestio.constitutive import Params
from congestio.grid import GridField
from congestio.solver import FluidState, make_initial, run


def state_of(rho, u, h=1.0, t=0.0):
    return FluidState(t, GridField(np.asarray(rho, float), h),
                      GridField(np.asarray(u, float), h))


@pytest.fixture(scope="module")
def opposing_run():
    p = Params(gamma=10, rho_bar=0.6, L=5.0, N=200, T=0.25)
    s = make_initial("opposing_streams", p, u_max=0.3, sigma=0.35)
    times = [0.25 * k / 25 for k in range(26)]
    traj, recs = run(s, p, output_times=times)
    return p, s, traj, recs


class TestEnergyDefect:
    def test_equilibrium_zero(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        _, recs = run(make_initial("equilibrium", p), p)
        assert monitors.energy_defect(recs) == 0.0

    def test_uniform_translation_zero(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        s = state_of([0.7] * 64, [0.25] * 64, h=p.h)
        _, recs = run(s, p)
        assert monitors.energy_defect(recs) <= 1e-12

    def test_opposing_streams_small_and_refining(self, opposing_run):
        p, s, traj, recs = opposing_run
        d200 = monitors.energy_defect(recs)
        assert d200 <= 0.05
        p2 = Params(gamma=10, rho_bar=0.6, L=5.0, N=400, T=0.25)
        s2 = make_initial("opposing_streams", p2, u_max=0.3, sigma=0.35)
        _, recs2 = run(s2, p2, output_times=[0.25 * k / 25 for k in range(26)])
        # first-order decay; pre-asymptotic at this short horizon, 0.75 is safe
        assert monitors.energy_defect(recs2) <= 0.75 * d200

    def test_dissipated_energy_nondecreasing(self, opposing_run):
        _, _, _, recs = opposing_run
        e = [r.E_dissipated for r in recs]
        assert all(b >= a for a, b in zip(e, e[1:]))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            monitors.energy_defect([])


class TestMomentum:
    def test_zero_fields_pass(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        s = make_initial("equilibrium", p)
        init = monitors.InitialSummary.from_state(s, p)
        rep = monitors.momentum_l1(s, p, init)
        assert rep.mom_u_L1 == 0.0 and rep.mom_w_L1 == 0.0
        assert rep.pass_u and rep.pass_w and rep.pass_dxpi

    def test_triangle_inequality_pointwise(self, opposing_run):
        # |D_c pi| = rho|w - u| <= rho|u| + rho|w| cell by cell, so the L1
        # norms obey dxpi <= mom_u + mom_w at every snapshot
        p, _, traj, recs = opposing_run
        for r in recs:
            assert r.dxpi_L1 <= r.mom_u_L1 + r.mom_w_L1 + 1e-12

    def test_mom_u_exactly_nonincreasing_zero_farfield(self):
        # upwind L1 contraction plus sign-paired implicit diffusion: exact
        # monotonicity for data whose velocity vanishes in the far field
        p = Params(gamma=10, rho_bar=0.7, L=3.0, N=300, T=0.2)
        x = np.linspace(-p.L + p.h / 2, p.L - p.h / 2, p.N)
        s = state_of(np.full(p.N, 0.7), -0.2 * np.exp(-(x / 0.8) ** 2), h=p.h)
        _, recs = run(s, p)
        m = [r.mom_u_L1 for r in recs]
        assert all(b <= a * (1 + 1e-13) for a, b in zip(m, m[1:]))


class TestMaxPrinciples:
    def test_equilibrium_passes(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        s = make_initial("equilibrium", p)
        traj, _ = run(s, p)
        rep = monitors.max_principles(traj.states[-1], s, p)
        assert rep.all_passed

    def test_opposing_passes_at_scheme_tolerance(self, opposing_run):
        p, s, traj, _ = opposing_run
        for st in traj.states:
            assert monitors.max_principles(st, s, p).all_passed

    def test_constructed_velocity_violation_fails(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        s = make_initial("equilibrium", p)
        bad = state_of([0.7] * 64, [0.5] * 64, h=p.h, t=0.1)
        rep = monitors.max_principles(bad, s, p)
        assert not rep.u_in_range
        assert not rep.all_passed


class TestOslc:
    def test_constant_velocity(self):
        assert monitors.oslc_sup(state_of([1.0] * 8, [0.4] * 8)) == 0.0

    def test_decreasing_profile_nonpositive(self):
        x = np.linspace(-3, 3, 101)
        s = state_of(np.ones(101), -np.tanh(x), h=x[1] - x[0])
        assert monitors.oslc_sup(s) <= 0.0

    def test_sine_hand_difference(self):
        # u = sin on {0, pi/2, pi}: centered difference at the middle vanishes
        s = state_of([1.0, 1.0, 1.0], [0.0, 1.0, 0.0], h=np.pi / 2)
        d = (0.0 - 0.0) / np.pi
        grad = (s.u.values[2] - s.u.values[0]) / (2 * s.u.h)
        assert grad == pytest.approx(d, abs=1e-15)

    def test_trajectory_bound_from_a3a(self, opposing_run):
        p, s, traj, recs = opposing_run
        c_osl = monitors.oslc_bound(s, p)
        assert max(r.oslc for r in recs) <= c_osl + 1e-3


class TestSwitchingResidual:
    def test_uniform_background_closed_form(self):
        p = Params(gamma=20, rho_bar=0.7, L=5.0, N=1000, T=0.5)
        s = make_initial("equilibrium", p)
        expected = (1 - 0.7) * (20.0 / 21.0) * 0.7**21 * p.L  # window length L
        assert monitors.switching_residual(s, p) == pytest.approx(expected, rel=1e-3)

    def test_decreases_with_stiffness_at_fixed_state(self):
        vals = []
        for gamma in (5, 10, 20, 40, 80):
            p = Params(gamma=gamma, rho_bar=0.7, L=5.0, N=256, T=0.5)
            vals.append(monitors.switching_residual(make_initial("equilibrium", p), p))
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_fully_congested_zero(self):
        p = Params(gamma=10, rho_bar=1.0, L=5.0, N=64, T=0.5)
        s = state_of([1.0] * 64, [0.0] * 64, h=p.h)
        assert monitors.switching_residual(s, p) == 0.0

    def test_vacuum_zero(self):
        p = Params(gamma=10, rho_bar=1.0, L=5.0, N=64, T=0.5)
        fake = SimpleNamespace(rho=GridField(np.zeros(64), p.h))
        assert monitors.switching_residual(fake, p) == 0.0


class TestEntropyDefect:
    def test_equilibrium_zero(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        traj, _ = run(make_initial("equilibrium", p), p,
                      output_times=[0.1 * k for k in range(6)])
        assert monitors.entropy_defect(traj, "square") == 0.0

    def test_uniform_translation_zero(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        s = state_of([0.7] * 64, [0.25] * 64, h=p.h)
        traj, _ = run(s, p, output_times=[0.1 * k for k in range(6)])
        assert monitors.entropy_defect(traj, "square") <= 1e-12

    def test_dissipative_run_nonpositive_residuals(self, opposing_run):
        _, _, traj, _ = opposing_run
        for S_id in ("square", "abs_smooth"):
            res = monitors.entropy_residuals(traj, S_id)
            assert np.max(res) <= 0.0
            assert monitors.entropy_defect(traj, S_id) == 0.0

    def test_alpha_insensitivity(self, opposing_run):
        _, _, traj, _ = opposing_run
        a = monitors.ABS_SMOOTH_ALPHA
        r1 = np.max(np.abs(monitors.entropy_residuals(traj, "abs_smooth", a)))
        r2 = np.max(np.abs(monitors.entropy_residuals(traj, "abs_smooth", a / 2)))
        assert abs(r1 - r2) <= 1e-4 * max(r1, 1e-14)

    def test_unknown_entropy_rejected(self, opposing_run):
        _, _, traj, _ = opposing_run
        with pytest.raises(ValueError, match="unknown entropy"):
            monitors.entropy_defect(traj, "cube")


class TestPiConsistency:
    def test_equilibrium_zero(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        traj, _ = run(make_initial("equilibrium", p), p,
                      output_times=[0.1 * k for k in range(6)])
        assert monitors.pi_consistency(traj, p) <= 1e-13

    def test_uniform_translation_zero(self):
        p = Params(gamma=5, rho_bar=0.7, L=5.0, N=64, T=0.5)
        s = state_of([0.7] * 64, [0.25] * 64, h=p.h)
        traj, _ = run(s, p, output_times=[0.1 * k for k in range(6)])
        assert monitors.pi_consistency(traj, p) <= 1e-12

    def test_refinement_decreases(self):
        # trajectory refined as a whole: grid and snapshot cadence together
        defects = []
        for N in (200, 400):
            p = Params(gamma=10, rho_bar=0.7, L=5.0, N=N, T=0.25)
            s = make_initial("congested_bump", p, delta=0.02, u_max=0.2)
            nsnap = N // 8
            traj, _ = run(s, p, output_times=[0.25 * k / nsnap for k in range(nsnap + 1)])
            defects.append(monitors.pi_consistency(traj, p))
        assert defects[1] <= 0.7 * defects[0]


class TestRecordSchema:
    def test_columns_match_dataclass(self):
        assert monitors.CSV_COLUMNS[0] == "t"
        assert "switching_L1" in monitors.CSV_COLUMNS
        assert "E_boundary" in monitors.CSV_COLUMNS

    def test_csv_row_roundtrip(self, opposing_run):
        _, _, _, recs = opposing_run
        row = monitors.csv_row(recs[-1])
        vals = row.split(",")
        assert len(vals) == len(monitors.CSV_COLUMNS)
        assert float(vals[0]) == recs[-1].t

    def test_density_floor_formula(self):
        assert monitors.density_floor(0.5, 0.7, 2.0) == pytest.approx(
            1.0 / (2.0 * 0.5 + 1.0 / 0.7))
        assert monitors.density_floor(1.0, 0.5, -3.0) == np.inf


class TestLocalDensityCap:
    def test_sobolev_cap_holds_with_measured_constants(self, opposing_run):
        p, _, _, recs = opposing_run
        K_pi = (max(r.pi_L1_local for r in recs) * (p.gamma + 1) / p.gamma
                + max(r.dxpi_L1 for r in recs))
        cap = K_pi ** (1.0 / (p.gamma + 1))
        assert max(r.rho_max for r in recs) <= cap
