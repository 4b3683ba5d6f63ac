import numpy as np
import pytest

from rdalab.dynamics import (
    dissipativity_report,
    integrate,
    integrate_variational,
    make_system,
    scalar_rda,
    step,
    variational_step,
)
from rdalab.errors import DivergenceError
from rdalab.spectral import FourierField, random_real_field, sobolev_norm

from conftest import make_sin


class TestLinearFidelity:
    def test_heat_mode_decay(self):
        # with the +u term: sin x decays at rate 1^2 + 1 = 2
        sys = make_system("linear-heat")
        u0 = make_sin(16)
        traj = integrate(sys, u0, 0.0, 1.0, 1e-2)
        exact = np.exp(-2.0) * u0.coeffs
        assert np.max(np.abs(traj.final.coeffs - exact)) < 1e-9

    def test_pure_laplacian_mode_decay(self):
        sys = make_system("linear-heat", include_linear_u=False)
        u0 = FourierField.from_modes(8, {(0, 3): 1.0})
        traj = integrate(sys, u0, 0.0, 1.0, 1e-2)
        assert abs(traj.final.coefficient(3) - np.exp(-9.0)) < 1e-9

    def test_all_modes_exact_rate(self, rng):
        sys = make_system("linear-heat")
        u0 = random_real_field(rng, 16, decay=1.5)
        traj = integrate(sys, u0, 0.0, 1.0, 1e-2)
        n = u0.wavenumbers
        exact = u0.coeffs * np.exp(-(n**2 + 1.0))
        assert np.max(np.abs(traj.final.coeffs - exact)) < 1e-9


class TestNonlinearStepping:
    def test_step_halving_reference(self, rng):
        sys = make_system("burgers", radius=10.0)
        u0 = 0.1 * make_sin(32)
        coarse = integrate(sys, u0, 0.0, 0.5, 1e-2).final
        fine = integrate(sys, u0, 0.0, 0.5, 5e-3).final
        assert sobolev_norm(coarse - fine, 0.0) < 1e-8

    def test_self_convergence_order(self):
        sys = make_system("tanh-cubic", amplitude=1.0, g_amplitude=1.0, radius=10.0)
        u0 = make_sin(32, amplitude=0.8)
        ref = integrate(sys, u0, 0.0, 0.5, 6.25e-4).final
        errs = []
        for dt in (1e-2, 5e-3, 2.5e-3):
            out = integrate(sys, u0, 0.0, 0.5, dt).final
            errs.append(sobolev_norm(out - ref, 0.0))
        assert errs[0] / errs[1] >= 8.0
        assert errs[1] / errs[2] >= 8.0

    def test_semigroup_property(self, rng):
        sys = make_system("advect-tanh", amplitude=1.0, radius=10.0)
        u0 = random_real_field(rng, 32, decay=2.0, target_h1=1.0)
        whole = integrate(sys, u0, 0.0, 1.0, 1e-3).final
        half = integrate(sys, u0, 0.0, 0.5, 1e-3).final
        again = integrate(sys, half, 0.5, 1.0, 1e-3).final
        assert sobolev_norm(whole - again, 0.0) < 1e-9

    def test_step_equals_integrate_single(self):
        sys = make_system("burgers", radius=10.0)
        u0 = 0.2 * make_sin(16)
        one = step(u0, 0.0, 1e-3, sys)
        traj = integrate(sys, u0, 0.0, 1e-3, 1e-3)
        assert np.allclose(one.coeffs, traj.final.coeffs)

    def test_realness_preserved(self, rng):
        sys = make_system("tanh-cubic", amplitude=1.0, g_amplitude=0.5, radius=10.0)
        u0 = random_real_field(rng, 32, decay=2.0, target_h1=1.0)
        traj = integrate(sys, u0, 0.0, 0.5, 1e-3)
        defect = traj.final.conj_symmetry_defect()
        assert defect < 1e-12

    def test_divergence_signal_carries_time_and_partial(self):
        sys = make_system("burgers", cut=False)  # no support cut-off
        u0 = 30.0 * make_sin(48)
        with pytest.raises(DivergenceError) as err:
            integrate(sys, u0, 0.0, 2.0, 5e-2)
        assert err.value.t > 0
        assert err.value.trajectory is not None
        assert err.value.trajectory.diverged


class TestDissipativity:
    def test_lipschitz_growth_bound(self, rng):
        # ||u1(t) - u2(t)||_{H1} <= e^{C t / 2} ||u1(0) - u2(0)||_{H1}
        sys = make_system("advect-tanh", amplitude=1.0, radius=10.0)
        fitted = []
        pairs = []
        for _ in range(3):
            u0 = random_real_field(rng, 32, decay=2.0, target_h1=1.5)
            du = random_real_field(rng, 32, decay=2.0, target_h1=1e-3)
            ta = integrate(sys, u0, 0.0, 1.0, 2e-3, record_stride=50)
            tb = integrate(sys, u0 + du, 0.0, 1.0, 2e-3, record_stride=50)
            pairs.append((ta, tb))
            for t, a, b in zip(ta.times[1:], ta.states[1:], tb.states[1:]):
                ratio = sobolev_norm(a - b, 1.0) / sobolev_norm(du, 1.0)
                fitted.append(2.0 * np.log(max(ratio, 1e-12)) / t)
        c_fit = max(fitted)
        for ta, tb in pairs:
            for t, a, b in zip(ta.times[1:], ta.states[1:], tb.states[1:]):
                lhs = sobolev_norm(a - b, 1.0) ** 2
                rhs = np.exp(c_fit * t) * sobolev_norm(
                    ta.states[0] - tb.states[0], 1.0
                ) ** 2
                assert lhs <= rhs * 1.05

    def test_absorbing_ball_from_large_data(self, rng):
        sys = make_system("tanh-cubic", amplitude=1.0, g_amplitude=1.0, radius=5.0)
        u0 = random_real_field(rng, 48, decay=1.8, target_h1=50.0)
        traj = integrate(sys, u0, 0.0, 6.0, 1e-3, record_stride=100)
        tail = [u for t, u in zip(traj.times, traj.states) if t >= 3.0]
        tail_norms = [sobolev_norm(u, 1.0) for u in tail]
        assert max(tail_norms) < 5.0  # entered a fixed ball and stayed

    def test_heat_decay_rate_fit(self):
        sys = make_system("linear-heat")
        u0 = FourierField.from_modes(16, {(0, 0): 1.0}) + make_sin(16)
        traj = integrate(sys, u0, 0.0, 3.0, 1e-2, record_stride=5)
        rep = dissipativity_report(traj)
        assert rep.fits["l2"]["delta"] >= 1.0 - 0.05
        assert rep.ok

    def test_smoothing_rough_data(self, rng):
        # H1-but-not-H2 data: c_n ~ n^{-1.6}; sqrt(t)*||u||_{H2} bounded on (0,1]
        sys = make_system("linear-heat")
        u0 = random_real_field(rng, 128, decay=1.6, target_h1=2.0)
        traj = integrate(sys, u0, 0.0, 1.0, 2e-4, record_stride=10)
        rep = dissipativity_report(traj)
        assert np.isfinite(rep.smoothing_bound)
        assert rep.smoothing_bound < 6.0

    def test_divergent_run_flags_violation(self):
        sys = make_system("burgers", cut=False)
        u0 = 30.0 * make_sin(48)
        traj = integrate(sys, u0, 0.0, 2.0, 5e-2, raise_on_divergence=False)
        rep = dissipativity_report(traj)
        assert rep.diverged and not rep.ok


class TestVariational:
    def test_linear_system_matches_difference_exactly(self, rng):
        sys = scalar_rda(g=lambda u: 0.5 * u, dg=lambda u: 0.5 * np.ones_like(u))
        w0 = random_real_field(rng, 16, decay=2.0)
        xi0 = random_real_field(rng, 16, decay=2.0)
        _, traj_xi = integrate_variational(sys, w0, xi0, 0.0, 0.5, 1e-3)
        a = integrate(sys, w0 + xi0, 0.0, 0.5, 1e-3).final
        b = integrate(sys, w0, 0.0, 0.5, 1e-3).final
        diff = a - b
        assert sobolev_norm(traj_xi.final - diff, 1.0) < 1e-12

    def test_matches_finite_differences_first_order(self, rng):
        sys = make_system("tanh-cubic", amplitude=1.0, g_amplitude=1.0, radius=10.0)
        w0 = random_real_field(rng, 32, decay=2.0, target_h1=1.0)
        xi0 = random_real_field(rng, 32, decay=2.0, target_h1=1.0)
        _, traj_xi = integrate_variational(sys, w0, xi0, 0.0, 0.3, 1e-3)
        errs = {}
        for h in (1e-3, 1e-4):
            a = integrate(sys, w0 + h * xi0, 0.0, 0.3, 1e-3).final
            b = integrate(sys, w0, 0.0, 0.3, 1e-3).final
            fd = (a - b) / h
            errs[h] = sobolev_norm(traj_xi.final - fd, 1.0)
        assert errs[1e-3] < 5e-3
        assert errs[1e-4] < errs[1e-3] / 3.0  # first order in h

    def test_zero_direction_stays_zero(self, rng):
        sys = make_system("advect-tanh", amplitude=1.0, radius=10.0)
        w0 = random_real_field(rng, 16, decay=2.0, target_h1=1.0)
        xi = variational_step(w0, FourierField.zeros(16), 0.0, 1e-3, sys)
        assert np.all(xi.coeffs == 0.0)

    def test_variational_step_consistent_with_co_integration(self, rng):
        sys = make_system("advect-tanh", amplitude=0.8, radius=10.0)
        w0 = random_real_field(rng, 16, decay=2.0, target_h1=1.0)
        xi0 = random_real_field(rng, 16, decay=2.0, target_h1=1.0)
        one = variational_step(w0, xi0, 0.0, 1e-3, sys)
        _, traj_xi = integrate_variational(sys, w0, xi0, 0.0, 1e-3, 1e-3)
        assert np.allclose(one.coeffs, traj_xi.final.coeffs)
