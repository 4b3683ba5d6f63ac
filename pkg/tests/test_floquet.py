import numpy as np
import pytest
from scipy.integrate import quad

from rdalab.cutoffs import Plateau
from rdalab.errors import ConfigError
from rdalab.floquet import (
    Block2,
    FloquetConfig,
    assemble_period_map,
    compare_period_maps,
    composed_multiplier_logs,
    coupling_strength,
    cubic_law_fit,
    default_modulation,
    half_period_map_first,
    half_period_map_second,
    pde_half_structure_check,
    phase_increment,
    power_decay_report,
    printed_multiplier_check,
    printed_multiplier_logs,
    reflect,
    run_symmetrized_check,
    run_trajectory_pair,
    simulate_linear_decay,
    theta2_deficit,
)
from rdalab.spectral import FourierField, get_grid, sobolev_norm


@pytest.fixture(scope="module")
def cfg10():
    return FloquetConfig.build(T=10.0, n_max=8)


@pytest.fixture(scope="module")
def pm10(cfg10):
    return assemble_period_map(cfg10, "block-ode")


class TestDriveProfile:
    def test_reference_modulation_clauses(self):
        T = 10.0
        y = default_modulation(T)
        t = np.linspace(-T, 2 * T, 301)
        assert y(T / 2) == pytest.approx(1.0)
        assert np.allclose(y(-t), -y(t), atol=1e-15)
        assert np.allclose(y(T - t), y(t), atol=1e-14)
        tt = np.linspace(0.05, T - 0.05, 101)
        assert np.all(-np.sin(np.pi * tt / T) <= 0.0)  # concavity sign on (0, T)

    def test_crossing_time_closed_form(self, cfg10):
        assert cfg10.t_cross == pytest.approx(10.0 / np.pi * np.arcsin(0.25),
                                              abs=1e-12)

    def test_small_half_period_rejected(self):
        with pytest.raises(ConfigError):
            FloquetConfig.build(T=-1.0)


class TestCoupling:
    def test_idealized_plateau_coupling(self, cfg10):
        # theta1 == 1 on the whole window gives eps = pi / (2 (T - 2 T0))
        flat = lambda y: np.ones_like(np.asarray(y, dtype=float))
        eps = coupling_strength(10.0, cfg10.t_cross, flat, cfg10.y)
        assert eps == pytest.approx(np.pi / (2 * (10.0 - 2 * cfg10.t_cross)),
                                    rel=1e-12)

    def test_rotation_angle_self_check(self, cfg10):
        assert abs(phase_increment(cfg10, "first") - np.pi / 2) < 1e-8
        assert abs(phase_increment(cfg10, "second") - np.pi / 2) < 1e-8

    def test_plateau_sharpness_sensitivity(self, cfg10):
        # sharper ramp changes the window integral by at most the time the
        # drive spends in the ramp region
        sharp = Plateau(0.25, 0.30, 0.0, 1.0)
        eps_sharp = coupling_strength(10.0, cfg10.t_cross, sharp, cfg10.y)
        ramp_time = quad(
            lambda t: 1.0 * ((cfg10.y(t) > 0.25) & (cfg10.y(t) < 0.5)),
            cfg10.t_cross, 10.0 - cfg10.t_cross, limit=400)[0]
        window_shift = abs(np.pi / 2 / eps_sharp - np.pi / 2 / cfg10.coupling)
        assert window_shift <= ramp_time + 1e-8


class TestHalfPeriodBlocks:
    def test_first_half_ode_matches_published_factors(self, cfg10):
        for n in range(-6, 7):
            ode = half_period_map_first(n, cfg10, "ode")
            closed = half_period_map_first(n, cfg10, "closed")
            for slot in ((1, 0), (0, 1)):
                lo, so = ode.entry_log(*slot)
                lc, sc = closed.entry_log(*slot)
                assert abs(lo - lc) < 1e-8
                assert so == sc
            assert ode.residual < 1e-10

    def test_mid_window_radial_decay_factor(self, cfg10):
        # magnitude accumulated on the coupled window is e^{-(T-2T0)(n+1)^2}:
        # remove the caps from the closed composition and compare
        T, t0 = cfg10.T, cfg10.t_cross
        for n in (-3, 0, 2):
            closed = half_period_map_first(n, cfg10, "closed")
            log_k = closed.entry_log(1, 0)[0]
            i2_cap = quad(lambda t: cfg10.theta2(cfg10.y(t)), 0.0, t0,
                          epsabs=1e-12, limit=400)[0]
            caps = -t0 * n**2 - (2 * n + 1) * i2_cap - t0 * (n + 1) ** 2
            assert log_k - caps == pytest.approx(-(T - 2 * t0) * (n + 1) ** 2,
                                                 abs=1e-9)

    def test_cap_factor_for_decoupled_component(self, cfg10):
        # u decays at e^{-T0 n^2} on [0, T0]: integrate the decoupled cap
        from scipy.integrate import solve_ivp

        for n in (1, 3):
            sol = solve_ivp(lambda t, z: -(n**2) * z, (0.0, cfg10.t_cross),
                            [1.0], method="DOP853", rtol=1e-12, atol=1e-14)
            assert sol.y[0, -1] == pytest.approx(
                np.exp(-cfg10.t_cross * n**2), rel=1e-10)

    def test_second_half_rotation_no_decay_at_zero(self, cfg10):
        b = half_period_map_second(0, cfg10, "ode")
        dense = b.dense()
        assert np.allclose(dense, [[0.0, -1.0], [1.0, 0.0]], atol=1e-10)

    def test_second_half_mode_one_factor(self, cfg10):
        b = half_period_map_second(1, cfg10, "closed")
        lm, sg = b.entry_log(1, 0)
        assert lm == pytest.approx(-10.0, abs=1e-12)
        assert sg > 0
        ode = half_period_map_second(1, cfg10, "ode")
        assert abs(ode.entry_log(1, 0)[0] - lm) < 1e-8
        assert abs(ode.entry_log(0, 1)[0] - lm) < 1e-8


class TestPeriodMapStructure:
    def test_columns_carry_single_target(self, pm10):
        n_max = pm10.n_max
        for n in range(-n_max, n_max):
            assert pm10.column_target_fraction(("v", n)) >= 1.0 - 1e-6
        for n in range(-n_max + 1, n_max + 1):
            assert pm10.column_target_fraction(("u", n)) >= 1.0 - 1e-6
        assert pm10.meta["block_residual_max"] < 1e-6

    def test_multiplier_signs_negative(self, pm10):
        for n in range(-6, 7):
            _, sv = pm10.multiplier_log("v", n)
            _, su = pm10.multiplier_log("u", n)
            assert sv < 0 and su < 0

    def test_mu_matches_printed_closed_form(self, pm10, cfg10):
        for n in range(-6, 7):
            lm, _ = pm10.multiplier_log("v", n)
            printed, _ = printed_multiplier_logs(n, cfg10)
            assert abs(lm - printed) < 1e-6

    def test_nu_matches_composition_not_printed_form(self, pm10, cfg10):
        for n in range(-6, 7):
            lm, _ = pm10.multiplier_log("u", n)
            _, composed = composed_multiplier_logs(n, cfg10)
            assert abs(lm - composed) < 1e-6
        check = printed_multiplier_check(cfg10)
        assert check["mu_consistent"]
        assert not check["nu_consistent"]  # printed form is index-shifted

    def test_decay_bound_shape(self, pm10, cfg10):
        # |mu_n| + |nu_n| <= e^{-K T n^2} for some positive K over n in -8..8
        feasible_k = np.inf
        for n in range(-8, 9):
            if abs(n) <= pm10.n_max - 1:
                l_mu, _ = pm10.multiplier_log("v", n)
                l_nu, _ = pm10.multiplier_log("u", n) if abs(n - 1) <= pm10.n_max \
                    else (-np.inf, 0)
                tot = np.logaddexp(l_mu, l_nu)
                if n != 0:
                    feasible_k = min(feasible_k, -tot / (cfg10.T * n**2))
        assert feasible_k > 0.0

    def test_power_norm_chain_identity(self, pm10, cfg10):
        # ||P^N e_0^v|| is the exact product of the first N multipliers
        rep = power_decay_report(pm10, 4)
        J = theta2_deficit(cfg10)
        for N in (1, 2, 3):
            chain = sum(-2 * cfg10.T * (j + 1) ** 2 - (2 * j + 1) * J
                        for j in range(N))
            col_chain = sum(pm10.multiplier_log("v", j)[0] for j in range(N))
            assert col_chain == pytest.approx(chain, abs=1e-8)
            assert rep["log_norms"][N - 1] >= col_chain - 1e-8

    def test_spectral_radius_collapses(self, pm10):
        rep = power_decay_report(pm10, 4)
        assert rep["spectral_radius"] < 1e-8
        assert rep["gamma"] > 0.0


class TestCrossValidation:
    def test_block_vs_pde_multipliers(self):
        cfg = FloquetConfig.build(T=10.0, n_max=8)
        pm_block = assemble_period_map(cfg, "block-ode")
        pm_pde = assemble_period_map(cfg, "full-pde", n_pde=2, dt=1e-3)
        assert compare_period_maps(pm_block, pm_pde) < 1e-6

    def test_pde_half_structure(self):
        cfg = FloquetConfig.build(T=10.0, n_max=8)
        assert pde_half_structure_check(cfg, n_pde=2, dt=1e-3) < 1e-6

    def test_both_method_attaches_cross_check(self):
        cfg = FloquetConfig.build(T=10.0, n_max=6)
        pm = assemble_period_map(cfg, "both", n_pde=2, dt=1e-3)
        assert pm.meta["cross_check"]["multiplier_reldiff"] < 1e-6
        assert pm.meta["cross_check"]["half_offstructure"] < 1e-6


class TestLinearDecaySimulation:
    def test_single_mode_walks_up_one_period(self):
        cfg = FloquetConfig.build(T=10.0, n_max=8)
        u0 = FourierField.zeros(8, 2)
        u0.coeffs[0, 8] = 1.0
        out = simulate_linear_decay(u0, 1, cfg, dt=1e-3, samples_per_period=1)
        st = out["final_state"]
        frac = abs(st.coeffs[0, 8 + 1]) ** 2 / np.sum(np.abs(st.coeffs) ** 2)
        assert frac >= 1.0 - 1e-6

    def test_two_periods_by_structure(self, pm10):
        # applying the period-map structure twice: e_0^v lands on e_2^v with
        # the product of the first two multipliers
        l0, s0 = pm10.multiplier_log("v", 0)
        l1, s1 = pm10.multiplier_log("v", 1)
        assert s0 * s1 == pytest.approx(1.0)
        col = pm10.column(("v", 0))
        # dense column of P^2 via the log entries: only v_2 is reachable
        assert l0 + l1 < -98.0  # e^{-2T(1 + 4)} with drive corrections

    def test_norm_series_tracks_chain_until_floor(self):
        cfg = FloquetConfig.build(T=2.0, n_max=16)
        u0 = FourierField.zeros(16, 2)
        u0.coeffs[0, 16] = 1.0
        out = simulate_linear_decay(u0, 2, cfg, dt=1e-3, samples_per_period=2)
        J = theta2_deficit(cfg)
        logs = np.log(out["l2"][::2])
        for N in (1, 2):
            chain = sum(-2 * cfg.T * (j + 1) ** 2 - (2 * j + 1) * J
                        for j in range(N))
            assert logs[N] - logs[0] == pytest.approx(chain, abs=1e-3)
        assert out["gamma"] > 0.0

    def test_zero_data_stays_zero(self):
        cfg = FloquetConfig.build(T=2.0, n_max=8)
        out = simulate_linear_decay(FourierField.zeros(8, 2), 1, cfg, dt=5e-3,
                                    samples_per_period=1)
        assert out["l2"][-1] == 0.0


class TestExtendedSystem:
    def test_zero_perturbation_identical_trajectories(self):
        cfg = FloquetConfig.build(T=0.5, n_max=8)
        pair = run_trajectory_pair(cfg, FourierField.zeros(16, 2),
                                   n_periods=1, dt=2e-3, n_max=16)
        assert np.all(pair.diff_energy[1:] == 0.0)

    def test_drive_components_solve_their_equations(self):
        # y = e^{i pi t / T} and z = e^{ix} satisfy the drive equations
        # exactly: residuals vanish pointwise
        cfg = FloquetConfig.build(T=1.0, n_max=8)
        from rdalab.floquet import ExtendedSystem

        sys = ExtendedSystem(cfg)
        state = sys.initial_state(8)
        rhs = sys.nonlinear(state, 0.0)
        grid = get_grid(8)
        vals = grid.to_physical(state.coeffs)
        lap = grid.deriv_values(vals, 2)
        full = lap + grid.to_physical(rhs.coeffs)
        # d/dt y = (i pi / T) y; d/dt z = 0
        expect_y = (1j * np.pi / cfg.T) * vals[0]
        assert np.max(np.abs(full[0] - expect_y)) < 1e-12
        assert np.max(np.abs(full[1])) < 1e-12

    def test_super_exponential_difference(self):
        cfg = FloquetConfig.build(T=0.5, n_max=8)
        pert = FourierField.zeros(32, 2)
        pert.coeffs[0, 32] = 1e-3
        pair = run_trajectory_pair(cfg, pert, n_periods=3, dt=1e-3, n_max=32)
        assert pair.gamma > 0.0
        assert pair.r_squared > 0.99
        assert pair.y_circle_residual < 1e-6
        assert pair.z_drift < 1e-6


class TestSymmetrization:
    def test_projection_identities(self, rng):
        from rdalab.spectral import random_real_field

        u = random_real_field(rng, 16, n_components=2, decay=2.0)
        sym = u + reflect(u)
        alt = u - reflect(u)
        assert np.max(np.abs((reflect(sym) - sym).coeffs)) < 1e-14
        assert np.max(np.abs((reflect(alt) + alt).coeffs)) < 1e-14
        # symmetric input has no odd part and vice versa
        assert np.max(np.abs((sym - reflect(sym)).coeffs)) < 1e-14

    def test_reconstruction_and_trace(self):
        cfg = FloquetConfig.build(T=0.5, n_max=8)
        pert = FourierField.zeros(24, 2)
        pert.coeffs[0, 24] = 1e-3
        pert.coeffs[1, 24 + 2] = 5e-4
        rep = run_symmetrized_check(cfg, pert, t_end=0.5, dt=1e-3, n_max=24)
        assert rep["reconstruction_error"] < 1e-8
        assert rep["dirichlet_trace"] < 1e-8


class TestCubicFit:
    def test_exact_cubic_sequence(self):
        ts = np.arange(1.0, 7.0)
        logs = 2.0 - 0.3 * ts**3
        gamma, logc, r2 = cubic_law_fit(ts, logs)
        assert gamma == pytest.approx(0.3)
        assert logc == pytest.approx(2.0)
        assert r2 == pytest.approx(1.0)
