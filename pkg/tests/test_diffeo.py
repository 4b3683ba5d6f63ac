import numpy as np
import pytest
import scipy.integrate as si

from rdalab.diffeo import (
    contraction_probe,
    factor_time_derivative,
    factor_uniformity_probe,
    forward_factor,
    forward_map,
    implicit_factor,
    inverse_map,
    loglog_slope,
    solve_mean_coupled,
    solve_mean_coupled_projected,
    w1inf_norm,
)
from rdalab.dynamics import integrate, make_system, scalar_rda
from rdalab.errors import PreconditionError, ProjectionTooCoarseError
from rdalab.spectral import (
    FourierField,
    apply_pointwise,
    get_grid,
    random_real_field,
    random_singular_field,
    sobolev_norm,
)

from conftest import make_sin

TANH = dict(amplitude=0.6, radius=10.0)


@pytest.fixture(scope="module")
def tanh_system():
    return make_system("advect-tanh", **TANH)


class TestForwardFactor:
    def test_zero_advection_gives_unit_factor(self, rng):
        sys = make_system("linear-heat")
        u = random_real_field(rng, 16, decay=2.0, target_h1=2.0)
        res = forward_factor(u, 8, sys)
        assert np.max(np.abs(res.vals["a"] - 1.0)) == 0.0

    def test_constant_advection_gives_unit_factor(self, rng):
        # mean subtraction kills constant coefficients
        sys = scalar_rda(f=lambda u: np.full_like(u, 0.7),
                         df=lambda u: np.zeros_like(u))
        u = random_real_field(rng, 16, decay=2.0, target_h1=2.0)
        res = forward_factor(u, 8, sys)
        assert np.max(np.abs(res.vals["a"] - 1.0)) < 1e-14

    def test_adaptive_quadrature_oracle(self):
        # f = sin (cut far away), u = cos x, K = 8
        sys = make_system("advect-sin", amplitude=1.0, radius=10.0)
        u = FourierField.from_modes(16, {(0, 1): 0.5, (0, -1): 0.5})
        res = forward_factor(u, 8, sys)
        f = sys.f_scalar
        scalar_f = lambda s: float(np.real(f(np.array([np.cos(s)]))[0]))
        mean_f = si.quad(scalar_f, -np.pi, np.pi, epsabs=1e-13, epsrel=1e-13,
                         limit=300)[0] / (2 * np.pi)
        grid = get_grid(16)
        for j in range(0, grid.n_phys, 7):
            expo = si.quad(lambda s: scalar_f(s) - mean_f, -np.pi, grid.x[j],
                           epsabs=1e-13, epsrel=1e-13, limit=300)[0]
            assert abs(res.vals["a"][j] - np.exp(0.5 * expo)) < 1e-9

    def test_boundary_value_and_positivity(self, rng, tanh_system):
        u = random_real_field(rng, 32, decay=1.8, target_h1=4.0)
        res = forward_factor(u, 16, tanh_system)
        assert abs(res.vals["a"][0] - 1.0) < 1e-13  # a(-pi) = 1
        assert np.min(np.real(res.vals["a"])) > 0.0
        # periodicity: the exponent integrand is mean-free, so y(pi) = 0
        h = res.vals["f_pku"] - res.vals["f_pku"].mean()
        assert abs(np.mean(h)) < 1e-14


class TestForwardMap:
    def test_identity_when_no_advection(self, rng):
        sys = make_system("linear-heat")
        u = random_real_field(rng, 16, decay=2.0)
        w = forward_map(u, 8, sys)
        assert np.max(np.abs(w.coeffs - u.coeffs)) < 1e-13

    def test_zero_maps_to_zero(self, tanh_system):
        w = forward_map(FourierField.zeros(16), 8, tanh_system)
        assert sobolev_norm(w, 1.0) < 1e-14

    def test_norm_equivalence_bracket(self, rng, tanh_system):
        ratios = []
        for _ in range(30):
            u = random_real_field(rng, 48, decay=2.0,
                                  target_h1=5.0 * rng.uniform(0.05, 1.0))
            w = forward_map(u, 16, tanh_system)
            ratios.append(sobolev_norm(w, 1.0) / sobolev_norm(u, 1.0))
        # empirical two-sided norm equivalence constant
        c_emp = max(max(ratios), 1.0 / min(ratios))
        assert c_emp < 3.0


class TestMeanCoupledSolver:
    def test_explicit_solution_no_coefficient(self):
        phi = FourierField.zeros(16)
        h = make_sin(16)
        xi, d = solve_mean_coupled(phi, h, return_d=True)
        expect = FourierField.from_modes(
            16, {(0, 0): -1.0, (0, 1): -0.5, (0, -1): -0.5}
        )  # -1 - cos x
        assert sobolev_norm(xi - expect, 0.0) < 1e-13
        assert abs(d) < 1e-14
        vals = xi.physical()[0]
        assert abs(vals[0]) < 1e-13  # xi(-pi) = 0

    def test_zero_forcing_zero_solution(self, rng):
        phi = random_real_field(rng, 16, decay=2.0)
        xi = solve_mean_coupled(phi, FourierField.zeros(16))
        assert sobolev_norm(xi, 1.0) < 1e-13

    def test_ode_residual_and_coupling_constant(self):
        phi = FourierField.from_modes(32, {(0, 1): 0.5, (0, -1): 0.5})  # cos x
        h = FourierField.from_modes(32, {(0, 2): -0.5j, (0, -2): 0.5j})  # sin 2x
        xi, d = solve_mean_coupled(phi, h, return_d=True)
        prod = apply_pointwise(lambda a, b: a * b, phi, xi)
        d_measured = prod.coefficient(0)
        resid = xi.dx() - (prod + h)
        resid.coeffs[0, resid.n_max] += d_measured
        # L1 norm of the residual via grid quadrature
        rvals = np.abs(resid.physical()[0])
        assert np.mean(rvals) * 2 * np.pi < 1e-8
        assert abs(d_measured - d) < 1e-9
        vals = xi.physical()[0]
        assert abs(vals[0]) < 1e-12

    def test_nonzero_mean_forcing_rejected(self):
        phi = FourierField.zeros(8)
        h = FourierField.from_modes(8, {(0, 0): 0.5})
        with pytest.raises(PreconditionError):
            solve_mean_coupled(phi, h)


def _dense_collocation_solution(phi, psi, h, k_cut):
    """Independent oracle: dense collocation solve of the projected
    mean-coupled boundary-value problem, with the unknown expanded in the
    truncated Fourier basis (which excludes the spurious Nyquist near-kernel
    of the even-grid differentiation matrix)."""
    grid = get_grid(phi.n_max)
    m = grid.n_phys
    f = np.fft.fft(np.eye(m), axis=0)
    finv = np.conj(f).T / m
    k = grid._k_full.astype(float)
    deriv = np.real(finv @ np.diag(1j * k) @ f)
    mask = (np.abs(grid._k_full) <= k_cut).astype(float)
    proj = np.real(finv @ np.diag(mask) @ f)
    phiv = np.real(grid.to_physical(phi.coeffs)[0])
    psiv = np.real(grid.to_physical(psi.coeffs)[0])
    hv = np.real(grid.to_physical(h.coeffs)[0])
    b = np.diag(phiv) @ proj @ np.diag(psiv)
    op = deriv - b + np.ones((m, m)) / m @ b
    # real trigonometric basis on the grid, truncated like the solver output
    n = np.arange(1, phi.n_max + 1)
    cols = np.concatenate(
        [np.ones((m, 1)), np.cos(np.outer(grid.x, n)), np.sin(np.outer(grid.x, n))],
        axis=1,
    )
    sys_mat = np.vstack([op @ cols, cols[0:1]])
    rhs = np.concatenate([hv, [0.0]])
    coef, *_ = np.linalg.lstsq(sys_mat, rhs, rcond=None)
    return cols @ coef


class TestProjectedSolver:
    def test_zero_coupling_reduces_to_antiderivative(self, rng):
        phi = random_real_field(rng, 32, decay=2.0)
        psi = FourierField.zeros(32)
        h = make_sin(32)
        xi, fac = solve_mean_coupled_projected(phi, psi, h, 8)
        expect = FourierField.from_modes(
            32, {(0, 0): -1.0, (0, 1): -0.5, (0, -1): -0.5}
        )
        assert sobolev_norm(xi - expect, 1.0) < 1e-12
        assert fac == 0.0 or fac < 1e-10

    def test_full_cut_matches_dense_collocation(self, rng):
        # smooth data: both discretizations resolve the continuum solution
        n_max = 24
        phi = random_real_field(rng, n_max, decay=3.0, target_h1=1.5)
        psi = random_real_field(rng, n_max, decay=3.0, target_h1=1.5)
        h = random_real_field(rng, n_max, decay=3.0, target_h1=1.0)
        h.coeffs[0, n_max] = 0.0
        grid = get_grid(n_max)
        k_full = grid.n_phys // 2  # identity projection on the grid
        xi, _ = solve_mean_coupled_projected(phi, psi, h, k_full)
        oracle = _dense_collocation_solution(phi, psi, h, k_full)
        mine = np.real(grid.to_physical(xi.coeffs)[0])
        assert np.max(np.abs(mine - oracle)) / np.max(np.abs(oracle)) < 1e-6

    def test_projected_cut_matches_dense_collocation(self, rng):
        n_max = 24
        phi = random_real_field(rng, n_max, decay=3.0, target_h1=1.5)
        psi = random_real_field(rng, n_max, decay=3.0, target_h1=1.5)
        h = random_real_field(rng, n_max, decay=3.0, target_h1=1.0)
        h.coeffs[0, n_max] = 0.0
        xi, _ = solve_mean_coupled_projected(phi, psi, h, 6)
        grid = get_grid(n_max)
        oracle = _dense_collocation_solution(phi, psi, h, 6)
        mine = np.real(grid.to_physical(xi.coeffs)[0])
        assert np.max(np.abs(mine - oracle)) / np.max(np.abs(oracle)) < 1e-6

    def test_contraction_rate_law(self):
        rng = np.random.default_rng(3)
        rows = contraction_probe(rng, [8, 16, 32, 64])
        slope = loglog_slope([r["k"] for r in rows],
                             [r["contraction"] for r in rows])
        assert -0.7 <= slope <= -0.3

    def test_cut_too_small_raises(self):
        rng = np.random.default_rng(1)
        phi = random_singular_field(rng, 64, 0.55, 0.3, target=6.0, target_s=0.0)
        psi = random_singular_field(rng, 64, 1.5, 0.3, target=8.0, target_s=1.0)
        h = random_singular_field(rng, 64, 1.5, 0.3, target=1.0, target_s=1.0)
        with pytest.raises(ProjectionTooCoarseError):
            solve_mean_coupled_projected(phi, psi, h, 1)


class TestImplicitFactor:
    def test_zero_advection_one_sweep(self, rng):
        sys = make_system("linear-heat")
        w = random_real_field(rng, 16, decay=2.0)
        res = implicit_factor(w, 8, sys)
        assert res.iterations == 1
        assert np.max(np.abs(res.vals["a"] - 1.0)) == 0.0

    def test_factor_round_trip(self, rng, tanh_system):
        # a(W(u)) equals the forward factor of u
        u = random_real_field(rng, 64, decay=2.5, target_h1=2.0)
        fwd = forward_factor(u, 32, tanh_system)
        w = forward_map(u, 32, tanh_system, factor=fwd)
        inv = implicit_factor(w, 32, tanh_system, tol=1e-12)
        assert np.max(np.abs(fwd.vals["a"] - inv.vals["a"])) < 1e-8

    def test_named_round_trip(self, tanh_system):
        u = FourierField.from_modes(
            64, {(0, 1): 0.5, (0, -1): 0.5, (0, 3): -0.1j, (0, -3): 0.1j}
        )  # cos x + 0.2 sin 3x
        w = forward_map(u, 32, tanh_system)
        u2 = inverse_map(w, 32, tanh_system)
        assert sobolev_norm(u2 - u, 1.0) < 1e-7

    def test_inverse_of_zero(self, tanh_system):
        u = inverse_map(FourierField.zeros(16), 8, tanh_system)
        assert sobolev_norm(u, 1.0) < 1e-14

    def test_embedding_bound_across_cuts(self, rng, tanh_system):
        worst = 0.0
        samples = [random_real_field(rng, 64, decay=2.2,
                                     target_h1=rng.uniform(0.3, 2.0))
                   for _ in range(8)]
        for k in (16, 32, 64):
            for w in samples:
                u = inverse_map(w, k, tanh_system)
                worst = max(worst, sobolev_norm(u, 1.0) / sobolev_norm(w, 1.0))
        assert worst < 3.0  # single constant across the sweep


class TestFactorUniformity:
    def test_w1inf_bounds_uniform_in_cut(self, tanh_system):
        rng = np.random.default_rng(9)
        rows = factor_uniformity_probe(tanh_system, rng, [8, 16, 32, 64, 128],
                                       6, 128, 5.0)
        bounds = [r["w1inf_bound"] for r in rows]
        lips = [r["lipschitz"] for r in rows]
        assert max(bounds) / min(bounds) < 1.10
        assert max(lips) / min(lips) < 1.10


class TestFactorTimeDerivative:
    def test_zero_for_heat(self, rng):
        sys = make_system("linear-heat")
        w = random_real_field(rng, 16, decay=2.0)
        dta = factor_time_derivative(w, 8, sys)
        assert sobolev_norm(dta, 0.0) == 0.0

    def test_finite_difference_oracle(self, rng, tanh_system):
        u0 = random_real_field(rng, 48, decay=2.5, target_h1=1.5)
        traj = integrate(tanh_system, u0, 0.0, 0.02, 1e-3, record_stride=1)
        k = 24
        grid = get_grid(48)
        i = 10
        t = traj.times[i]
        w_mid = forward_map(traj.states[i], k, tanh_system)
        dta = np.real(grid.to_physical(
            factor_time_derivative(w_mid, k, tanh_system, tol=1e-12).coeffs)[0])
        errs = {}
        for h in (2e-3, 1e-3):
            a_lo = implicit_factor(forward_map(traj.state_at(t - h), k, tanh_system),
                                   k, tanh_system, tol=1e-12)
            a_hi = implicit_factor(forward_map(traj.state_at(t + h), k, tanh_system),
                                   k, tanh_system, tol=1e-12)
            fd = (a_hi.vals["a"] - a_lo.vals["a"]) / (2 * h)
            errs[h] = np.max(np.abs(fd - dta)) / np.max(np.abs(dta))
        assert errs[2e-3] < 0.02
        assert errs[1e-3] < errs[2e-3] / 2.0  # vanishes with h

    def test_settled_state_has_static_factor(self, tanh_system):
        u0 = 0.5 * make_sin(32)
        traj = integrate(tanh_system, u0, 0.0, 8.0, 2e-3, record_stride=400)
        w = forward_map(traj.final, 16, tanh_system)
        dta = factor_time_derivative(w, 16, tanh_system)
        assert sobolev_norm(dta, 0.0) < 1e-6
