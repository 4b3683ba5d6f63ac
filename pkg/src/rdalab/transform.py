"""Assembly of the transformed equation produced by the change of variables
u = a*w, in the cut-off form used for the invariant-cone verification:

    d/dt w + (1 - dxx) w + Theta(w) dx w = T(w) + F1(w) + F2(w)

* F1 collects the advection residual (f(P_K u) - f(u)) dx w, which shrinks
  like K^{-1/2} in the C^1(H^1, L2) norm;
* F2 collects the reaction terms a^{-1}[dxx a - dt a - f(u) dx a] w - a^{-1} g(u),
  bounded H^1 -> H^1 at fixed mode cut;
* Theta(w) = <f(P_K(a w))> is the non-perturbative mean advection speed;
* T(w) is the low-mode damping phi(||(dxx-1) P_N w||^2) (dxx-1) P_N w that
  enlarges the usable spectral gap when low modes are large.

F1, F2 and Theta are multiplied by a smooth profile of ||w||^2_{H1} so they
vanish outside a large ball (where the factor solver need not converge); the
evaluation short-circuits there.

Fréchet derivatives: T'(w) has a closed form (used and tested); F1, F2 and
Theta are differentiated by central finite differences inside the variational
flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .cutoffs import Plateau
from .diffeo import factor_time_derivative, forward_map, implicit_factor
from .dynamics import SemilinearSystem, Trajectory, integrate
from .spectral import (
    TWO_PI,
    FourierField,
    get_grid,
    high_pass,
    low_pass,
    shifted_laplacian,
    sobolev_norm,
)

__all__ = [
    "TransformedSystem",
    "make_transformed",
    "advection_residual_term",
    "factor_reaction_term",
    "advection_speed",
    "low_mode_damping",
    "low_mode_damping_directional",
    "transformed_rhs",
    "conjugacy_check",
    "TailReport",
    "tail_report",
    "measure_ball_radii",
    "lipschitz_probe",
    "f1_lipschitz_sweep",
    "sample_probe_pairs",
    "theta_term_probe",
]


@dataclass
class TransformedSystem(SemilinearSystem):
    """The transformed flow as an integrable semilinear system.

    theta_lo/theta_hi are the plateau thresholds of the H1-ball profile in
    ||w||^2_{H1}; damping_radius is the L2 radius R of the low-mode damping
    profile (0 below R^2, -1/2 above 4R^2).
    """

    base: object = None
    k_cut: int = 32
    n_split: int = 8
    theta_lo: float = 4.0
    theta_hi: float = 8.0
    damping_radius: float = 10.0
    solver_tol: float = 1e-10
    solver_max_iter: int = 200
    solver_damping: float = 0.8
    warm_start: bool = True
    _warm_y: object = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.theta = Plateau(self.theta_lo, self.theta_hi, 1.0, 0.0)
        self.phi = Plateau(self.damping_radius**2, 4.0 * self.damping_radius**2,
                           0.0, -0.5)

    n_components = 1

    def linear_modes(self, wavenumbers):
        return (wavenumbers.astype(float) ** 2 + 1.0)[None, :]

    # -- factor bookkeeping ---------------------------------------------------

    def factor(self, w):
        warm = self._warm_y if self.warm_start else None
        if warm is not None and warm.shape != get_grid(w.n_max).x.shape:
            warm = None
        res = implicit_factor(
            w, self.k_cut, self.base, tol=self.solver_tol,
            max_iter=self.solver_max_iter, damping=self.solver_damping,
            y0=warm,
        )
        if self.warm_start:
            self._warm_y = res.vals["y"]
        return res

    def terms(self, w, cut=True):
        """Evaluate (theta, Theta, F1, F2) at w; skips the factor solve when
        the ball profile vanishes."""
        theta_val = float(self.theta(sobolev_norm(w, 1.0) ** 2)) if cut else 1.0
        zero = FourierField.zeros(w.n_max)
        if theta_val == 0.0:
            return {"theta": 0.0, "Theta": 0.0, "F1": zero, "F2": zero}
        res = self.factor(w)
        grid = get_grid(w.n_max)
        base = self.base
        wv = grid.to_physical(w.coeffs)[0]
        dwv = grid.to_physical(w.dx().coeffs)[0]
        av = res.vals["a"]
        # u is the truncated field a*w (the state the flow actually sees), so
        # the projector acts on the stored modes and K >= n_max is the identity
        spec = grid.val2spec(av * wv)
        spec[np.abs(grid._k_full) > w.n_max] = 0.0
        uv = grid.spec2val(spec)
        spec[np.abs(grid._k_full) > min(self.k_cut, w.n_max)] = 0.0
        pku = np.real(grid.spec2val(spec))
        f = base.f_scalar or (lambda z: np.zeros_like(z))
        f_u = f(uv)
        f_pku = f(pku)
        f1_vals = (f_pku - f_u) * dwv

        factor_time_derivative(w, self.k_cut, base, factor=res)
        dta_vals = res.vals["dt_a"]
        f2_vals = (res.vals["dxx_a"] - dta_vals - f_u * res.vals["dx_a"]) * wv / av
        if base.g_scalar is not None:
            f2_vals = f2_vals - base.g_scalar(uv) / av

        speed = theta_val * float(np.real(np.mean(f_pku)))
        wrap = lambda v: FourierField(grid.from_physical(v[None, :]))
        return {
            "theta": theta_val,
            "Theta": speed,
            "F1": theta_val * wrap(f1_vals),
            "F2": theta_val * wrap(f2_vals),
            "factor": res,
        }

    # -- semilinear interface ---------------------------------------------------

    def nonlinear(self, w, t=0.0):
        parts = self.terms(w)
        out = low_mode_damping(w, self) - parts["Theta"] * w.dx()
        return out + parts["F1"] + parts["F2"]


def make_transformed(base, k_cut, n_split, r_bar, damping_radius=None, **kw):
    """Build a TransformedSystem from a measured H1 absorbing radius.

    The ball profile is 1 up to (1.3*r_bar)^2 and 0 above twice that; the
    damping radius defaults to a multiple of r_bar (both overridable).
    """
    lo = (1.3 * r_bar) ** 2
    return TransformedSystem(
        base=base, k_cut=k_cut, n_split=n_split,
        theta_lo=lo, theta_hi=2.0 * lo,
        damping_radius=damping_radius if damping_radius is not None else 4.0 * r_bar,
        **kw,
    )


# -- named term accessors -------------------------------------------------------


def advection_residual_term(w, sys, cut=True):
    """F1(w) = (f(P_K(a w)) - f(a w)) dx w, optionally ball-profiled."""
    return sys.terms(w, cut=cut)["F1"]


def factor_reaction_term(w, sys, cut=True):
    """F2(w) = a^{-1}[dxx a - dt a - f(aw) dx a] w - a^{-1} g(aw)."""
    return sys.terms(w, cut=cut)["F2"]


def advection_speed(w, sys, cut=True):
    """Theta(w): the mean advection speed <f(P_K(a w))> under the ball profile."""
    return sys.terms(w, cut=cut)["Theta"]


def low_mode_damping(w, sys):
    """T(w) = phi(||(dxx - 1) P_N w||^2_{L2}) (dxx - 1) P_N w."""
    b = -shifted_laplacian(low_pass(w, min(sys.n_split, w.n_max)))
    z = sobolev_norm(FourierField(b.coeffs), 0.0) ** 2
    return float(sys.phi(z)) * b


def low_mode_damping_directional(w, xi, sys):
    """Closed-form Fréchet derivative T'(w) xi."""
    n = min(sys.n_split, w.n_max)
    bw = -shifted_laplacian(low_pass(w, n))
    bxi = -shifted_laplacian(low_pass(xi, n))
    z = sobolev_norm(bw, 0.0) ** 2
    pairing = TWO_PI * float(np.real(np.sum(bw.coeffs * np.conj(bxi.coeffs))))
    return float(sys.phi(z)) * bxi + 2.0 * float(sys.phi.deriv(z)) * pairing * bw


def transformed_rhs(w, sys):
    """Full right-hand side -(1-dxx)w - Theta dx w + T + F1 + F2."""
    return sys.nonlinear(w, 0.0) - shifted_laplacian(w)


# -- conjugacy of the original and transformed flows ------------------------------


def conjugacy_check(u0, t_end, sys, dt=1e-3, n_record=25):
    """Integrate u under the base flow and w under the transformed flow from
    w(0) = W(u0); report ||W(u(t)) - w(t)||_{H1} over time."""
    stride = max(1, int(round(t_end / dt / n_record)))
    traj_u = integrate(sys.base, u0, 0.0, t_end, dt, record_stride=stride)
    w0 = forward_map(u0, sys.k_cut, sys.base)
    traj_w = integrate(sys, w0, 0.0, t_end, dt, record_stride=stride)
    resid = np.array([
        sobolev_norm(forward_map(u, sys.k_cut, sys.base) - w, 1.0)
        for u, w in zip(traj_u.states, traj_w.states)
    ])
    return traj_u.times, resid


# -- high-mode tail control --------------------------------------------------------


@dataclass
class TailReport:
    times: np.ndarray
    tail_norms: np.ndarray
    kappa: float
    n_split: int
    alpha: float
    r_kappa: float
    feasible: bool
    contracted_below: float

    def contracts_below(self, margin):
        return self.tail_norms[-1] <= self.r_kappa + margin


def _tail_feasible(times, q, r, alpha, slack):
    transient = max(q[0] - r, 0.0) * np.exp(-alpha * times)
    return bool(np.all(q <= transient + r + slack))


def tail_report(traj, kappa, n_split, slack=1e-9):
    """Fit the smallest floor R such that
    ||Q_N w(t)||_{H^{2-kappa}} <= (||Q_N w(0)|| - R)_+ e^{-alpha t} + R.

    The decay rate alpha is chosen from a fixed candidate ladder (fractions of
    the first tail eigenvalue) by whichever admits the smallest feasible R.
    """
    q = np.array([
        sobolev_norm(high_pass(w, min(n_split, w.n_max)), 2.0 - kappa)
        for w in traj.states
    ])
    times = traj.times - traj.times[0]
    lam_tail = float((n_split + 1) ** 2 + 1)
    best = (np.inf, 0.0)
    for alpha in (lam_tail, lam_tail / 2, lam_tail / 4, lam_tail / 10, 1.0):
        if not _tail_feasible(times, q, q.max() + slack, alpha, slack):
            continue
        lo, hi = 0.0, q.max() + slack
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _tail_feasible(times, q, mid, alpha, slack):
                hi = mid
            else:
                lo = mid
        if hi < best[0]:
            best = (hi, alpha)
    r_kappa, alpha = best
    feasible = np.isfinite(r_kappa)
    return TailReport(times, q, kappa, n_split, alpha,
                      float(r_kappa), feasible, float(q[-1]))


# -- measured constants -------------------------------------------------------------


def measure_ball_radii(system, rng, n_samples=3, h1_start=8.0, t_long=6.0,
                       dt=2e-3, n_max=48, settle=1.0):
    """Long-run estimate of the absorbing radii: sup over trajectory tails of
    ||u||_{H1} and ||u||_{H2} after the settling time."""
    from .spectral import random_real_field

    r_h1 = r_h2 = 0.0
    for _ in range(n_samples):
        u0 = random_real_field(rng, n_max, decay=2.0,
                               target_h1=h1_start * rng.uniform(0.5, 1.0))
        traj = integrate(system, u0, 0.0, t_long, dt, record_stride=50)
        tail = [u for t, u in zip(traj.times, traj.states) if t >= settle]
        r_h1 = max(r_h1, max(sobolev_norm(u, 1.0) for u in tail))
        r_h2 = max(r_h2, max(sobolev_norm(u, 2.0) for u in tail))
    return r_h1, r_h2


def _directional_diff(fn, w, xi, h):
    return (fn(w + h * xi) - fn(w - h * xi)) / (2.0 * h)


def sample_probe_pairs(rng, n_samples, n_max, h1_target, decay=1.5):
    """Shared (sample, direction) pairs with near-extremal H1 tails singular
    at a common point, the regime that saturates the K^{-1/2} bound."""
    from .spectral import random_singular_field

    pairs = []
    for _ in range(n_samples):
        x0 = rng.uniform(-np.pi, np.pi)
        w = random_singular_field(rng, n_max, decay, x0, target=h1_target, target_s=1.0)
        xi = random_singular_field(rng, n_max, decay, x0, target=1.0, target_s=1.0)
        pairs.append((w, xi))
    return pairs


def lipschitz_probe(sys, rng=None, which="F1", n_samples=6, fd=1e-4, decay=1.5,
                    pairs=None, n_max=128):
    """Sampled C^1 (Lipschitz) constant of one transformed term.

    which: 'F1' (H1 -> L2), 'F2' (H1 -> H1) or 'Theta' (H1 -> R). Pass a
    shared ``pairs`` set when sweeping the mode cut so every cut sees the
    same inputs.
    """
    if pairs is None:
        pairs = sample_probe_pairs(rng, n_samples, n_max,
                                   0.7 * np.sqrt(sys.theta_lo), decay)
    out = 0.0
    for w, xi in pairs:
        h = fd / max(sobolev_norm(xi, 1.0), 1e-12)
        if which == "F1":
            d = _directional_diff(lambda z: advection_residual_term(z, sys), w, xi, h)
            val = sobolev_norm(d, 0.0)
        elif which == "F2":
            d = _directional_diff(lambda z: factor_reaction_term(z, sys), w, xi, h)
            val = sobolev_norm(d, 1.0)
        elif which == "Theta":
            val = abs(_directional_diff(lambda z: advection_speed(z, sys), w, xi, h))
        else:
            raise ValueError(which)
        out = max(out, val / sobolev_norm(xi, 1.0))
    return out


def f1_lipschitz_sweep(base, k_list, rng, n_samples=4, n_max=512, n_split=10,
                       r_bar=1.6, decay=1.3, fd=1e-4):
    """F1 Lipschitz constant (H1 -> L2) against the mode cut.

    One shared sample set; the probing directions are band-passed to the
    modes (K, 2K] of a singular profile aligned with the sample, which is
    where the interpolation bound behind the K^{-1/2} law is saturated.
    Fields carry |c_n| ~ n^{-1.3} tails so the truncated tail sums scale as
    K^{-1/2} over the swept cuts.
    """
    from .spectral import random_singular_field

    samples = []
    for _ in range(n_samples):
        x0 = rng.uniform(-np.pi, np.pi)
        w = random_singular_field(rng, n_max, decay, x0, target=1.35, target_s=1.0)
        prof = random_singular_field(rng, n_max, decay, x0)
        samples.append((w, prof))
    rows = []
    for k in k_list:
        sys = make_transformed(base, k_cut=k, n_split=n_split, r_bar=r_bar)
        best = 0.0
        for w, prof in samples:
            xi = high_pass(low_pass(prof, min(2 * k, n_max)), k)
            xi = xi * (1.0 / sobolev_norm(xi, 1.0))
            d = _directional_diff(
                lambda z: advection_residual_term(z, sys), w, xi, fd
            )
            best = max(best, sobolev_norm(d, 0.0))
        rows.append({"k": k, "lipschitz": best})
    return rows


def theta_term_probe(sys, rng, n_samples=6, fd=1e-4):
    """Measured surrogates for the two mean-advection constants in the cone
    estimates: the ratio |Theta'(w)[xi] (dx w, A Q xi - A P xi)| / ||xi||^2_{H^{5/4}}
    (first regime) and sup ||Theta'(w)|| * ||w||_{H1} (second regime)."""
    from .spectral import random_real_field

    n_max = max(2 * sys.k_cut, 32)
    n = sys.n_split
    c_tilde = 0.0
    c_bar1 = 0.0
    for _ in range(n_samples):
        w = random_real_field(rng, n_max, decay=2.0,
                              target_h1=0.7 * np.sqrt(sys.theta_lo))
        xi = random_real_field(rng, n_max, decay=1.6, target_h1=1.0)
        h = fd / max(sobolev_norm(xi, 1.0), 1e-12)
        dtheta = _directional_diff(lambda z: advection_speed(z, sys), w, xi, h)
        aq = shifted_laplacian(high_pass(xi, n))
        ap = shifted_laplacian(low_pass(xi, n))
        pairing = TWO_PI * float(np.real(
            np.sum(w.dx().coeffs * np.conj((aq - ap).coeffs))
        ))
        c_tilde = max(c_tilde, abs(dtheta * pairing) / sobolev_norm(xi, 1.25) ** 2)
        c_bar1 = max(
            c_bar1,
            abs(dtheta) / sobolev_norm(xi, 1.0) * sobolev_norm(w, 1.0),
        )
    return {"c_tilde": c_tilde, "c_bar1": c_bar1}
