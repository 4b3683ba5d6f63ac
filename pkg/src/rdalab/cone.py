"""Verification of the strong squeezing (cone) inequality

    (1/2) d/dt V(xi) + alpha(w) V(xi) <= -mu ||xi||^2_{H2}

along co-integrated trajectories (w, xi) of the transformed flow, where
V(xi) = ||Q_N xi||^2_{H1} - ||P_N xi||^2_{H1} is the squeezing form of the
|n| <= N splitting, alpha switches between the gap midpoint and the damped
value depending on ||P_N w||_{H2}, and mu defaults to the gap ratio
(lambda_{2N+1} - lambda_{2N}) / (16 lambda_{2N+1}).

The residual is evaluated both in differential form (centered differences of
V, with a Richardson error estimate attached) and in integrated per-step form
(which decouples pass/fail from differentiation noise); both are normalized
by ||xi||^2_{H1} so the check is scale-free along decaying tangents.

The spectral-gap audit reproduces the sign bookkeeping of the underlying
estimates from measured constants: each bracket that must be non-negative is
evaluated per candidate dimension N, and the smallest feasible N is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .dynamics import integrate_variational
from .spectral import (
    eigenvalue_split,
    high_pass,
    low_pass,
    sobolev_norm,
)

__all__ = [
    "squeezing_form",
    "cone_rate",
    "default_squeeze_mu",
    "ConeReport",
    "run_cone_check",
    "EmpiricalConstants",
    "measure_constants",
    "gap_audit",
    "negative_control_cut",
]


def squeezing_form(xi, n_split):
    """V(xi) = ||Q_N xi||^2_{H1} - ||P_N xi||^2_{H1} (H1 = the (A., .) form)."""
    n = min(n_split, xi.n_max)
    return sobolev_norm(high_pass(xi, n), 1.0) ** 2 - sobolev_norm(low_pass(xi, n), 1.0) ** 2


def cone_rate(w, n_split, radius):
    """alpha(w): the gap midpoint, lowered by lambda_{2N}/4 when the low-mode
    block is large (||P_N w||_{H2} > 2 R)."""
    lam_lo, lam_hi = eigenvalue_split(n_split)
    alpha = 0.5 * (lam_lo + lam_hi)
    if sobolev_norm(low_pass(w, min(n_split, w.n_max)), 2.0) > 2.0 * radius:
        alpha -= lam_lo / 4.0
    return alpha


def default_squeeze_mu(n_split):
    lam_lo, lam_hi = eigenvalue_split(n_split)
    return (lam_hi - lam_lo) / (16.0 * lam_hi)


@dataclass
class ConeReport:
    """Per-time record of one co-integrated cone check.

    residual_diff carries the centered-difference form (with fd_error the
    attached Richardson estimate of its discretization error); residual_int
    the per-step integrated form. Both are normalized by ||xi||^2_{H1}.
    A pass requires the integrated residual below tolerance at every step
    whose rate regime did not switch, and the differential residual below
    tolerance plus its attached error estimate.
    """

    times: np.ndarray
    V: np.ndarray
    alpha: np.ndarray
    residual_diff: np.ndarray
    fd_error: np.ndarray
    residual_int: np.ndarray
    regimes: np.ndarray
    mu: float
    n_split: int
    tol: float
    meta: dict = dc_field(default_factory=dict)

    @property
    def violations(self):
        bad_int = self.residual_int > self.tol
        switch = np.zeros_like(bad_int)
        switch[:-1] = self.regimes[1:] != self.regimes[:-1]
        bad_int = bad_int & ~switch
        bad_diff = self.residual_diff > self.tol + self.fd_error
        return int(np.sum(bad_int[:-1] | bad_diff[:-1]))

    @property
    def passed(self):
        return self.violations == 0

    @property
    def margin(self):
        return float(np.max(self.residual_int[:-1])) if len(self.residual_int) > 1 else 0.0


def run_cone_check(sys, w0, xi0, t_end, mu=None, dt=1e-3, tol=1e-6):
    """Co-integrate (w, xi) under the transformed flow and its linearization
    and evaluate the squeezing residuals; variational blow-up is flagged in
    the report, not fatal."""
    n_split = sys.n_split
    if mu is None:
        mu = default_squeeze_mu(n_split)
    traj_w, traj_xi = integrate_variational(sys, w0, xi0, 0.0, t_end, dt,
                                            record_stride=1)
    times = traj_w.times
    V = np.array([squeezing_form(x, n_split) for x in traj_xi.states])
    alpha = np.array([cone_rate(w, n_split, sys.damping_radius)
                      for w in traj_w.states])
    lam_lo, _ = eigenvalue_split(n_split)
    regimes = np.where(alpha < 0.5 * (lam_lo + eigenvalue_split(n_split)[1]), 2, 1)
    h2sq = np.array([sobolev_norm(x, 2.0) ** 2 for x in traj_xi.states])
    phisq = np.array([sobolev_norm(x, 1.0) ** 2 for x in traj_xi.states])
    phisq = np.maximum(phisq, 1e-300)
    dt_rec = times[1] - times[0] if len(times) > 1 else dt

    n_pts = len(times)
    resid_diff = np.full(n_pts, -np.inf)
    fd_err = np.zeros(n_pts)
    for i in range(1, n_pts - 1):
        dv = (V[i + 1] - V[i - 1]) / (2.0 * dt_rec)
        resid_diff[i] = (0.5 * dv + alpha[i] * V[i] + mu * h2sq[i]) / phisq[i]
        if 2 <= i <= n_pts - 3:
            dv2 = (V[i + 2] - V[i - 2]) / (4.0 * dt_rec)
            fd_err[i] = abs(0.5 * (dv - dv2)) / (3.0 * phisq[i])
    fd_err[1] = fd_err[2] if n_pts > 3 else 0.0
    fd_err[n_pts - 2] = fd_err[n_pts - 3] if n_pts > 3 else 0.0

    resid_int = np.full(n_pts, -np.inf)
    for i in range(n_pts - 1):
        decay = np.exp(-2.0 * alpha[i] * dt_rec)
        quad = 0.5 * dt_rec * (decay * h2sq[i] + h2sq[i + 1])
        resid_int[i] = (V[i + 1] - decay * V[i] + 2.0 * mu * quad) / max(
            phisq[i], phisq[i + 1]
        )

    diverged = traj_w.diverged or traj_xi.diverged
    return ConeReport(times, V, alpha, resid_diff, fd_err, resid_int, regimes,
                      mu, n_split, tol, meta={"diverged": diverged, "dt": dt_rec})


# -- spectral gap audit -------------------------------------------------------------


@dataclass
class EmpiricalConstants:
    """Measured surrogates for the audit brackets.

    c_f1: coefficient of the K^{-1/2} law of the advection-residual term
          (max over swept cuts of Lipschitz * sqrt(K));
    c_k: Lipschitz constant of the reaction term (H1 -> H1) at the working cut;
    c_tilde: mean-advection pairing constant in the small-low-mode regime;
    c_bar1: sup of ||Theta'(w)|| * ||w||_{H1} (large-low-mode regime).
    """

    c_f1: float
    c_k: float
    c_tilde: float
    c_bar1: float


def measure_constants(base, k_cut, rng, k_sweep=(8, 16, 32, 64), n_split=10,
                      r_bar=1.6, n_samples=4):
    from .transform import (
        f1_lipschitz_sweep,
        lipschitz_probe,
        make_transformed,
        theta_term_probe,
    )

    rows = f1_lipschitz_sweep(base, list(k_sweep), rng, n_samples=n_samples,
                              n_split=n_split, r_bar=r_bar)
    c_f1 = max(r["lipschitz"] * np.sqrt(r["k"]) for r in rows)
    sys = make_transformed(base, k_cut=k_cut, n_split=n_split, r_bar=r_bar)
    c_k = lipschitz_probe(sys, rng, "F2", n_samples=n_samples)
    probes = theta_term_probe(sys, rng, n_samples=n_samples)
    return EmpiricalConstants(c_f1=float(c_f1), c_k=float(c_k),
                              c_tilde=float(probes["c_tilde"]),
                              c_bar1=float(probes["c_bar1"]))


def _brackets(n, k_cut, c):
    lam_lo, lam_hi = eigenvalue_split(n)
    gap = lam_hi - lam_lo
    mu = gap / (16.0 * lam_hi)
    return {
        "h1": gap / 8.0 - c.c_k,
        "h54": (lam_hi**0.75 - lam_lo**0.75) / 8.0 - c.c_tilde,
        "h2_small": mu - 2.0 * c.c_f1**2 / (k_cut * gap),
        "damp": lam_lo / 4.0 - 8.0 * c.c_bar1**2 * lam_hi / gap,
        "h2_large": gap / (32.0 * lam_hi) - 2.0 * c.c_f1**2 / (k_cut * gap),
    }


def gap_audit(constants, k_cut, n_candidates=range(1, 65)):
    """Evaluate the sign bookkeeping of the squeezing estimates.

    Every bracket must be non-negative for the cone inequality to close; the
    report lists the per-N values, whether the K-condition (c_f1^2 / K below
    1/64) holds, and the smallest N at which all brackets clear.
    """
    rows = []
    min_n = None
    for n in n_candidates:
        b = _brackets(n, k_cut, constants)
        ok = all(v >= 0.0 for v in b.values())
        rows.append({"n": int(n), **b, "all_nonnegative": ok})
        if ok and min_n is None:
            min_n = int(n)
    return {
        "k_cut": int(k_cut),
        "constants": vars(constants),
        "k_condition": constants.c_f1**2 / k_cut <= 1.0 / 64.0,
        "rows": rows,
        "min_feasible_n": min_n,
    }


def negative_control_cut(constants, n_candidates=range(1, 65)):
    """Largest mode cut at which the audit predicts a bracket-sign flip
    (None when even K = 1 keeps every bracket non-negative)."""
    for k in range(64, 0, -1):
        rows = gap_audit(constants, k, n_candidates)["rows"]
        if any(r["h2_small"] < 0.0 or r["h2_large"] < 0.0 for r in rows):
            return k
    return None
