"""rdalab: a spectral simulation and verification laboratory for 1D periodic
reaction-diffusion-advection systems.

Modules
-------
spectral   Fourier fields, projectors, norms, dealiased pointwise evaluation.
dynamics   ETDRK4 time integration, dissipativity monitors, variational flow.
diffeo     The multiplicative change of variables u = a*w and its solvers.
transform  The transformed equation: advection-residual and reaction terms,
           mean advection speed, low-mode damping, conjugacy and tail checks.
cone       Squeezing-form (cone) verification and the spectral-gap audit.
floquet    Time-periodic counterexample lab: period maps, decay laws, the
           extended nonlinear system and the mixed-BC symmetrization.
cli        Experiment runner with reproducible manifests.
"""

from .spectral import (
    FourierField,
    Grid,
    get_grid,
    low_pass,
    high_pass,
    shifted_laplacian,
    sobolev_norm,
    inner_l2,
    inner_sobolev,
    mean_value,
    apply_pointwise,
    eigenvalue,
    eigenvalue_split,
    random_real_field,
)
from .dynamics import (
    RDASystem,
    scalar_rda,
    make_system,
    step,
    integrate,
    variational_step,
    integrate_variational,
    Trajectory,
    dissipativity_report,
)

__version__ = "0.1.0"
