"""Exception hierarchy shared by all rdalab modules.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericalAlarm (and subclasses) -> 3, StructuralAlarm -> 4.
"""


class RdaLabError(Exception):
    """Base class for all rdalab errors."""


class ConfigError(RdaLabError):
    """Invalid or inconsistent configuration."""


class TruncationError(RdaLabError):
    """A mode cut exceeds the truncation of the field it is applied to."""


class PreconditionError(RdaLabError):
    """An operation precondition (e.g. zero-mean input) is violated."""


class NumericalAlarm(RdaLabError):
    """A numerical monitor tripped (divergence, non-convergence, ...)."""


class DivergenceError(NumericalAlarm):
    """Time integration produced non-finite values.

    Carries the time stamp and, when available, the partial trajectory
    accumulated before the blow-up.
    """

    def __init__(self, t, message=None, trajectory=None):
        super().__init__(message or f"solution diverged at t={t:.6g}")
        self.t = t
        self.trajectory = trajectory


class FixedPointError(NumericalAlarm):
    """A fixed-point iteration failed to converge; carries the last residual."""

    def __init__(self, residual, iterations, message=None):
        super().__init__(
            message
            or f"fixed point did not converge ({iterations} iterations, "
            f"residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


class ProjectionTooCoarseError(NumericalAlarm):
    """The projected linear solver is not contracting: the mode cut is too small."""

    def __init__(self, contraction, k_cut):
        super().__init__(
            f"contraction factor {contraction:.3f} >= 1 at mode cut {k_cut}"
        )
        self.contraction = contraction
        self.k_cut = k_cut


class StructuralAlarm(RdaLabError):
    """Two independent computations of the same object disagree."""
