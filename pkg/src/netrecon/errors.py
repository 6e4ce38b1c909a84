"""Exception hierarchy shared across the package.

ParameterError covers bad caller input; NumericalError subclasses cover
failures of the numerics themselves (singular systems, infeasible
programs, rank deficiencies). The CLI maps the two branches to exit
codes 1 and 2 respectively.
"""


class ParameterError(ValueError):
    """Invalid argument (dimension, range, or inconsistent shapes)."""


class NumericalError(RuntimeError):
    """Base class for numerical failures."""


class IllPosedNetworkError(NumericalError):
    """(I - Q0) too close to singular to simulate."""


class ResolutionSingularityError(NumericalError):
    """(I - Q22) or (I - D11) singular during resolution change."""


class RankDeficiencyError(NumericalError):
    """Known-nonzero block of the sensing matrix is rank deficient."""


class SparsityInfeasibleError(NumericalError):
    """No support of the requested size fits the data."""


class InfeasibleSystemError(NumericalError):
    """Right-hand side not in the range of the sensing matrix."""


class SolverFailureError(NumericalError):
    """LP solver did not converge."""

    def __init__(self, message, iterations=-1):
        super().__init__(message)
        self.iterations = iterations


class UndefinedCoherenceError(NumericalError):
    """Coherence needs at least two nonzero columns."""
