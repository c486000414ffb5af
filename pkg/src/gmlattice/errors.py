"""Exception hierarchy for the gmlattice solvers.

All solver-specific failures derive from :class:`GmLatticeError` so callers
(and the CLI) can map them onto exit codes: configuration / precondition
violations, numerical non-convergence, and linear-algebra failures.
"""


class GmLatticeError(Exception):
    """Base class for all gmlattice errors."""


class ValidationError(GmLatticeError):
    """Invalid configuration or argument values; reported with key paths."""


class NoSurfaceBand(ValidationError):
    """The boundary parameters do not support a propagating surface-wave band
    (requires alpha_s < m_s)."""


class FrequencyOutOfBand(ValidationError):
    """Requested frequency lies outside the guarded surface-wave band."""


class GammaOutOfSpectrum(ValidationError):
    """Transverse eigenvalue outside the continuous band and not the discrete one."""


class NumericalError(GmLatticeError):
    """Base class for non-convergence of a numerical procedure."""


class NonPositiveDiscriminant(NumericalError):
    """The band-edge quadratic has no real root for the given parameters."""


class RootFindFailure(NumericalError):
    """A scalar root find did not converge; carries bracket and residual info."""


class QuadratureNotConverged(NumericalError):
    """Doubling the quadrature nodes moved the result more than the tolerance."""


class TruncationNotConverged(NumericalError):
    """Doubling the hierarchy truncation order moved headline moments more
    than the tolerance."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a special function."""


class SingularSystem(GmLatticeError):
    """Dense solve hit a (near-)singular matrix; carries a condition estimate."""

    def __init__(self, message, cond_estimate=None):
        super().__init__(message)
        self.cond_estimate = cond_estimate
