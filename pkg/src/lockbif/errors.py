"""Exception hierarchy.

Each class corresponds to a distinct failure mode of the library; the CLI
maps them onto exit codes (see :mod:`lockbif.cli`).
"""


class LockBifError(Exception):
    """Base class for all library errors."""


class InvalidDomainError(LockBifError):
    """Domain geometry is inconsistent (e.g. outer radius <= inner radius)."""


class TooFewPointsError(LockBifError):
    """Grid resolution below the supported minimum."""


class SizeMismatchError(LockBifError):
    """A field does not match the grid (or partner field) size."""


class NonpositiveOperatorError(LockBifError):
    """-Laplace + a is not positive definite; the potential is inadmissible."""


class EigensolverError(LockBifError):
    """An underlying eigensolver failed to converge or returned garbage."""


class NoConvergenceError(LockBifError):
    """Newton iteration exhausted its budget without meeting the tolerance."""


class PositivityLostError(LockBifError):
    """An iterate or branch state developed a sign change."""


class DegenerateGroundStateError(LockBifError):
    """A weighted eigenvalue sits at 3: the scalar solution is degenerate and
    the bifurcation analysis refuses to run."""


class DegenerateSpectrumError(DegenerateGroundStateError):
    """Same condition, raised by spectrum consumers."""


class InsufficientSpectrumError(LockBifError):
    """The computed weighted spectrum is too short to certify a count
    (increase kmax)."""


class PoleError(LockBifError):
    """Scalar coupling function evaluated at a pole."""


class OutOfDomainError(LockBifError):
    """Coupling parameter outside the admissible intervals."""


class LambdaRangeError(LockBifError):
    """Requested eigenvalue has no preimage (must be > 1)."""


class UnequalMuError(LockBifError):
    """Operation requires all self-interaction coefficients equal."""


class NonpositiveDirectionError(LockBifError):
    """Amplitude direction must be strictly positive."""


class AtBifurcationError(LockBifError):
    """Morse index undefined: the transverse eigenvalue hits the spectrum."""


class WrongMultiplicityError(LockBifError):
    """Eigenbasis size inconsistent with the recorded multiplicity."""


class RatioViolatedError(LockBifError):
    """Input state does not satisfy the required component ratio."""


class ZeroComponentError(LockBifError):
    """A component is identically zero where a ratio is needed."""


class NotPairPartitionError(LockBifError):
    """Operation requires a two-block partition."""


class EmptyKernelError(LockBifError):
    """No kernel direction available for branch switching."""


class PartitionFormatError(LockBifError):
    """Malformed partition specification (repeats, gaps, or bad syntax)."""


class ConfigError(LockBifError):
    """Invalid run configuration."""
