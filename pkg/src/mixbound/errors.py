"""Exception types shared across the package.

Every error raised on a bad input or an exceeded resource limit derives from
MixboundError so callers (and the CLI) can map failures to exit codes without
pattern-matching on messages.
"""


class MixboundError(Exception):
    """Base class for all package-specific errors."""


class SpecFormatError(MixboundError):
    """A spec document (JSON/CSV) is malformed or violates the schema."""


class SpaceMismatch(MixboundError):
    """Two objects were combined but live on different state spaces."""


class LengthMismatch(MixboundError):
    """Two paths or tables have incompatible lengths."""


class IndexOutOfRange(MixboundError):
    """A coordinate index fell outside 1..n or violated i < j."""


class DomainError(MixboundError):
    """A scalar argument fell outside its admissible range."""


class NormalizationError(MixboundError):
    """A probability vector deviated from total mass 1 beyond tolerance."""


class ZeroProbabilityPrefix(MixboundError):
    """Conditioning was requested on a prefix with probability zero."""


class EnumerationLimitExceeded(MixboundError):
    """An exact computation would enumerate more paths than the configured cap."""


class OptimizationLimitExceeded(MixboundError):
    """A norm optimization instance is larger than the configured cap."""


class QuadratureFailure(MixboundError):
    """Numerical integration of a kernel row missed total mass 1 too badly."""


class SupportMismatch(MixboundError):
    """Two partitions cover different intervals."""


class NonConvergence(MixboundError):
    """An iterative estimate failed to stabilize within its budget."""


class PreconditionFailed(MixboundError):
    """A documented call precondition does not hold for the given inputs."""
