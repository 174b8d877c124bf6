"""Exception hierarchy.

Every failure raised by the library derives from :class:`ResfactError`, so
callers (the CLI in particular) can map whole families to exit codes.
"""


class ResfactError(Exception):
    """Base class for all library errors."""


# linear algebra
class InvalidOperand(ResfactError, ValueError):
    pass


class EigFailure(ResfactError, ArithmeticError):
    pass


class NotPositiveSemidefinite(ResfactError, ValueError):
    pass


# model
class OutsideHolomorphyDomain(ResfactError, ValueError):
    pass


class EndpointSingularity(ResfactError, ValueError):
    pass


# contour
class ContourError(ResfactError):
    pass


class ContourOutsideDomain(ContourError, ValueError):
    pass


class ContourDegenerate(ContourError, ValueError):
    pass


class UnboundedTail(ContourError, ValueError):
    pass


class DivergentVariation(ContourError, ArithmeticError):
    pass


class ContourTouchesSpectrum(ContourError, ValueError):
    pass


class NoAdmissibleContour(ContourError, ValueError):
    pass


# transfer function
class OnSpectralCut(ResfactError, ValueError):
    pass


class NearContour(ResfactError, ValueError):
    pass


class SpectrumMeetsContour(ResfactError, ArithmeticError):
    pass


# solver
class NoConvergence(ResfactError, ArithmeticError):
    pass


class NotAdmissible(ResfactError, ValueError):
    pass


# factorization
class BadResidueContour(ResfactError, ValueError):
    pass


class OmegaSingular(ResfactError, ArithmeticError):
    pass


class CircleNotIsolating(ResfactError, ValueError):
    pass


# oracle
class UnresolvedRegion(ResfactError, ArithmeticError):
    pass


class IllConditionedSample(ResfactError, ArithmeticError):
    pass


class ConfigError(ResfactError, ValueError):
    pass
