"""Exception hierarchy shared by all conekit modules."""


class ConekitError(Exception):
    """Base class for every error raised by conekit."""


class UnsupportedAlgebra(ConekitError):
    pass


class InvalidSize(ConekitError):
    pass


class AlgebraMismatch(ConekitError):
    pass


class ConvergenceFailure(ConekitError):
    pass


class SingularElement(ConekitError):
    pass


class NotInCone(ConekitError):
    pass


class NotInterior(ConekitError):
    pass


class NotAFrame(ConekitError):
    pass


class NotAdmissible(ConekitError):
    pass


class NotConservative(ConekitError):
    pass


class StepUnderflow(ConekitError):
    pass


class DriftNotInLieAlgebra(ConekitError):
    pass


class PoleArgument(ConekitError):
    pass


class CapExceeded(ConekitError):
    pass


class CalibrationFailure(ConekitError):
    pass


class DensityDoesNotExist(ConekitError):
    pass


class TailNotConverged(ConekitError):
    pass


class UnsupportedCombination(ConekitError):
    pass


class InvalidLaw(ConekitError):
    pass


class ThinningBoundExceeded(ConekitError):
    pass


class BlockSingular(ConekitError):
    pass


class ConfigError(ConekitError):
    """Malformed configuration or parameter document."""
