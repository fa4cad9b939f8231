"""Exception hierarchy shared by all modules."""


class FlagVertexError(Exception):
    """Base class for all library errors."""


class PoleError(FlagVertexError):
    """A Pochhammer/bracket factor vanished where it must not (non-generic parameters)."""


class RewritePole(PoleError):
    """Canonicalizing a phi-product produced a factor 1/(1-m) with m = 1."""


class ShapeError(FlagVertexError):
    """Incompatible series shapes (number of grading variables)."""


class RangeError(FlagVertexError):
    """An index argument is outside its legal range."""


class ReliabilityError(FlagVertexError):
    """A comparison was requested beyond the reliable truncation order."""


class CalibrationError(FlagVertexError):
    """Sign-convention calibration found zero or several passing conventions."""


class IdentityFailure(FlagVertexError):
    """An exact identity check failed; carries the first failing sample."""


class LimitError(FlagVertexError):
    """A coefficient diverges in the large-hbar limit."""


class WeightError(FlagVertexError):
    """A tensor vector does not sit in a single weight block."""


class SingularSystemError(FlagVertexError):
    """The sample moment matrix of a linear extraction problem is singular."""


class DegenerateRootError(FlagVertexError):
    """Bethe roots are zero or collide within the collision guard."""


class ConvergenceError(FlagVertexError):
    """A Newton/homotopy path failed to converge (per-seed, non-fatal)."""


class JacobianSingular(ConvergenceError):
    """Newton hit a numerically singular Jacobian."""


class NoFitError(FlagVertexError):
    """The low-order linear system of the insertion fit is inconsistent."""


class ConfigError(FlagVertexError):
    """A run configuration is invalid."""


class CompletenessWarning(UserWarning):
    """Bethe solution count does not match the weight-block dimension."""
