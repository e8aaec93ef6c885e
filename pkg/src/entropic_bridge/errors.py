"""Exception hierarchy shared by all modules."""


class BridgeError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(BridgeError, ValueError):
    pass


class DomainError(BridgeError, ValueError):
    """Argument outside the domain of a scalar or matrix function."""


class NotPositiveDefiniteError(BridgeError, ValueError):
    pass


class SolverError(BridgeError, ArithmeticError):
    """A linear solve was singular or produced a non-finite answer."""


class ModelError(BridgeError, ValueError):
    """The (A, B, mu) triple violates the Hurwitz / full-rank assumptions."""


class ConditioningError(BridgeError, ArithmeticError):
    """The controllability Gramian is too ill-conditioned to invert."""


class NotReachableError(BridgeError, ValueError):
    """A covariance lies outside the image of the nominal covariance map."""


class PositivityViolation(BridgeError, ArithmeticError):
    """An eigenvalue that theory guarantees positive came out nonpositive."""


class TerminalLayerError(BridgeError, ValueError):
    """Remaining horizon too short to evaluate the feedback gain."""


class StepSizeError(BridgeError, ArithmeticError):
    """Integration lost positive definiteness even after step refinement."""


class ConfigError(BridgeError, ValueError):
    pass


class OracleFailure(BridgeError, RuntimeError):
    """The brute-force optimizer failed to meet its terminal constraint."""
