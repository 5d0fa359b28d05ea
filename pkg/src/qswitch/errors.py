"""Exception types raised by qswitch."""


class QSwitchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(QSwitchError, ValueError):
    """An input object (MDP, feature matrix, flag) breaks a precondition."""


class AssumptionError(InvalidInputError):
    """Feature matrix violates nonnegativity/orthogonality where required."""


class PolicyCapError(InvalidInputError):
    """|A|^|S| exceeds the configured enumeration cap."""


class ConvergenceError(QSwitchError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class NoFixedPointError(QSwitchError, RuntimeError):
    """No self-consistent projected Bellman solution was found."""


class BlowUpError(QSwitchError, FloatingPointError):
    """A trajectory or iterate became non-finite."""
