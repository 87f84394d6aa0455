"""Exception hierarchy shared by all modules.

``InputError`` subclasses map to CLI exit code 2, ``NumericalError`` to 3.
"""


class IlliqError(Exception):
    pass


class InputError(IlliqError, ValueError):
    """Malformed or inconsistent user input."""


class TreeError(InputError):
    pass


class OrphanNodeError(TreeError):
    pass


class CycleError(TreeError):
    pass


class ProbabilitySumError(TreeError):
    pass


class LeafHorizonError(TreeError):
    pass


class NonPositiveProbabilityError(TreeError):
    pass


class ModelError(InputError):
    """A market specification violates its invariants."""


class DimensionError(InputError):
    pass


class NotConicalError(InputError):
    """Operation requires a conical market model."""


class NumericalError(IlliqError, ArithmeticError):
    """Solver breakdown (singular basis, residual check failure)."""
