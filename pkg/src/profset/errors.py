"""Exception hierarchy shared by the pipeline stages.

The CLI maps each family to a distinct exit status.
"""


class ProfsetError(Exception):
    exit_code = 1


class DataError(ProfsetError):
    """Malformed input, broken referential integrity, or empty data."""

    exit_code = 2


class InfeasibleError(ProfsetError):
    """Constraint configuration admits no selection."""

    exit_code = 3


class BudgetExceededError(ProfsetError):
    exit_code = 4


class SolverBudgetError(BudgetExceededError):
    pass


class ExpectedModeBudgetError(BudgetExceededError):
    pass
