"""Exception hierarchy shared by every module.

The CLI maps each family onto an exit status, so the split between
input problems, exhausted budgets and failed verifications matters.
"""


class ScalelabError(Exception):
    reason = "error"


class InputError(ScalelabError, ValueError):
    """Malformed or out-of-contract input."""

    reason = "input_error"


class BudgetError(ScalelabError):
    """A search or solver ran out of its configured budget.

    This is never a negative answer: the question was left undecided.
    """

    reason = "budget_exceeded"


class SolverError(BudgetError):
    """An iterative solver did not reach its target accuracy."""

    reason = "solver_error"

    def __init__(self, message, best_gap=None):
        super().__init__(message)
        self.best_gap = best_gap


class RealizabilityError(InputError):
    """No row of the class is consistent with a labelled sample."""

    reason = "unrealizable"


class ConstructionError(BudgetError):
    """A randomized construction failed verification on every retry."""

    reason = "construction_failed"


class PropertyViolation(ScalelabError, AssertionError):
    """A checked mathematical property did not hold."""

    reason = "property_violation"
