"""Exception types shared across the package.

Each class maps to one CLI exit code / HTTP status, so raising the right
type here is what makes error reporting consistent everywhere else.
"""


class ValidationError(ValueError):
    """Malformed or inconsistent input (exit code 1)."""


class RangeError(IndexError):
    """Index or coordinate outside the valid domain (exit code 2)."""


class BudgetError(MemoryError):
    """An operation would exceed the configured memory budget (exit code 4)."""


EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RANGE = 2
EXIT_IO = 3
EXIT_BUDGET = 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, RangeError):
        return EXIT_RANGE
    if isinstance(exc, BudgetError):
        return EXIT_BUDGET
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_VALIDATION
