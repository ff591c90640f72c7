"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: data problems exit 2, size/budget
problems exit 3.
"""


class StructuraError(Exception):
    """Base class for all package errors."""


class GraphStructureError(StructuraError):
    """A graph, assignment, or factor violates a structural invariant."""


class DataFormatError(StructuraError):
    """A corpus or config file failed schema validation."""


class SizeBudgetError(StructuraError):
    """An enumeration or time budget was exceeded."""


class InfeasibleError(StructuraError):
    """No assignment satisfies the active constraint set."""


class ConstraintError(StructuraError):
    """A constrained operation was called with inputs breaking its preconditions."""
