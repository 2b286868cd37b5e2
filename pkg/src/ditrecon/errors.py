"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data/format
problems exit 2, internal-consistency failures exit 3.
"""


class InvalidArgumentError(ValueError):
    """A precondition on an argument was violated."""


class FormatError(ValueError):
    """A file could not be parsed or has an unsupported layout."""


class DegenerateInputError(ValueError):
    """Input is valid in shape but degenerate (e.g. zero variance)."""


class ConsistencyError(RuntimeError):
    """An internal numerical invariant was broken (e.g. Hermitian residual)."""
