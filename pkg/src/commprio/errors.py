"""Exception hierarchy for the package.

The CLI maps exceptions to stable exit codes so shell pipelines can branch
on failure class: 1 usage/validation, 2 I/O, 3 computation. The mapping
lives here as a class attribute instead of in the CLI so library users see
the same taxonomy.
"""


class CommprioError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class ValidationError(CommprioError):
    """Bad parameter values or malformed/mismatched inputs."""

    exit_code = 1


class ParseError(ValidationError):
    """A text input (edge list, cover, model, ranking) could not be parsed."""


class InvalidParameterError(ValidationError):
    """A numeric or categorical parameter is outside its allowed range."""


class InvalidPairError(ValidationError):
    """A node pair operation was called with u == v."""


class InputMismatchError(ValidationError):
    """Two inputs that must share an id/label space do not."""


class SizeLimitError(ValidationError):
    """An input exceeds a configured size limit."""


class EmptyInputError(ValidationError):
    """An input contained no usable data (e.g. an edge list with no edges)."""


class ComputationError(CommprioError):
    """A computation could not produce a defined result."""


class EmptyCoverError(ComputationError):
    """Community extraction produced no non-empty communities."""


class DegenerateCommunityError(ComputationError):
    """A community is too small for the requested feature."""


class TooFewCommunitiesError(ComputationError):
    """Rank aggregation needs at least three communities."""


class UndefinedCorrelationError(ComputationError):
    """Rank correlation is undefined (a rank vector is constant)."""


class BenchmarkError(ComputationError):
    """Too many benchmark trials failed to report a result."""
