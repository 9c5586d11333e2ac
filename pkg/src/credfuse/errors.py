"""Exception taxonomy. The CLI maps each class to a distinct exit code."""


class CredfuseError(Exception):
    """Base class for all package errors."""


class ContractError(CredfuseError):
    """A documented precondition or invariant was violated by the caller."""


class FormatError(CredfuseError):
    """A file (model, dataset, config) is malformed or has the wrong schema."""


class InferenceError(CredfuseError):
    """Evaluation produced a non-finite or degenerate result."""


class TrainingError(CredfuseError):
    """The training loop aborted (e.g. non-finite loss)."""
