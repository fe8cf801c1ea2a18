"""Exception hierarchy shared by the whole engine.

Every error carries a short machine-readable ``code`` used by the CLI
(single-line error output) and the HTTP service (JSON error bodies).
"""


class AlspeechError(Exception):
    code = "error"
    exit_code = 2

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def __str__(self):
        return self.message


class ValidationError(AlspeechError):
    """Malformed input: bad file contents, bad arguments, broken invariants."""

    code = "validation"
    exit_code = 2


class ParseError(ValidationError):
    code = "parse"
    exit_code = 4


class DuplicateIdError(ValidationError):
    code = "duplicate-id"


class WrongArityError(ValidationError):
    code = "wrong-arity"


class NonFiniteError(ValidationError):
    code = "non-finite"


class DimensionMismatchError(ValidationError):
    code = "dimension-mismatch"


class MissingScoreError(ValidationError):
    code = "missing-score"


class MissingEntropiesError(ValidationError):
    code = "missing-entropies"


class MissingClustersError(ValidationError):
    code = "missing-clusters"


class FewerThanTwoClustersError(ValidationError):
    code = "fewer-than-two-clusters"


class ZeroVarianceError(ValidationError):
    code = "zero-variance"


class IncompleteBatchError(ValidationError):
    code = "incomplete-batch"


class StateConflictError(AlspeechError):
    """Operation not legal in the current pipeline state."""

    code = "state-conflict"
    exit_code = 3


class ConflictError(StateConflictError):
    code = "conflict"


class PendingBatchError(StateConflictError):
    code = "pending-batch"


class LockedError(StateConflictError):
    code = "locked"


class IoError(AlspeechError):
    code = "io"
    exit_code = 4


class VersionError(IoError):
    code = "version"


class IntegrityError(IoError):
    code = "integrity"
