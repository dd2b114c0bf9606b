"""Exception hierarchy shared by every lokiforge module."""


class LokiError(Exception):
    """Base class for all lokiforge errors."""


class ShapeMismatch(LokiError, ValueError):
    pass


class InvalidDistribution(LokiError, ValueError):
    pass


class TapeReused(LokiError, RuntimeError):
    pass


class NonScalarLoss(LokiError, ValueError):
    pass


class TokenOutOfRange(LokiError, ValueError):
    pass


class SequenceTooLong(LokiError, ValueError):
    pass


class EmptyCorpus(LokiError, ValueError):
    pass


class InvalidTarget(LokiError, ValueError):
    pass


class UnknownTokenId(LokiError, ValueError):
    pass


class IoFailure(LokiError, OSError):
    pass


class ChecksumMismatch(LokiError, ValueError):
    pass


class ConfigMismatch(LokiError, ValueError):
    pass


class VocabMismatch(LokiError, ValueError):
    pass


class ReplacementExhausted(LokiError, RuntimeError):
    pass


class NonFiniteLoss(LokiError, FloatingPointError):
    pass


class RollbackLimitExceeded(LokiError, RuntimeError):
    """Raised when one checkpoint has absorbed more rollbacks than allowed."""

    def __init__(self, message, step=None, rollbacks=None):
        super().__init__(message)
        self.step = step
        self.rollbacks = rollbacks


class NotEnoughExemplars(LokiError, ValueError):
    pass


class SealedRunExists(LokiError, RuntimeError):
    def __init__(self, message, manifest_path=None):
        super().__init__(message)
        self.manifest_path = manifest_path


class UsageError(LokiError, ValueError):
    pass
