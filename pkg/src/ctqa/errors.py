"""Exception hierarchy shared across the engine."""


class CtqaError(Exception):
    """Base class for all engine errors."""


class FormatError(CtqaError):
    """A binary container could not be decoded."""


class MagicMismatchError(FormatError):
    pass


class VersionUnsupportedError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class DimensionMismatchError(CtqaError):
    """Declared dimensions disagree with actual payload or operand shapes."""


class InvalidDimsError(CtqaError):
    pass


class EmptyVolumeError(CtqaError):
    pass


class KTooLargeError(CtqaError):
    pass


class MTooLargeError(CtqaError):
    pass


class AdapterMissingError(CtqaError):
    pass


class BackendUnavailableError(CtqaError):
    """A model backend could not be reached or returned a transport error."""


class MalformedDecisionError(CtqaError):
    """The planner backend reply could not be parsed, even after a retry."""


class UnknownRegionError(CtqaError):
    pass


class HubMissingRegionError(CtqaError):
    pass


class IllegalTransitionError(CtqaError):
    pass


class TaskMismatchError(CtqaError):
    pass


class StudyNotFoundError(CtqaError):
    pass


class WrongCountError(CtqaError):
    pass


class ZeroVectorError(CtqaError):
    pass


class EmbeddingFailureError(CtqaError):
    pass


class EmptyInputError(CtqaError):
    pass


class EmptyCandidateError(EmptyInputError):
    pass


class ConfigInvalidError(CtqaError):
    pass


class BindFailureError(CtqaError):
    pass
