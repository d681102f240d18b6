"""Exception hierarchy shared by every stage of the pipeline."""


class ContactDaysError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(ContactDaysError, ValueError):
    """A schedule description violates its own constraints."""


class ConfigError(ContactDaysError, ValueError):
    """Suite or pipeline configuration is inconsistent."""


class PipelineError(ContactDaysError):
    """A pipeline step failed for a specific schedule or protocol."""

    def __init__(self, message, protocol_id=None):
        self.protocol_id = protocol_id
        if protocol_id is not None:
            message = f"[{protocol_id}] {message}"
        super().__init__(message)


class TransportError(PipelineError):
    """Remote backend kept failing after every retry.

    ``attempts`` holds one dict per attempt with the error text and the
    delay slept before the next attempt.
    """

    def __init__(self, message, attempts, protocol_id=None):
        self.attempts = list(attempts)
        super().__init__(message, protocol_id=protocol_id)


class ParseError(ContactDaysError, ValueError):
    """Backend output could not be turned into validated records.

    The raw text is kept on the exception for auditing.
    """

    def __init__(self, message, raw=None):
        self.raw = raw
        super().__init__(message)


class UndefinedMetricError(ContactDaysError, ValueError):
    """A metric was requested on an input it is not defined for."""


class StructureError(ContactDaysError, ValueError):
    """Stage-one structure is unusable for the counting stage."""
