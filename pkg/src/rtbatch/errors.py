"""Exception hierarchy for the scheduler, profiler and simulator."""


class SchedError(Exception):
    """Base class for every error raised by this package."""


class UnknownCategory(SchedError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class BatchTooLarge(SchedError, ValueError):
    pass


class DuplicateCategory(SchedError, ValueError):
    pass


class ParseError(SchedError, ValueError):
    """Malformed profile or trace input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MonotonicityViolation(SchedError, ValueError):
    pass


class EmptyCategory(SchedError, ValueError):
    pass


class DegenerateDeadline(SchedError, ValueError):
    pass


class DuplicateRequest(SchedError, ValueError):
    pass


class NotIdle(SchedError, RuntimeError):
    pass


class EmptyQueue(SchedError, IndexError):
    pass


class WorkerBusy(SchedError, RuntimeError):
    pass


class UnsortedInput(SchedError, ValueError):
    pass


class InvalidConfig(SchedError, ValueError):
    pass
