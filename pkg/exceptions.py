class DvampError(Exception):
    """
    Base class for every error raised by the simulator and solver stack.
    """


class ConfigurationError(DvampError, ValueError):
    pass


class TraceParseError(DvampError, ValueError):
    """
    Raised when a trace row cannot be parsed.

    Args:
        message (str): Description of the problem.
        line (int): 1-based line number in the trace file (header is line 1).
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceDataError(DvampError, ValueError):
    pass


class EpisodeError(DvampError, ValueError):
    pass


class InfeasibleActionError(DvampError, ValueError):
    pass


class AccountingError(DvampError, RuntimeError):
    pass


class UnschedulableError(DvampError, RuntimeError):
    pass


class ShapeError(DvampError, ValueError):
    pass


class ModelError(DvampError, RuntimeError):
    pass


class TrainingDivergedError(DvampError, RuntimeError):
    pass


class OracleLimitError(DvampError, ValueError):
    """
    Raised when an instance is too large for the exhaustive search.

    Args:
        message (str): Description of the violated limit.
        report (dict): Instance size report (n, m, limits).
    """

    def __init__(self, message, report=None):
        self.report = report or {}
        super().__init__(message)


class HorizonError(DvampError, ValueError):
    pass


class AdversaryError(DvampError, RuntimeError):
    pass


class PermutationError(DvampError, ValueError):
    pass
