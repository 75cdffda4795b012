"""Exception hierarchy shared by every subsystem."""


class TMError(Exception):
    """Base class for all errors raised by tmonline."""


class ConfigurationError(TMError, ValueError):
    pass


class InputError(TMError, ValueError):
    pass


class QueryError(TMError, ValueError):
    pass


class TrainingError(TMError, ValueError):
    pass


class AddressError(TMError, IndexError):
    pass


class ScheduleError(TMError, ValueError):
    pass


class AnalysisError(TMError, ValueError):
    pass


class ParseError(TMError, ValueError):
    """Malformed dataset, fault table or schedule file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
