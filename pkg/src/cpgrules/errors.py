"""Exception hierarchy shared by the library and the CLI exit codes."""


class CpgRulesError(Exception):
    """Base class for all library errors."""


class ConfigError(CpgRulesError):
    """Bad configuration or missing resource; CLI exit code 2."""


class DataError(CpgRulesError):
    """Malformed input data; CLI exit code 3."""

    def __init__(self, message, path=None, line_no=None):
        self.path = path
        self.line_no = line_no
        where = ""
        if path is not None:
            where = f"{path}:"
            if line_no is not None:
                where += f"{line_no}:"
            where += " "
        super().__init__(where + message)


class InsufficientData(CpgRulesError):
    """Not enough labeled data (for example fewer than two classes)."""
