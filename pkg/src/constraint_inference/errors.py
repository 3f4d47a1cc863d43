class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class ParseError(ValueError):
    """Malformed segment or config file content."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(ValueError):
    """Parsed data that is structurally fine but physically inconsistent."""
