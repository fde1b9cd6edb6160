"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid geometry, parameters, config file or spec file."""


class InvariantViolation(RuntimeError):
    """An internal consistency rule was broken (e.g. access to a powered-off color)."""


class TraceFormatError(ValueError):
    """A trace file could not be parsed.

    ``line`` is 1-based and ``offset`` is the byte offset of the start of the
    offending line.
    """

    def __init__(self, message, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        text = f"{message} ({', '.join(where)})" if where else message
        super().__init__(text)
        self.line = line
        self.offset = offset


class ReportMismatchError(ValueError):
    """Two reports cannot be compared (different traces or instruction windows)."""
