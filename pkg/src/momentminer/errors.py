"""Exception hierarchy shared by all momentminer modules."""


class MinerError(Exception):
    """Base class for all momentminer errors."""


class ParseError(MinerError):
    """A JSONL line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(MinerError):
    """Structural violation: dangling reference, dimension mismatch, bad record."""


class ConfigError(MinerError):
    """Invalid or incomplete configuration (merge maps, schemas, pipeline config)."""


class PreconditionError(MinerError):
    """An operation was invoked on data that does not meet its stated precondition."""


class UndefinedResultError(MinerError):
    """The requested quantity has a zero denominator or is otherwise undefined."""
