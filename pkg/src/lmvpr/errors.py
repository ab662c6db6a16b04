"""Exception hierarchy. CLI exit codes map onto these classes."""


class LmvprError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(LmvprError):
    """Invalid box/image geometry or an out-of-domain scalar."""


class ConfigError(LmvprError):
    """Bad configuration: rejected at load time, before any data is touched."""


class ParseError(LmvprError):
    """Malformed input file."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class BlockMagicError(ParseError):
    """Descriptor block file does not start with the expected magic bytes."""


class BlockVersionError(ParseError):
    """Descriptor block file carries an unsupported version."""


class BlockDimError(ParseError):
    """Descriptor block dimension does not match what the caller expects."""


class BlockTruncatedError(ParseError):
    """Descriptor block payload is shorter than its header promises."""


class DataError(LmvprError):
    """Input data violates a contract (out-of-bounds box, empty set, ...)."""
