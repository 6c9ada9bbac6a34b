"""Exception hierarchy shared by all mtsketch modules."""


class MtsError(Exception):
    """Base class for every error raised by mtsketch."""


class ConfigurationError(MtsError, ValueError):
    """Invalid sketch or hashing parameters (e.g. m < 16)."""


class IncompatibleSketches(MtsError):
    """Sketches built under different configs or seeds were combined."""


class CorruptSketch(MtsError):
    """A serialized sketch failed magic, version, length or checksum checks."""


class EmptySketch(MtsError):
    """An estimate was requested from a sketch with no insertions."""


class SampleTooSparse(MtsError):
    """Every retained element is a singleton, so 1 / (1 - P0) is undefined."""


class ExpressionSampleEmpty(MtsError):
    """No element of the merged subsample satisfies the set expression."""


class ExprSyntaxError(MtsError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class BindingError(MtsError, ValueError):
    """Expression refers to a stream that is not bound."""


class SpecificationError(MtsError, ValueError):
    """Inconsistent workload or experiment specification."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
