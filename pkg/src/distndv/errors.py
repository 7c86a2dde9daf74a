"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid parameters for a sketch, generator or experiment."""


class IncompatibleSketchError(ValueError):
    """Two sketches cannot be combined (shape, precision or seed differ)."""


class DecodeError(ValueError):
    """A serialized sketch is truncated, garbled or of an unknown kind."""


class EstimatorUndefined(ArithmeticError):
    """An estimator has no finite value on the given inputs."""


class ResourceError(RuntimeError):
    """A request would materialize more data than the configured guard allows."""


class FoFParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
