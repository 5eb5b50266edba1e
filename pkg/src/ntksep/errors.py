class DimensionMismatchError(ValueError):
    pass


class CapacityError(ValueError):
    """Raised when exact enumeration would exceed the configured cap."""


class ParameterError(ValueError):
    pass


class DomainError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass
