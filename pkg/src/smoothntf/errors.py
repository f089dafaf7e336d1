"""Exception types shared across the package."""


class TensorFormatError(ValueError):
    """Raised when a tensor or image file cannot be parsed.

    Carries the byte offset at which parsing failed so that truncated or
    corrupt files can be located precisely.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedOperationError(ValueError):
    """Raised when an operation is requested outside its supported domain,
    e.g. a quadratic-form gradient of a non-quadratic seminorm, or a solver
    invoked with exponents other than d = p = 2.
    """
