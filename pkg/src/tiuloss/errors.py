"""Exception types shared across the package.

Each exception carries a short ``code`` string; the command line prints it
as a machine-readable prefix (``error[<code>]: ...``).
"""


class TIUError(Exception):
    code = "error"


class ValidationError(TIUError, ValueError):
    """Bad input: wrong shape, out-of-range label, malformed file or config."""

    code = "validation"


class ShapeMismatchError(ValidationError):
    code = "shape-mismatch"


class UnknownClassError(ValidationError):
    code = "unknown-class"


class UnreadableFileError(ValidationError):
    code = "unreadable"


class EmptyImageError(ValidationError):
    code = "empty-image"


class ConfigError(ValidationError):
    code = "config"


class NumericalError(TIUError, ArithmeticError):
    """Non-finite values, divergence, or a failed gradient check."""

    code = "numerical"
