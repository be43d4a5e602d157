"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent system parameter.

    ``field`` names the offending parameter so the CLI can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class SingularChannelError(ArithmeticError):
    """Channel Gram matrix too ill-conditioned for zero-forcing."""


class DegenerateInputError(ValueError):
    """Quantizer input with zero power on some antenna."""


class NumericRangeError(ArithmeticError):
    """Distortion series left the representable floating-point range."""
