"""Linear-precoded massive MU-MIMO-OFDM downlink with finite-resolution DACs."""

from .config import SystemConfig, preset
from .errors import ConfigError, DegenerateInputError, NumericRangeError, SingularChannelError

__all__ = [
    "SystemConfig",
    "preset",
    "ConfigError",
    "DegenerateInputError",
    "NumericRangeError",
    "SingularChannelError",
]
__version__ = "0.1.0"
