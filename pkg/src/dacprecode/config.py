"""System parameters, validation, presets and the subcarrier layout."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

PRECODERS = ("MRT", "ZF")


def subcarrier_map(N: int, S: int) -> np.ndarray:
    """Occupied subcarrier indices around DC (DC itself is never used).

    The first ``ceil(S/2)`` bins above DC and the ``floor(S/2)`` bins below
    it (i.e. the top of the FFT range) are occupied.
    """
    if N < 2:
        raise ConfigError("N", f"DFT size must be at least 2, got {N}")
    if S < 1:
        raise ConfigError("S", f"need at least one occupied subcarrier, got {S}")
    if S >= N:
        raise ConfigError("S", f"S={S} leaves no room for the DC guard (N={N})")
    upper = (S + 1) // 2
    lower = S // 2
    return np.concatenate([np.arange(1, upper + 1), np.arange(N - lower, N)]).astype(int)


@dataclass(frozen=True)
class SystemConfig:
    """All scalar parameters of one simulated downlink.

    ``L`` is the number of DAC levels per real dimension. ``P`` and ``N0``
    are linear; the SNR ``P/N0`` is always derived.
    """

    B: int = 32
    U: int = 4
    N: int = 256
    S: int = 76
    T: int = 4
    L: int = 2
    P: float = 1.0
    N0: float = 1.0
    eps: float = 0.0
    Pclip: float = 1e-3
    precoder: str = "ZF"
    seed: int = 0

    def __post_init__(self):
        for name in ("B", "U", "N", "S", "T", "L", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(name, f"must be an integer, got {value!r}")
        if self.B < 1:
            raise ConfigError("B", "antenna count must be positive")
        if self.U < 1:
            raise ConfigError("U", "user count must be positive")
        if self.U > self.B:
            raise ConfigError("U", f"U={self.U} exceeds B={self.B}")
        if not 1 <= self.T <= self.N:
            raise ConfigError("T", f"tap count must lie in [1, N], got {self.T}")
        subcarrier_map(self.N, self.S)
        if self.L < 2:
            raise ConfigError("L", f"need at least two DAC levels, got {self.L}")
        if not (math.isfinite(self.P) and self.P > 0):
            raise ConfigError("P", f"transmit power must be positive, got {self.P}")
        if not (math.isfinite(self.N0) and self.N0 >= 0):
            raise ConfigError("N0", f"noise PSD must be non-negative, got {self.N0}")
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError("eps", f"CSI error must lie in [0, 1], got {self.eps}")
        if not 0.0 < self.Pclip < 1.0:
            raise ConfigError("Pclip", f"clipping probability must lie in (0, 1), got {self.Pclip}")
        if self.precoder not in PRECODERS:
            raise ConfigError("precoder", f"expected one of {PRECODERS}, got {self.precoder!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "seed must fit in 64 unsigned bits")

    @property
    def osr(self) -> float:
        return self.N / self.S

    @property
    def snr(self) -> float:
        return math.inf if self.N0 == 0 else self.P / self.N0

    @property
    def bits(self) -> float:
        return math.log2(self.L)

    @property
    def occupied(self) -> np.ndarray:
        return subcarrier_map(self.N, self.S)

    @property
    def guard(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        mask[self.occupied] = False
        return np.flatnonzero(mask)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        return self.replace(N0=self.P / 10.0 ** (snr_db / 10.0))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            field = sorted(unknown)[0]
            raise ConfigError(field, "unknown configuration field")
        return cls(**data)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", "top-level JSON value must be an object")
        return cls.from_dict(data)


_PRESETS = {
    "lte5": dict(B=128, U=16, N=1024, S=300, T=4, Pclip=1e-3),
    # Same B/U ratio and roughly the same OSR, small enough for CI.
    "desk": dict(B=32, U=4, N=256, S=76, T=4, Pclip=1e-3),
}


def preset(name: str, **overrides) -> SystemConfig:
    """Named parameter set: ``"lte5"`` (full scale) or ``"desk"``."""
    try:
        base = _PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None
    return SystemConfig(**{**base, **overrides})


def preset_names():
    return sorted(_PRESETS)
