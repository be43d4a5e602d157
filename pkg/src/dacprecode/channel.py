"""Frequency-selective Rayleigh channels and noisy CSI estimates."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SystemConfig


@dataclass(frozen=True)
class ChannelRealization:
    """Time-domain taps and per-subcarrier responses, true and estimated.

    Shapes: ``taps``/``est_taps`` are ``(T, U, B)``; ``freq``/``est_freq``
    are ``(N, U, B)``.
    """

    taps: np.ndarray
    freq: np.ndarray
    est_taps: np.ndarray
    est_freq: np.ndarray

    @property
    def shape(self):
        T, U, B = self.taps.shape
        return B, U, self.freq.shape[0], T


def taps_to_freq(taps: np.ndarray, N: int) -> np.ndarray:
    """All N subcarrier responses ``sum_t H_t exp(-j 2 pi k t / N)``."""
    return np.fft.fft(taps, n=N, axis=0)


def freq_response(taps: np.ndarray, k: int, N: int) -> np.ndarray:
    """Response of subcarrier ``k`` evaluated directly from the taps."""
    if not 0 <= k < N:
        raise IndexError(f"subcarrier {k} outside [0, {N})")
    t = np.arange(taps.shape[0])
    phases = np.exp(-2j * np.pi * k * t / N)
    return np.tensordot(phases, taps, axes=(0, 0))


def _cn(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def corrupt_csi(taps: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """``sqrt(1-eps) H_t + sqrt(eps) E_t`` with error entries of variance 1/T."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if eps == 0.0:
        return taps.copy()
    T = taps.shape[0]
    err = _cn(rng, taps.shape, 1.0 / T)
    return np.sqrt(1.0 - eps) * taps + np.sqrt(eps) * err


def draw_channel(
    cfg: SystemConfig,
    rng: np.random.Generator,
    csi_rng: np.random.Generator | None = None,
) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1/T) taps plus the BS-side estimate.

    ``csi_rng`` feeds the estimation error; it defaults to ``rng``. Keeping
    it separate lets sweeps over ``eps`` reuse the same true channel.
    """
    taps = _cn(rng, (cfg.T, cfg.U, cfg.B), 1.0 / cfg.T)
    est_taps = corrupt_csi(taps, cfg.eps, rng if csi_rng is None else csi_rng)
    freq = taps_to_freq(taps, cfg.N)
    est_freq = freq if cfg.eps == 0.0 else taps_to_freq(est_taps, cfg.N)
    return ChannelRealization(taps, freq, est_taps, est_freq)


def from_taps(taps: np.ndarray, N: int, est_taps: np.ndarray | None = None) -> ChannelRealization:
    taps = np.asarray(taps, dtype=complex)
    est = taps if est_taps is None else np.asarray(est_taps, dtype=complex)
    freq = taps_to_freq(taps, N)
    est_freq = freq if est_taps is None else taps_to_freq(est, N)
    return ChannelRealization(taps, freq, est, est_freq)


# Binary dump: four little-endian int64 header words (B, U, N, T) followed by
# the true and the estimated taps as interleaved re/im little-endian float64,
# each in (T, U, B) C order.

def _write_complex(fh, arr):
    fh.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())


def dump(chan: ChannelRealization, path) -> None:
    B, U, N, T = chan.shape
    with open(path, "wb") as fh:
        fh.write(np.array([B, U, N, T], dtype="<i8").tobytes())
        _write_complex(fh, chan.taps)
        _write_complex(fh, chan.est_taps)


def load(path) -> ChannelRealization:
    raw = Path(path).read_bytes()
    B, U, N, T = (int(v) for v in np.frombuffer(raw[:32], dtype="<i8"))
    count = T * U * B
    body = np.frombuffer(raw[32:], dtype="<c16")
    if body.size != 2 * count:
        raise ValueError(f"{path}: expected {2 * count} complex values, found {body.size}")
    taps = body[:count].reshape(T, U, B).copy()
    est = body[count:].reshape(T, U, B).copy()
    same = np.array_equal(taps, est)
    return from_taps(taps, N, None if same else est)
