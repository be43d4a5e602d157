"""Unitary OFDM modulation, cyclic channel and demodulation.

Grids are arrays whose second-to-last axis is the sample (time) or
subcarrier (frequency) index of length N; any leading axes are batch axes
over OFDM symbols. All transforms use the unitary 1/sqrt(N) scaling.
"""

from __future__ import annotations

import numpy as np


def dft(x: np.ndarray, axis: int = -2) -> np.ndarray:
    return np.fft.fft(x, axis=axis, norm="ortho")


def idft(x: np.ndarray, axis: int = -2) -> np.ndarray:
    return np.fft.ifft(x, axis=axis, norm="ortho")


def precode(precoders: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Frequency-domain precoded grid ``P_k s_k`` (shape ``(..., N, B)``).

    ``precoders`` is ``(N, B, U)``; ``symbols`` is ``(..., N, U)``.
    """
    if precoders.shape[0] != symbols.shape[-2] or precoders.shape[2] != symbols.shape[-1]:
        raise ValueError(
            f"precoders {precoders.shape} do not match symbol grid {symbols.shape}"
        )
    return np.einsum("kbu,...ku->...kb", precoders, symbols)


def synthesize_time_precoded(precoders: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Time-domain DAC input ``z_n = N^{-1/2} sum_k P_k s_k e^{j2pi kn/N}``."""
    return idft(precode(precoders, symbols))


def apply_channel_cyclic(
    taps: np.ndarray,
    x: np.ndarray,
    noise_psd: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """``y_n = sum_t H_t x_{(n-t) mod N} + w_n`` with ``w_n ~ CN(0, N0 I)``.

    ``taps`` is ``(T, U, B)`` and ``x`` is ``(..., N, B)``.
    """
    y = np.zeros(x.shape[:-1] + (taps.shape[1],), dtype=complex)
    for t, H in enumerate(taps):
        y += np.roll(x, t, axis=-2) @ H.T
    if noise_psd > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_psd > 0")
        scale = np.sqrt(noise_psd / 2.0)
        y += scale * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y


def demodulate(y: np.ndarray) -> np.ndarray:
    """Per-subcarrier received vectors (unitary DFT along time)."""
    return dft(y)
