"""SINDR, sum-rate lower bound, uncoded QPSK BER and power spectral densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class SindrGrid:
    """Per-(u, k) SINDR terms on the occupied subcarriers.

    Arrays have shape ``(S, U)`` in the order of ``occupied``.
    """

    occupied: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    distortion: np.ndarray
    noise: float

    @property
    def gamma(self) -> np.ndarray:
        denom = self.interference + self.distortion + self.noise
        with np.errstate(divide="ignore", invalid="ignore"):
            g = self.signal / denom
        return np.where(denom > 0, g, np.inf)

    def with_noise(self, N0: float) -> "SindrGrid":
        return SindrGrid(self.occupied, self.signal, self.interference, self.distortion, float(N0))


def effective_gains(freq: np.ndarray, precoders: np.ndarray, g: np.ndarray, occupied: np.ndarray) -> np.ndarray:
    """``H_k diag(g) P_k`` on the occupied subcarriers, shape ``(S, U, U)``."""
    return freq[occupied] @ (g[:, None] * precoders[occupied])


def sindr(freq, precoders, gain, cov_d_freq, N0, occupied) -> SindrGrid:
    """SINDR evaluated with the true channel ``freq`` (shape ``(N, U, B)``).

    ``cov_d_freq`` holds the frequency-domain distortion blocks ``(N, B, B)``
    or ``None`` for a distortion-free transmitter.
    """
    P = getattr(precoders, "mats", precoders)
    g = np.broadcast_to(np.asarray(getattr(gain, "g", gain), dtype=float), (P.shape[1],))
    if freq.shape[0] != P.shape[0] or freq.shape[2] != P.shape[1]:
        raise ValueError(f"channel {freq.shape} does not match precoders {P.shape}")
    occupied = np.asarray(occupied)
    E = effective_gains(freq, P, g, occupied)
    power = np.abs(E) ** 2
    signal = np.diagonal(power, axis1=1, axis2=2).copy()
    interference = power.sum(axis=2) - signal
    interference = np.maximum(interference, 0.0)
    if cov_d_freq is None:
        dist = np.zeros_like(signal)
    else:
        blocks = getattr(cov_d_freq, "blocks", cov_d_freq)
        if blocks.shape[0] != freq.shape[0] or blocks.shape[1] != freq.shape[2]:
            raise ValueError(f"distortion blocks {blocks.shape} do not match channel {freq.shape}")
        H = freq[occupied]
        Ck = blocks[occupied] if blocks.shape[0] == freq.shape[0] else blocks
        dist = np.real(np.einsum("kub,kbc,kuc->ku", H, Ck, np.conj(H)))
        dist = np.maximum(dist, 0.0)
    return SindrGrid(occupied, signal, interference, dist, float(N0))


def _gammas(samples) -> list:
    if isinstance(samples, SindrGrid):
        samples = [samples]
    out = [s.gamma if isinstance(s, SindrGrid) else np.asarray(s, dtype=float) for s in samples]
    if not out:
        raise ValueError("no SINDR samples given")
    return out


def sum_rate(samples) -> float:
    """``(1/S) sum_u sum_k log2(1 + gamma)`` averaged over realizations."""
    return float(np.mean([np.sum(np.log2(1.0 + g)) / g.shape[0] for g in _gammas(samples)]))


def uncoded_ber_qpsk(samples) -> float:
    """Approximate Gray-mapped QPSK BER ``1 - mean Phi(sqrt(gamma))``."""
    return float(np.mean([np.mean(ndtr(-np.sqrt(g))) for g in _gammas(samples)]))


def _normalize(spectrum: np.ndarray, occupied) -> np.ndarray:
    peak = spectrum[np.asarray(occupied)].max()
    if not peak > 0:
        raise ValueError("in-band spectrum is identically zero")
    return spectrum / peak


def psd_analytic(cov_x_freq, occupied, freq=None, side: str = "transmit", normalize: bool = True) -> np.ndarray:
    """Per-bin PSD from the frequency-domain output covariance.

    ``transmit``: ``tr(C_k)/B``. ``receive``: ``tr(H_k C_k H_k^H)/U``
    without the noise floor.
    """
    C = getattr(cov_x_freq, "blocks", cov_x_freq)
    if side == "transmit":
        s = np.real(np.trace(C, axis1=1, axis2=2)) / C.shape[1]
    elif side == "receive":
        if freq is None:
            raise ValueError("receive PSD needs the channel")
        s = np.real(np.einsum("kub,kbc,kuc->k", freq, C, np.conj(freq))) / freq.shape[1]
    else:
        raise ValueError(f"side must be 'transmit' or 'receive', got {side!r}")
    return _normalize(s, occupied) if normalize else s


def psd_empirical(time_grids, occupied, normalize: bool = True) -> np.ndarray:
    """Averaged periodogram ``|DFT|^2`` of grids shaped ``(..., N, antennas)``."""
    x = np.asarray(time_grids)
    if x.ndim < 2:
        raise ValueError("need at least one OFDM symbol of samples")
    spec = np.abs(np.fft.fft(x, axis=-2, norm="ortho")) ** 2
    s = spec.reshape(-1, x.shape[-2], x.shape[-1]).mean(axis=(0, 2))
    return _normalize(s, occupied) if normalize else s
