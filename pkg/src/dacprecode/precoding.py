"""Per-subcarrier MRT and ZF precoders with total-power normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import SingularChannelError

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class PrecoderSet:
    """Matrices ``mats`` of shape ``(N, B, U)``, zero on guard subcarriers."""

    mats: np.ndarray
    beta: float
    kind: str

    def power(self) -> float:
        """``sum_k tr(P_k P_k^H)``; equals ``P*S`` by construction."""
        return float(np.sum(np.abs(self.mats) ** 2))


def mrt(est_freq: np.ndarray, cfg: SystemConfig) -> PrecoderSet:
    occ = cfg.occupied
    H = est_freq[occ]
    energy = float(np.sum(np.abs(H) ** 2))
    if energy == 0.0:
        raise SingularChannelError("all-zero channel estimate; MRT normalization undefined")
    beta = np.sqrt(energy / (cfg.P * cfg.S * cfg.B**2))
    mats = np.zeros((cfg.N, cfg.B, cfg.U), dtype=complex)
    mats[occ] = np.conj(np.swapaxes(H, 1, 2)) / (beta * cfg.B)
    return PrecoderSet(mats, float(beta), "MRT")


def zf(est_freq: np.ndarray, cfg: SystemConfig) -> PrecoderSet:
    occ = cfg.occupied
    H = est_freq[occ]
    Hh = np.conj(np.swapaxes(H, 1, 2))
    gram = H @ Hh
    # Hermitian eigendecomposition doubles as the conditioning check.
    lam, V = np.linalg.eigh(gram)
    if np.any(lam[:, 0] <= lam[:, -1] / MAX_CONDITION):
        worst = int(occ[np.argmin(lam[:, 0] / lam[:, -1])])
        raise SingularChannelError(f"Gram matrix of subcarrier {worst} is numerically singular")
    inv = (V / lam[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))
    beta = np.sqrt(np.sum(1.0 / lam) / (cfg.P * cfg.S))
    mats = np.zeros((cfg.N, cfg.B, cfg.U), dtype=complex)
    mats[occ] = Hh @ inv / beta
    return PrecoderSet(mats, float(beta), "ZF")


def build_precoder(est_freq: np.ndarray, cfg: SystemConfig) -> PrecoderSet:
    return zf(est_freq, cfg) if cfg.precoder == "ZF" else mrt(est_freq, cfg)
