"""Uniform symmetric DAC model and its infinite-level rounding counterpart."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .config import SystemConfig


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform symmetric quantizer applied per real dimension.

    ``labels[i] = alpha*delta*(i - L/2 + 1/2)`` for ``i = 0..L-1`` and
    ``thresholds[i] = delta*(i - L/2)`` for ``i = 0..L`` with the two ends
    replaced by -inf/+inf. ``sigma_nominal`` is the nominal per-antenna
    input power ``P/(xi*B)`` the labels were calibrated for.
    """

    L: int
    delta: float
    alpha: float
    sigma_nominal: float

    @property
    def labels(self) -> np.ndarray:
        i = np.arange(self.L)
        return self.alpha * self.delta * (i - self.L / 2 + 0.5)

    @property
    def thresholds(self) -> np.ndarray:
        inner = self.delta * (np.arange(1, self.L) - self.L / 2)
        return np.concatenate([[-np.inf], inner, [np.inf]])

    @property
    def clip(self) -> float:
        return self.L * self.delta / 2.0

    @property
    def midtread(self) -> bool:
        return self.L % 2 == 1

    def clip_probability(self, sigma2: float) -> float:
        """Probability that one real component of CN(0, sigma2) exceeds the clip level."""
        return float(2.0 * ndtr(-self.clip / np.sqrt(sigma2 / 2.0)))


def output_power(L: int, delta: float, alpha: float, sigma) -> np.ndarray:
    """``E|Q(z)|^2`` for ``z ~ CN(0, sigma^2)``, ``sigma`` the standard deviation."""
    sigma = np.asarray(sigma, dtype=float)
    total = np.full(sigma.shape, alpha**2 * delta**2 * (L - 1) ** 2 / 2.0)
    with np.errstate(divide="ignore"):
        inv = np.sqrt(2.0) * delta / sigma
    for i in range(1, L):
        w = i - L / 2.0
        if w == 0.0:
            continue
        total = total - 4.0 * alpha**2 * delta**2 * w * ndtr(w * inv)
    return total


def design_quantizer(cfg: SystemConfig, L: int | None = None) -> QuantizerSpec:
    """Step size from the target clipping probability, label scale from the power budget."""
    L = cfg.L if L is None else L
    sigma2 = cfg.P / (cfg.osr * cfg.B)
    a_clip = np.sqrt(sigma2 / 2.0) * (1.0 - ndtri(cfg.Pclip / 2.0))
    delta = 2.0 * a_clip / L
    if L == 2:
        alpha = np.sqrt(2.0 * sigma2 / delta**2)
    else:
        alpha = np.sqrt(sigma2 / output_power(L, delta, 1.0, np.sqrt(sigma2)))
    return QuantizerSpec(L=L, delta=float(delta), alpha=float(alpha), sigma_nominal=float(sigma2))


def _quantize_real(spec: QuantizerSpec, v: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(spec.thresholds[1:-1], v, side="right")
    return spec.labels[idx]


def quantize(spec: QuantizerSpec, v) -> np.ndarray:
    """Entrywise DAC output; cells are half-open ``[tau_i, tau_{i+1})``."""
    v = np.asarray(v)
    if np.isnan(v).any():
        raise ValueError("cannot quantize NaN input")
    re = _quantize_real(spec, v.real)
    im = _quantize_real(spec, v.imag) if np.iscomplexobj(v) else _quantize_real(spec, np.zeros_like(re))
    return re + 1j * im


def _round_real(spec: QuantizerSpec, v: np.ndarray) -> np.ndarray:
    d = spec.delta
    if spec.midtread:
        return d * np.floor(v / d + 0.5)
    return d * np.floor(v / d) + d / 2.0


def rounding_rule(spec: QuantizerSpec, v) -> np.ndarray:
    """Same step size as ``quantize/alpha`` but with infinitely many levels."""
    v = np.asarray(v)
    return _round_real(spec, v.real) + 1j * _round_real(spec, np.imag(v))
