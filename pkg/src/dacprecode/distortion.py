"""Bussgang gain and the DAC output/distortion covariance models.

Every covariance is stored as N blocks of B x B. In the lag domain block
``tau`` is ``E[z_n z_{n-tau}^H]``; the frequency twin is the length-N DFT
across blocks, ``C_hat_k = sum_tau C(tau) exp(-j 2 pi k tau / N)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import ndtr, owens_t

from .dac import QuantizerSpec, output_power
from .errors import DegenerateInputError, NumericRangeError

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-9
# Exponents below this contribute less than ~4e-18 relative and are skipped.
_EXP_FLOOR = -40.0
# Entries at or above this |correlation| use the unpruned double series.
_HIGH_CORR = 0.5
# Number of lag blocks processed per batch when evaluating the series.
_LAG_CHUNK = 8


@dataclass(frozen=True)
class BlockCirculantCov:
    """``N`` blocks of ``B x B`` in the ``"lag"`` or ``"frequency"`` domain."""

    domain: str
    blocks: np.ndarray

    def __post_init__(self):
        if self.domain not in ("lag", "frequency"):
            raise ValueError(f"unknown domain {self.domain!r}")
        b = self.blocks
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"blocks must have shape (N, B, B), got {b.shape}")

    @property
    def N(self) -> int:
        return self.blocks.shape[0]

    @property
    def B(self) -> int:
        return self.blocks.shape[1]

    def symmetry_error(self) -> float:
        """Relative departure from Hermitian symmetry of the full matrix."""
        b = self.blocks
        worst = 0.0
        for t in range(self.N // 2 + 1 if self.domain == "lag" else self.N):
            other = b[(self.N - t) % self.N] if self.domain == "lag" else b[t]
            worst = max(worst, float(np.max(np.abs(b[t] - np.conj(other.T)))))
        scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
        return worst / scale

    def to_frequency(self) -> "BlockCirculantCov":
        if self.domain == "frequency":
            return self
        err = self.symmetry_error()
        if err > SYMMETRY_TOL:
            raise ValueError(f"lag blocks violate Hermitian symmetry (relative error {err:.3g})")
        freq = np.fft.fft(self.blocks, axis=0)
        for k in range(self.N):
            freq[k] = 0.5 * (freq[k] + np.conj(freq[k].T))
        return BlockCirculantCov("frequency", freq)

    def to_lag(self) -> "BlockCirculantCov":
        if self.domain == "lag":
            return self
        return BlockCirculantCov("lag", np.fft.ifft(self.blocks, axis=0))

    def lag0(self) -> np.ndarray:
        if self.domain == "lag":
            return self.blocks[0]
        return self.blocks.mean(axis=0)

    def variances(self) -> np.ndarray:
        """Per-antenna power ``sigma_b^2`` (identical at every time sample)."""
        return np.real(np.diagonal(self.lag0())).copy()

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue over frequency blocks, relative to the largest trace."""
        f = self.to_frequency().blocks
        lam = np.linalg.eigvalsh(f)
        scale = max(float(np.max(np.real(np.trace(f, axis1=1, axis2=2)))), np.finfo(float).tiny)
        return float(lam.min() / scale)

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue() >= -tol


@dataclass(frozen=True)
class BussgangGain:
    """Per-antenna real gains; the full operator is ``I_N kron diag(g)``."""

    g: np.ndarray

    def matrix(self, N: int) -> np.ndarray:
        """Dense ``NB x NB`` operator, for small-N structural tests only."""
        return np.kron(np.eye(N), np.diag(self.g))


def cov_z(precoders) -> BlockCirculantCov:
    """Frequency blocks ``P_k P_k^H`` of the precoded DAC input."""
    P = getattr(precoders, "mats", precoders)
    return BlockCirculantCov("frequency", P @ np.conj(np.swapaxes(P, 1, 2)))


def _positive_sigma(cov: BlockCirculantCov) -> np.ndarray:
    s2 = cov.variances()
    bad = np.flatnonzero(~(s2 > 0))
    if bad.size:
        raise DegenerateInputError(f"antenna {int(bad[0])} carries zero power")
    return np.sqrt(s2)


def gain_from_sigma(spec: QuantizerSpec, sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    acc = np.zeros_like(sigma)
    for i in range(1, spec.L):
        acc += np.exp(-(spec.delta**2) * (i - spec.L / 2.0) ** 2 / sigma**2)
    return spec.alpha * spec.delta / np.sqrt(np.pi) * acc / sigma


def bussgang_gain(cov: BlockCirculantCov, spec: QuantizerSpec) -> BussgangGain:
    return BussgangGain(gain_from_sigma(spec, _positive_sigma(cov)))


def exact_diag_power(spec: QuantizerSpec, sigma) -> np.ndarray:
    """``E|Q(z)|^2`` for ``z ~ CN(0, sigma^2)``; ``sigma`` is a standard deviation."""
    return output_power(spec.L, spec.delta, spec.alpha, sigma)


def _symmetrize_lag(blocks: np.ndarray) -> np.ndarray:
    """In-place average of each lag pair with its Hermitian partner."""
    N = blocks.shape[0]
    for t in range(N // 2 + 1):
        avg = 0.5 * (blocks[t] + np.conj(blocks[(N - t) % N].T))
        blocks[t] = avg
        blocks[(N - t) % N] = np.conj(avg.T)
    return blocks


def arcsine_cov_x(cov: BlockCirculantCov, spec: QuantizerSpec) -> BlockCirculantCov:
    """Exact 1-bit DAC output covariance (lag domain)."""
    if spec.L != 2:
        raise ValueError(f"the arcsine law holds for L=2 only, got L={spec.L}")
    sigma = _positive_sigma(cov)
    lag = cov.to_lag().blocks
    norm = sigma[:, None] * sigma[None, :]
    rr = np.clip(lag.real / norm, -1.0, 1.0)
    ri = np.clip(lag.imag / norm, -1.0, 1.0)
    # arcsin amplifies rounding near 1 by sqrt(2/eps); the diagonal is exactly 1.
    idx = np.arange(lag.shape[1])
    rr[0, idx, idx] = 1.0
    ri[0, idx, idx] = 0.0
    re = np.arcsin(rr)
    im = np.arcsin(ri)
    scale = spec.alpha**2 * spec.delta**2 / np.pi
    return BlockCirculantCov("lag", scale * (re + 1j * im))


# --- rounding-error covariance -------------------------------------------


def _series_sign(L: int, a: int, b: int) -> float:
    return float((-1) ** (a + b)) if L % 2 else 1.0


def rounding_error_power(spec: QuantizerSpec, sigma) -> np.ndarray:
    """Exact ``E|R(z) - z|^2`` with ``R`` the infinite-level rounding rule.

    This is the infinite-series limit of the double series on the diagonal,
    where the truncated double series converges only like ``1/terms``.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    d = spec.delta
    A = (np.pi * sigma / d) ** 2
    # Terms decay like exp(-A k^2); stop once every antenna is below the floor.
    kmax = int(np.ceil(np.sqrt(-_EXP_FLOOR / max(A.min(), 1e-12)))) + 1
    kmax = min(max(kmax, 2), 200_000)
    k = np.arange(1, kmax + 1, dtype=float)
    c = (-1.0) ** k if spec.L % 2 else np.ones_like(k)
    acc = np.zeros_like(sigma)
    for start in range(0, kmax, 4096):
        kk = k[start:start + 4096]
        cc = c[start:start + 4096]
        acc += np.sum(cc / kk**2 * np.exp(-np.outer(A, kk**2)), axis=1)
    return d**2 / 6.0 + 2.0 * d**2 / np.pi**2 * acc


def _series_entries(sm, sn, sig, delta, L, terms):
    """Truncated double series for the real or imaginary part of off-diagonal entries.

    Returns ``sum_{a,b} c_ab/(ab) exp(-pi^2(a^2 sm^2 + b^2 sn^2)/delta^2) sinh(2 pi^2 ab sig/delta^2)``
    with the two exponentials combined before evaluation so nothing overflows.
    """
    out = np.zeros(sig.shape)
    if sig.size == 0:
        return out
    k2 = (np.pi / delta) ** 2
    A = k2 * sm**2
    Bq = k2 * sn**2
    R = 2.0 * k2 * sig
    rho = np.abs(sig) / (sm * sn)
    high = rho > _HIGH_CORR
    # Overflow only happens for inputs beyond Cauchy-Schwarz; it is reported below.
    with np.errstate(over="ignore", invalid="ignore"):
        for mask, prune in ((~high, True), (high, False)):
            if not mask.any():
                continue
            Am, Bm, Rm = A[mask], Bq[mask], R[mask]
            amin, bmin = Am.min(), Bm.min()
            acc = np.zeros(Am.shape)
            for a in range(1, terms + 1):
                # For |rho| <= 1/2 every exponent is at most -(a^2 A + b^2 B)/2.
                if prune and -(1.0 - _HIGH_CORR) * (a * a * amin + bmin) < _EXP_FLOOR:
                    break
                for b in range(1, terms + 1):
                    if prune and -(1.0 - _HIGH_CORR) * (a * a * amin + b * b * bmin) < _EXP_FLOOR:
                        break
                    base = -(a * a) * Am - (b * b) * Bm
                    ab = a * b
                    term = np.exp(base + ab * Rm) - np.exp(base - ab * Rm)
                    acc += (_series_sign(L, a, b) * 0.5 / ab) * term
            out[mask] = acc
    if not np.all(np.isfinite(out)):
        raise NumericRangeError("rounding series overflowed")
    return out


def _series_block(lag, sigma, spec, terms, zero_lag):
    """Series evaluation of ``C_e`` for a stack of lag blocks."""
    n, B, _ = lag.shape
    sm = np.broadcast_to(sigma[None, :, None], lag.shape)
    sn = np.broadcast_to(sigma[None, None, :], lag.shape)
    off = np.ones(lag.shape, dtype=bool)
    if zero_lag is not None:
        off[zero_lag, np.arange(B), np.arange(B)] = False
    re = np.zeros(lag.shape)
    im = np.zeros(lag.shape)
    for part, sink in ((lag.real, re), (lag.imag, im)):
        sel = off & (part != 0.0)
        sink[sel] = _series_entries(sm[sel], sn[sel], part[sel], spec.delta, spec.L, terms)
    scale = 2.0 * spec.delta**2 / np.pi**2
    out = scale * (re + 1j * im)
    if zero_lag is not None:
        out[zero_lag, np.arange(B), np.arange(B)] = rounding_error_power(spec, sigma)
    return out


# Cell-sum evaluation, used when delta is large compared with sigma. The
# rounding rule is written as R(x) = r0 + delta * sum_i h_i(x) where
# h_i(x) = 1{x >= t_i} for t_i > 0 and -1{x < t_i} for t_i <= 0.


def _bvn_lower(h, k, rho):
    """``P(X < h, Y < k)`` for standard bivariate normal with correlation ``rho``."""
    h, k, rho = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float), np.asarray(rho, float))
    rho = np.clip(rho, -1.0 + 1e-15, 1.0 - 1e-15)
    s = np.sqrt(1.0 - rho**2)
    out = np.empty(h.shape)
    both0 = (h == 0) & (k == 0)
    out[both0] = 0.25 + np.arcsin(rho[both0]) / (2.0 * np.pi)
    rest = ~both0
    h, k, rho, s = h[rest], k[rest], rho[rest], s[rest]
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = np.where(h == 0, np.copysign(np.inf, k - rho * h), (k - rho * h) / (h * s))
        ak = np.where(k == 0, np.copysign(np.inf, h - rho * k), (h - rho * k) / (k * s))
    beta = np.where((h * k > 0) | ((h * k == 0) & (h + k >= 0)), 0.0, 0.5)
    out[rest] = 0.5 * (ndtr(h) + ndtr(k)) - owens_t(h, ah) - owens_t(k, ak) - beta
    return np.clip(out, 0.0, 1.0)


def _cell_thresholds(spec: QuantizerSpec, reach: float) -> np.ndarray:
    d = spec.delta
    n = int(np.ceil(reach / d)) + 1
    i = np.arange(-n, n + 1)
    t = (i + 0.5) * d if spec.midtread else i * d
    return t[np.abs(t) <= reach + d]


def _h_mean(t, sx):
    """``E h_t(X)`` for ``X ~ N(0, sx^2)``."""
    return np.where(t > 0, ndtr(-t / sx), -ndtr(t / sx))


def _h_joint(ti, tj, sx, sy, rho):
    """``E[h_ti(X) h_tj(Y)]`` evaluated through tail probabilities."""
    hi = ti / sx
    hj = tj / sy
    pi_pos = ti > 0
    pj_pos = tj > 0
    # Upper tails use the reflected arguments so small probabilities stay accurate.
    p = np.where(
        pi_pos & pj_pos, _bvn_lower(-hi, -hj, rho),
        np.where(
            pi_pos & ~pj_pos, _bvn_lower(-hi, hj, -rho),
            np.where(~pi_pos & pj_pos, _bvn_lower(hi, -hj, -rho), _bvn_lower(hi, hj, rho)),
        ),
    )
    sign = np.where(pi_pos == pj_pos, 1.0, -1.0)
    return sign * p


def _real_error_cov_cells(vx, vy, c, spec: QuantizerSpec):
    """``E[e(X) e(Y)]`` with ``e = R(x) - x`` for zero-mean jointly Gaussian ``X, Y``."""
    sx, sy = np.sqrt(vx), np.sqrt(vy)
    rho = c / (sx * sy)
    d = spec.delta
    r0 = 0.0 if spec.midtread else d / 2.0
    t = _cell_thresholds(spec, 12.0 * max(float(sx.max()), float(sy.max())))
    mx = sum(_h_mean(ti, sx) for ti in t)
    my = sum(_h_mean(ti, sy) for ti in t)
    joint = np.zeros(np.shape(c))
    for ti in t:
        for tj in t:
            joint += _h_joint(ti, tj, sx, sy, rho)
    err = r0**2 + r0 * d * (mx + my) + d**2 * joint
    # E[h_t(X) Y] = (c / sx) phi(t / sx) for both threshold types.
    phi = lambda u: np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)  # noqa: E731
    ry = sum(phi(ti / sx) for ti in t) * d * c / sx
    rx = sum(phi(ti / sy) for ti in t) * d * c / sy
    return err - ry - rx + c


def _cells_block(lag, sigma, spec, zero_lag):
    B = lag.shape[1]
    sm = np.broadcast_to(sigma[None, :, None], lag.shape).ravel()
    sn = np.broadcast_to(sigma[None, None, :], lag.shape).ravel()
    vx, vy = sm**2 / 2.0, sn**2 / 2.0
    re = _real_error_cov_cells(vx, vy, lag.real.ravel() / 2.0, spec)
    im = _real_error_cov_cells(vx, vy, lag.imag.ravel() / 2.0, spec)
    out = (2.0 * (re + 1j * im)).reshape(lag.shape)
    if zero_lag is not None:
        out[zero_lag, np.arange(B), np.arange(B)] = rounding_error_power(spec, sigma)
    return out


CELLS_RATIO = 6.0


def _resolve_method(method, spec, sigma):
    if method not in ("auto", "series", "cells"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        return "cells" if spec.delta >= CELLS_RATIO * sigma.max() else "series"
    return method


def _error_blocks(lag, sigma, spec, terms, method):
    """Full lag stack of ``C_e``; only lags 0..N//2 are evaluated."""
    N = lag.shape[0]
    half = N // 2 + 1
    out = np.empty(lag.shape, dtype=complex)
    for start in range(0, half, _LAG_CHUNK):
        stop = min(start + _LAG_CHUNK, half)
        zero = 0 if start == 0 else None
        if method == "series":
            out[start:stop] = _series_block(lag[start:stop], sigma, spec, terms, zero)
        else:
            out[start:stop] = _cells_block(lag[start:stop], sigma, spec, zero)
    for tau in range(half, N):
        out[tau] = np.conj(out[N - tau].T)
    return _symmetrize_lag(out)


def rounding_cov_e(
    cov: BlockCirculantCov,
    spec: QuantizerSpec,
    terms: int = 30,
    method: str = "auto",
) -> BlockCirculantCov:
    """Covariance of the rounding error ``R(z) - z`` (lag domain).

    ``method="series"`` sums the ``terms x terms`` double series off the
    diagonal; ``"cells"`` evaluates the same expectation as a finite sum of
    bivariate normal cell probabilities, which is cheaper and more accurate
    once ``delta`` is several times the largest input deviation. ``"auto"``
    picks cells when ``delta >= 6 * max(sigma)``. Diagonal zero-lag entries
    always use the exact series limit.
    """
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    sigma = _positive_sigma(cov)
    method = _resolve_method(method, spec, sigma)
    return BlockCirculantCov("lag", _error_blocks(cov.to_lag().blocks, sigma, spec, terms, method))


def truncation_gap(cov: BlockCirculantCov, spec: QuantizerSpec, terms: int = 30) -> float:
    """Largest entry change between ``terms`` and ``2*terms`` series terms, in units of delta^2."""
    a = rounding_cov_e(cov, spec, terms, method="series").blocks
    b = rounding_cov_e(cov, spec, 2 * terms, method="series").blocks
    return float(np.max(np.abs(a - b)) / spec.delta**2)


def _rounding_blocks(cov, spec, gain, terms, method, subtract_linear):
    """``alpha^2 (C_e - C_z) + alpha (G C_z + C_z G)``, optionally minus ``G C_z G``.

    Combined block by block in place to keep the peak memory at a few stacks.
    """
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    sigma = _positive_sigma(cov)
    g = (bussgang_gain(cov, spec) if gain is None else gain).g
    method = _resolve_method(method, spec, sigma)
    lag_z = cov.to_lag().blocks
    out = _error_blocks(lag_z, sigma, spec, terms, method)
    a = spec.alpha
    weight = a * (g[:, None] + g[None, :]) - a**2
    if subtract_linear:
        weight = weight - g[:, None] * g[None, :]
    for tau in range(out.shape[0]):
        out[tau] *= a**2
        out[tau] += weight * lag_z[tau]
    return _symmetrize_lag(out)


def rounding_cov_x(
    cov: BlockCirculantCov,
    spec: QuantizerSpec,
    gain: BussgangGain | None = None,
    terms: int = 30,
    method: str = "auto",
) -> BlockCirculantCov:
    """Rounding approximation of the DAC output covariance (lag domain)."""
    return BlockCirculantCov("lag", _rounding_blocks(cov, spec, gain, terms, method, False))


def rounding_cov_d(
    cov: BlockCirculantCov,
    spec: QuantizerSpec,
    gain: BussgangGain | None = None,
    terms: int = 30,
    method: str = "auto",
) -> BlockCirculantCov:
    """Rounding approximation of the distortion covariance ``C_x - G C_z G`` (lag domain)."""
    return BlockCirculantCov("lag", _rounding_blocks(cov, spec, gain, terms, method, True))


def diagonal_power(cov: BlockCirculantCov, spec: QuantizerSpec, gain: BussgangGain | None = None) -> np.ndarray:
    """Per-antenna distortion power ``E|x_b|^2 - g_b^2 sigma_b^2`` (exact)."""
    sigma = _positive_sigma(cov)
    g = gain_from_sigma(spec, sigma) if gain is None else gain.g
    return exact_diag_power(spec, sigma) - g**2 * sigma**2


def diagonal_cov_d(cov: BlockCirculantCov, spec: QuantizerSpec, gain: BussgangGain | None = None) -> BlockCirculantCov:
    """Spatially and temporally white distortion model (lag domain, lag 0 only)."""
    blocks = np.zeros((cov.N, cov.B, cov.B), dtype=complex)
    blocks[0] = np.diag(diagonal_power(cov, spec, gain))
    return BlockCirculantCov("lag", blocks)


# --- quadrature oracle ------------------------------------------------------


def _real_output_cov_quad(vx, vy, c, spec: QuantizerSpec, tol: float):
    """``E[q(X) q(Y)]`` by adaptive quadrature over ``X``.

    The conditional law of ``Y`` given ``X`` is Gaussian, so the inner
    integral over each cell is an exact difference of normal CDFs.
    """
    labels = spec.labels
    inner = spec.thresholds[1:-1]
    sx = np.sqrt(vx)
    slope = c / vx if vx > 0 else 0.0
    s2 = max(vy - c * slope, 0.0)
    s = np.sqrt(s2)
    cuts = list(inner)
    if s <= 1e-12 * np.sqrt(vy) and slope != 0.0:
        s = 0.0
        cuts += list(inner / slope)

    def cond_mean(x):
        mu = slope * x
        if s == 0.0:
            return labels[np.searchsorted(inner, mu, side="right")]
        cdf = ndtr((inner - mu) / s)
        probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
        return float(probs @ labels)

    def qx(x):
        return labels[np.searchsorted(inner, x, side="right")]

    def f(x):
        return qx(x) * cond_mean(x) * np.exp(-0.5 * x * x / vx) / (sx * np.sqrt(2.0 * np.pi))

    edges = [-np.inf] + sorted(set(float(v) for v in cuts)) + [np.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(f, lo, hi, epsabs=tol / 10, epsrel=1e-12, limit=200)
        if not np.isfinite(val) or err > tol:
            raise ArithmeticError(f"quadrature did not converge on [{lo}, {hi}] (error {err:.3g})")
        total += val
    return total


def oracle_cov_x_entry(sigma_m, sigma_n, sigma_re, sigma_im, spec: QuantizerSpec, tol: float = 1e-8) -> complex:
    """Ground-truth ``E[x_m x_n^*]`` by numerical integration (test use only).

    ``sigma_m, sigma_n`` are standard deviations of the complex inputs and
    ``sigma_re + j sigma_im`` their cross-covariance.
    """
    if abs(complex(sigma_re, sigma_im)) > sigma_m * sigma_n * (1 + 1e-12):
        raise ValueError("cross-covariance exceeds the Cauchy-Schwarz bound")
    vx, vy = sigma_m**2 / 2.0, sigma_n**2 / 2.0
    rr = _real_output_cov_quad(vx, vy, sigma_re / 2.0, spec, tol)
    ir = _real_output_cov_quad(vx, vy, sigma_im / 2.0, spec, tol)
    return complex(2.0 * rr, 2.0 * ir)


# --- binary dump --------------------------------------------------------------
# Same layout as channel dumps: four little-endian int64 header words
# (B, B, N, domain code 0=lag/1=frequency) then the blocks as <c16 in C order.


def dump(cov: BlockCirculantCov, path) -> None:
    code = 0 if cov.domain == "lag" else 1
    with open(path, "wb") as fh:
        fh.write(np.array([cov.B, cov.B, cov.N, code], dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(cov.blocks, dtype="<c16").tobytes())


def load(path) -> BlockCirculantCov:
    raw = Path(path).read_bytes()
    B, B2, N, code = (int(v) for v in np.frombuffer(raw[:32], dtype="<i8"))
    body = np.frombuffer(raw[32:], dtype="<c16")
    if B != B2 or body.size != N * B * B or code not in (0, 1):
        raise ValueError(f"{path}: malformed covariance dump")
    return BlockCirculantCov("lag" if code == 0 else "frequency", body.reshape(N, B, B).copy())
