"""End-to-end simulation and analytic sweeps.

Each trial ``t`` owns independent counter-based streams derived from
``SeedSequence(seed, spawn_key=(t, stream))`` so results never depend on
how trials are distributed over worker processes. Stream 0 draws the
channel, stream 1 the CSI error and stream 2 the symbols and noise; sweeping
a parameter therefore reuses the same channels and common random numbers.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import distortion as dist
from .channel import ChannelRealization, draw_channel
from .config import SystemConfig
from .dac import QuantizerSpec, design_quantizer, quantize
from .errors import SingularChannelError
from .metrics import effective_gains, psd_analytic, psd_empirical, sindr, sum_rate, uncoded_ber_qpsk
from .ofdm import apply_channel_cyclic, demodulate, synthesize_time_precoded
from .precoding import PrecoderSet, build_precoder

log = logging.getLogger(__name__)

AXES = ("snr", "bits", "eps", "osr")
MODELS = ("rounding", "diagonal", "arcsine", "infinite")
WORKERS_ENV = "DACPRECODE_WORKERS"
MAX_RETRIES = 20

_CHANNEL, _CSI, _SYMBOLS = 0, 1, 2


def stream(seed: int, trial: int, kind: int, attempt: int = 0) -> np.random.Generator:
    key = (trial, kind) if attempt == 0 else (trial, kind, attempt)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class TrialResult:
    """Bit error tallies of one channel realization; ``tallies`` is ``(S, U)``."""

    bit_errors: int
    bits: int
    tallies: np.ndarray
    time_grids: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.bit_errors > self.bits or int(self.tallies.sum()) != self.bit_errors:
            raise ValueError("inconsistent tallies")


def setup_trial(cfg: SystemConfig, trial: int) -> tuple[ChannelRealization, PrecoderSet]:
    """Channel and precoder of trial ``trial``; singular ZF channels are redrawn."""
    for attempt in range(MAX_RETRIES + 1):
        chan = draw_channel(cfg, stream(cfg.seed, trial, _CHANNEL, attempt), stream(cfg.seed, trial, _CSI, attempt))
        try:
            return chan, build_precoder(chan.est_freq, cfg)
        except SingularChannelError as exc:
            log.warning("trial %d attempt %d: %s; redrawing channel", trial, attempt, exc)
    raise SingularChannelError(f"trial {trial}: no usable channel after {MAX_RETRIES} retries")


# --- analytic path ------------------------------------------------------------


def analytic_grids(cfg: SystemConfig, chan, prec, spec: QuantizerSpec | None, models) -> dict:
    """SindrGrid per model for one realization (noise set to ``cfg.N0``)."""
    out = {}
    occ = cfg.occupied
    if "infinite" in models:
        out["infinite"] = sindr(chan.freq, prec, np.ones(cfg.B), None, cfg.N0, occ)
    quantized = [m for m in models if m != "infinite"]
    if not quantized:
        return out
    cz = dist.cov_z(prec)
    gain = dist.bussgang_gain(cz, spec)
    for m in quantized:
        if m == "rounding":
            cd = dist.rounding_cov_d(cz, spec, gain).to_frequency().blocks
        elif m == "diagonal":
            cd = np.broadcast_to(np.diag(dist.diagonal_power(cz, spec, gain)).astype(complex), (cfg.N, cfg.B, cfg.B))
        elif m == "arcsine":
            if spec.L != 2:
                continue
            cx = dist.arcsine_cov_x(cz, spec).blocks
            g = gain.g
            cx -= (g[:, None] * g[None, :]) * cz.to_lag().blocks
            cd = dist.BlockCirculantCov("lag", cx).to_frequency().blocks
        else:
            raise ValueError(f"unknown model {m!r}")
        out[m] = sindr(chan.freq, prec, gain, cd, cfg.N0, occ)
    return out


def output_cov_freq(cfg: SystemConfig, prec, spec: QuantizerSpec | None, model: str = "rounding") -> np.ndarray:
    """Frequency blocks of the DAC output covariance under ``model``."""
    cz = dist.cov_z(prec)
    if model == "infinite" or spec is None:
        return cz.blocks
    if model == "rounding":
        return dist.rounding_cov_x(cz, spec).to_frequency().blocks
    if model == "arcsine":
        return dist.arcsine_cov_x(cz, spec).to_frequency().blocks
    if model == "diagonal":
        gain = dist.bussgang_gain(cz, spec)
        g = gain.g
        lin = (g[:, None] * g[None, :]) * cz.blocks
        return lin + np.diag(dist.diagonal_power(cz, spec, gain))[None]
    raise ValueError(f"unknown model {model!r}")


# --- empirical path -----------------------------------------------------------


def qpsk_bits(rng: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
    """Gray-mapped unit-energy QPSK: bit 0 on the real, bit 1 on the imaginary part."""
    bits = rng.integers(0, 2, size=shape + (2,), dtype=np.int8)
    sym = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2.0)
    return bits, sym


def detect_qpsk(y: np.ndarray) -> np.ndarray:
    """Nearest-neighbour QPSK decision, i.e. the sign of each real dimension."""
    return np.stack([(y.real < 0), (y.imag < 0)], axis=-1).astype(np.int8)


def simulate_realization(
    cfg: SystemConfig,
    chan: ChannelRealization,
    prec: PrecoderSet,
    spec: QuantizerSpec | None,
    rng: np.random.Generator,
    n_symbols: int,
    noise_psds,
    gain=None,
    capture: bool = False,
) -> list[TrialResult]:
    """Transmit ``n_symbols`` OFDM symbols and tally errors for every noise level.

    The noiseless received grid is shared across noise levels and the same
    unit-variance noise draw is rescaled for each. Noise is added after the
    unitary DFT, which leaves its white CN(0, N0) law unchanged.
    """
    occ = cfg.occupied
    S, U = occ.size, cfg.U
    bits, sym = qpsk_bits(rng, (n_symbols, S, U))
    grid = np.zeros((n_symbols, cfg.N, U), dtype=complex)
    grid[:, occ] = sym
    z = synthesize_time_precoded(prec.mats, grid)
    x = z if spec is None else quantize(spec, z)
    y = demodulate(apply_channel_cyclic(chan.taps, x))[:, occ]
    w = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) / np.sqrt(2.0)
    if gain is None:
        gain = np.ones(cfg.B) if spec is None else dist.bussgang_gain(dist.cov_z(prec), spec).g
    # Undo the phase of the effective per-user gain before the sign decision.
    eff = np.diagonal(effective_gains(chan.freq, prec.mats, np.asarray(gain), occ), axis1=1, axis2=2)
    rot = np.conj(eff) / np.maximum(np.abs(eff), np.finfo(float).tiny)
    results = []
    for n0 in noise_psds:
        r = (y + np.sqrt(n0) * w) * rot
        err = (detect_qpsk(r) != bits).sum(axis=(0, 3))
        results.append(TrialResult(int(err.sum()), int(bits.size), err, x if capture else None))
    return results


def run_trial(cfg: SystemConfig, trial: int = 0, n_symbols: int = 10, quantized: bool = True) -> TrialResult:
    """One channel realization with ``n_symbols`` OFDM symbols at ``cfg.N0``."""
    chan, prec = setup_trial(cfg, trial)
    spec = design_quantizer(cfg) if quantized else None
    rng = stream(cfg.seed, trial, _SYMBOLS)
    return simulate_realization(cfg, chan, prec, spec, rng, n_symbols, [cfg.N0])[0]


# --- sweeps ---------------------------------------------------------------------


def config_for(cfg: SystemConfig, axis: str, value: float) -> SystemConfig:
    if axis == "snr":
        return cfg.with_snr_db(float(value))
    if axis == "bits":
        b = int(value)
        if b != value or b < 1:
            raise ValueError(f"bits must be a positive integer, got {value}")
        return cfg.replace(L=2**b)
    if axis == "eps":
        return cfg.replace(eps=float(value))
    if axis == "osr":
        if not value >= 1:
            raise ValueError(f"oversampling ratio must be at least 1, got {value}")
        return cfg.replace(S=min(int(round(cfg.N / value)), cfg.N - 1))
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")


def _trial_task(args):
    cfg, trial, axis, values, models, n_symbols, empirical = args
    rows = []
    if axis == "snr":
        # Covariances do not depend on the noise level: compute them once.
        chan, prec = setup_trial(cfg, trial)
        spec = design_quantizer(cfg)
        grids = analytic_grids(cfg, chan, prec, spec, models)
        cfgs = [config_for(cfg, axis, v) for v in values]
        emp = [None] * len(values)
        if empirical:
            gain = dist.bussgang_gain(dist.cov_z(prec), spec).g
            emp = simulate_realization(
                cfg, chan, prec, spec, stream(cfg.seed, trial, _SYMBOLS), n_symbols, [c.N0 for c in cfgs], gain
            )
        for c, e in zip(cfgs, emp):
            rows.append(({m: g.with_noise(c.N0) for m, g in grids.items()}, e))
        return _summarize(rows)
    for v in values:
        c = config_for(cfg, axis, v)
        chan, prec = setup_trial(c, trial)
        spec = design_quantizer(c)
        grids = analytic_grids(c, chan, prec, spec, models)
        e = None
        if empirical:
            e = simulate_realization(c, chan, prec, spec, stream(c.seed, trial, _SYMBOLS), n_symbols, [c.N0])[0]
        rows.append((grids, e))
    return _summarize(rows)


def _summarize(rows):
    out = []
    for grids, e in rows:
        analytic = {m: (uncoded_ber_qpsk(g), sum_rate(g)) for m, g in grids.items()}
        out.append((analytic, None if e is None else (e.bit_errors, e.bits)))
    return out


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def _parse_models(models):
    models = tuple(models)
    bad = [m for m in models if m not in MODELS]
    if bad:
        raise ValueError(f"unknown model {bad[0]!r}; choose from {MODELS}")
    return models


def sweep(
    cfg: SystemConfig,
    axis: str,
    values,
    trials: int,
    n_symbols: int = 10,
    models=("rounding", "diagonal"),
    realizations: int | None = None,
    workers: int | None = None,
) -> list[dict]:
    """Analytic BER/rate per model and empirical BER for each sweep value.

    Analytic quantities average over ``realizations`` channels (default
    ``max(trials, 1)``); the empirical BER uses the first ``trials`` of the
    same channels with ``n_symbols`` OFDM symbols each.
    """
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    for v in values:
        config_for(cfg, axis, v)
    if trials < 0:
        raise ValueError("trials must be non-negative")
    models = _parse_models(models)
    realizations = max(trials, 1) if realizations is None else realizations
    if realizations < trials:
        raise ValueError("realizations must be at least trials")
    tasks = [(cfg, t, axis, values, models, n_symbols, t < trials) for t in range(realizations)]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_task, tasks))
    else:
        results = [_trial_task(t) for t in tasks]

    table = []
    for i, v in enumerate(values):
        row = {"value": float(v)}
        for m in models:
            per = [r[i][0][m] for r in results if m in r[i][0]]
            row[f"analytic_{m}"] = float(np.mean([p[0] for p in per])) if per else math.nan
            row[f"rate_{m}"] = float(np.mean([p[1] for p in per])) if per else math.nan
        if trials > 0:
            errs = sum(r[i][1][0] for r in results[:trials])
            nbits = sum(r[i][1][1] for r in results[:trials])
            ci = binomtest(errs, nbits).proportion_ci(0.95)
            row.update(empirical=errs / nbits, ci_low=ci.low, ci_high=ci.high, bits=nbits, errors=errs)
        table.append(row)
    return table


# --- power spectral density -----------------------------------------------------


def psd_curves(cfg: SystemConfig, realizations: int, n_symbols: int = 4, model: str = "rounding",
               side: str = "transmit", empirical: bool = True, workers: int | None = None):
    """Averaged analytic and (optionally) periodogram PSDs, both peak-normalized in-band."""
    tasks = [(cfg, t, n_symbols, model, side, empirical) for t in range(realizations)]
    workers = default_workers() if workers is None else workers
    if workers > 1 and realizations > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_psd_task, tasks))
    else:
        parts = [_psd_task(t) for t in tasks]
    occ = cfg.occupied
    ana = np.mean([p[0] for p in parts], axis=0)
    ana = ana / ana[occ].max()
    emp = None
    if empirical:
        emp = np.mean([p[1] for p in parts], axis=0)
        emp = emp / emp[occ].max()
    return ana, emp


def _psd_task(args):
    cfg, trial, n_symbols, model, side, empirical = args
    chan, prec = setup_trial(cfg, trial)
    spec = None if model == "infinite" else design_quantizer(cfg)
    cx = output_cov_freq(cfg, prec, spec, model)
    freq = chan.freq if side == "receive" else None
    ana = psd_analytic(cx, cfg.occupied, freq, side, normalize=False)
    emp = None
    if empirical:
        res = simulate_realization(
            cfg, chan, prec, spec, stream(cfg.seed, trial, _SYMBOLS), n_symbols, [0.0], capture=True
        )[0]
        x = res.time_grids
        if side == "receive":
            x = apply_channel_cyclic(chan.taps, x)
        emp = psd_empirical(x, cfg.occupied, normalize=False)
    return ana, emp
