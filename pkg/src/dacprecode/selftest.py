"""Closed-form invariant checks runnable without pytest."""

from __future__ import annotations

import numpy as np

from . import distortion as dist
from .config import SystemConfig, preset
from .dac import QuantizerSpec, design_quantizer
from .metrics import SindrGrid, sum_rate, uncoded_ber_qpsk
from .montecarlo import setup_trial


def _checks():
    cfg = SystemConfig(B=8, U=2, N=32, S=10, T=2)
    spec = design_quantizer(cfg)
    s2 = spec.sigma_nominal

    yield "1-bit Bussgang gain equals sqrt(2/pi)", abs(
        dist.gain_from_sigma(spec, np.array([np.sqrt(s2)]))[0] - np.sqrt(2 / np.pi)
    ) < 1e-12

    one = dist.exact_diag_power(spec, np.sqrt(s2))
    yield "1-bit output power equals alpha^2 delta^2 / 2", abs(one - spec.alpha**2 * spec.delta**2 / 2) < 1e-15

    diag_d = dist.diagonal_power(dist.BlockCirculantCov("lag", np.eye(1)[None] * s2), spec)
    yield "1-bit diagonal distortion equals (1 - 2/pi) P/(xi B)", abs(diag_d[0] - s2 * (1 - 2 / np.pi)) < 1e-14

    chan, prec = setup_trial(cfg, 0)
    cz = dist.cov_z(prec)
    yield "precoder power trace equals P S", abs(np.trace(cz.blocks, axis1=1, axis2=2).real.sum() - cfg.P * cfg.S) < 1e-9

    lag = cz.to_lag()
    yield "lag/frequency round trip", np.max(np.abs(lag.to_frequency().blocks - cz.blocks)) < 1e-12

    cx = dist.arcsine_cov_x(cz, spec)
    yield "arcsine diagonal equals P/(xi B) at nominal power scale", np.allclose(
        np.diagonal(cx.blocks[0]).real, spec.alpha**2 * spec.delta**2 / 2
    )

    D = np.diag(np.arange(1.0, 5.0)).astype(complex)
    blocks = np.zeros((6, 4, 4), dtype=complex)
    blocks[0] = D
    white = dist.BlockCirculantCov("lag", blocks).to_frequency().blocks
    yield "lag-0 diagonal gives a white spectrum", np.allclose(white, D[None])

    ones = SindrGrid(np.arange(3), np.ones((3, 2)), np.zeros((3, 2)), np.zeros((3, 2)), 1.0)
    yield "gamma = 1 gives a sum rate of U", abs(sum_rate(ones) - 2.0) < 1e-15
    zero = SindrGrid(np.arange(3), np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((3, 2)), 1.0)
    yield "gamma = 0 gives BER 1/2", uncoded_ber_qpsk(zero) == 0.5

    tiny = QuantizerSpec(2, 1.0, 1.0, 1.0)
    zero_cov = dist.BlockCirculantCov("lag", np.stack([np.eye(2), np.zeros((2, 2))]).astype(complex))
    ce = dist.rounding_cov_e(zero_cov, tiny).blocks
    yield "uncorrelated inputs give zero off-diagonal rounding error", np.all(ce[0][~np.eye(2, dtype=bool)] == 0)

    yield "lte5 preset has OSR about 3.4", abs(preset("lte5").osr - 1024 / 300) < 1e-12


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, passed in _checks():
        ok &= bool(passed)
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
