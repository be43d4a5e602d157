"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into the terminal summary.
"""

import time
import tracemalloc

import numpy as np
import pytest

from dacprecode import cli, preset
from dacprecode import distortion as dist
from dacprecode.dac import QuantizerSpec, design_quantizer, quantize, rounding_rule
from dacprecode.metrics import uncoded_ber_qpsk
from dacprecode.montecarlo import analytic_grids, psd_curves, setup_trial, sweep

from .conftest import ACCEPTANCE

SNR_GRID = list(range(-10, 15, 2))


def report(number, title, passed, detail):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert passed, line


def _cn(rng, shape, var=1.0):
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_criterion_01_bussgang_gain():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    cfg = preset("desk")
    spec = design_quantizer(cfg)
    s = np.sqrt(spec.sigma_nominal)
    closed = abs(dist.gain_from_sigma(spec, np.array([s]))[0] - np.sqrt(2 / np.pi))
    worst = 0.0
    for L in (2, 4, 8, 16):
        q = design_quantizer(cfg.replace(L=L))
        z = _cn(rng, 10**6, q.sigma_nominal)
        prod = (quantize(q, z) * z.conj()).real
        g = dist.gain_from_sigma(q, np.array([s]))[0]
        worst = max(worst, abs(prod.mean() - g * q.sigma_nominal) / (prod.std() / np.sqrt(z.size)))
    elapsed = time.perf_counter() - t0
    ok = closed < 1e-12 and worst < 4 and elapsed < 10
    report(1, "Bussgang gain", ok, f"|g - sqrt(2/pi)| = {closed:.1e}, worst MC z = {worst:.2f}, {elapsed:.1f} s")


def test_criterion_02_arcsine_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    # alpha^2 delta^2 = 2 fixes the scale 2P/(pi xi B) at P = xi = B = 1.
    spec = QuantizerSpec(2, np.sqrt(2.0), 1.0, 1.0)
    exact_third = dist.arcsine_cov_x(
        dist.BlockCirculantCov("lag", np.array([[[1, 0.5], [0.5, 1]], np.zeros((2, 2))], dtype=complex)), spec
    ).blocks[0, 0, 1].real
    worst = 0.0
    for rho in (0.0, 0.25, -0.25, 0.5, -0.5, 0.9, -0.9):
        C = np.array([[1.0, rho], [rho, 1.0]], dtype=complex)
        analytic = dist.arcsine_cov_x(dist.BlockCirculantCov("lag", np.stack([C, np.zeros((2, 2))])), spec).blocks[0, 0, 1]
        chol = np.linalg.cholesky(C + 1e-300 * np.eye(2))
        s1, s2, n = 0.0, 0.0, 0
        for _ in range(10):
            x = quantize(spec, chol @ _cn(rng, (2, 10**6)))
            p = (x[0] * x[1].conj()).real
            s1 += p.sum()
            s2 += (p**2).sum()
            n += p.size
        mean = s1 / n
        sd = np.sqrt(s2 / n - mean**2) / np.sqrt(n)
        worst = max(worst, abs(mean - analytic.real) / sd)
    elapsed = time.perf_counter() - t0
    ok = exact_third == pytest.approx(1 / 3, abs=1e-15) and worst < 4 and elapsed < 60
    report(2, "arcsine law", ok, f"rho=0.5 entry {exact_third:.16f}, worst MC z = {worst:.2f}, {elapsed:.1f} s")


def test_criterion_03_theorem_convergence(desk_trial):
    t0 = time.perf_counter()
    _, prec = desk_trial
    cz = dist.cov_z(prec)
    smax = np.sqrt(cz.variances().max())
    nominal = design_quantizer(preset("desk")).sigma_nominal
    gaps = []
    for ratio in (1, 10, 100, 1000):
        delta = ratio * smax
        spec = QuantizerSpec(2, delta, np.sqrt(2 * nominal) / delta, nominal)
        xr = dist.rounding_cov_x(cz, spec).blocks
        xa = dist.arcsine_cov_x(cz, spec).blocks
        gaps.append(float(np.linalg.norm(xr - xa) / np.linalg.norm(xa)))
    elapsed = time.perf_counter() - t0
    # Beyond delta/sigma = 10 the exact gap is below double precision; equal-to-roundoff
    # values count as non-increasing.
    floor = 1e-13
    monotone = all(b < a or (a < floor and b < floor) for a, b in zip(gaps, gaps[1:]))
    ok = monotone and gaps[-1] < 1e-4 and elapsed < 60
    report(3, "rounding model tends to the arcsine law", ok,
           f"gaps {', '.join(f'{g:.2e}' for g in gaps)}, {elapsed:.1f} s")


def test_criterion_04_rounding_error_diagonal():
    rng = np.random.default_rng(404)
    worst = 0.0
    for L in (2, 3, 4, 8):
        for ratio in (0.1, 0.3, 1.0, 3.0):
            spec = QuantizerSpec(L, 1.0, 1.0, 1.0)
            z = _cn(rng, 2 * 10**6, ratio**2)
            e = np.abs(rounding_rule(spec, z) - z) ** 2
            want = dist.rounding_cov_e(
                dist.BlockCirculantCov("lag", np.array([[[ratio**2]], [[0.0]]], dtype=complex)), spec
            ).blocks[0, 0, 0].real
            worst = max(worst, abs(e.mean() - want) / (e.std() / np.sqrt(e.size)))
    trunc = 0.0
    for L in (2, 3, 4, 8):
        for sm, sn in ((0.3, 0.3), (0.3, 1.0), (1.0, 2.0), (3.0, 0.5)):
            for rho in (0.9, -0.6, 0.3 + 0.4j):
                c = rho * sm * sn
                C = np.array([[sm**2, c], [np.conj(c), sn**2]])
                cov = dist.BlockCirculantCov("lag", np.stack([C, np.zeros((2, 2))]).astype(complex))
                a = dist.rounding_cov_e(cov, QuantizerSpec(L, 1.0, 1.0, 1.0), 30, "series").blocks
                b = dist.rounding_cov_e(cov, QuantizerSpec(L, 1.0, 1.0, 1.0), 60, "series").blocks
                trunc = max(trunc, float(np.max(np.abs(a - b))))
    ok = worst < 4 and trunc < 1e-12
    report(4, "rounding error power and truncation", ok, f"worst MC z = {worst:.2f}, max |30 - 60 terms| = {trunc:.1e} delta^2")


def test_criterion_05_exact_diagonal_vs_quadrature():
    worst = 0.0
    for L in (2, 4, 8):
        spec = QuantizerSpec(L, 1.0, 1.3, 1.0)
        for s in (0.5, 1.0, 2.0):
            quad = dist.oracle_cov_x_entry(s, s, s * s, 0.0, spec).real
            worst = max(worst, abs(quad - dist.exact_diag_power(spec, s)))
    report(5, "exact diagonal vs quadrature", worst < 1e-6, f"max abs difference {worst:.1e}")


def test_criterion_06_end_to_end_desk():
    t0 = time.perf_counter()
    cfg = preset("desk")
    worst, checked, min_bits = 0.0, 0, np.inf
    for bits in (1, 2, 3):
        rows = sweep(cfg.replace(L=2**bits), "snr", SNR_GRID, trials=20, n_symbols=20, models=("rounding",))
        for r in rows:
            p = r["empirical"]
            if p < 1e-3:
                continue
            sd = np.sqrt(p * (1 - p) / r["bits"])
            worst = max(worst, abs(r["analytic_rounding"] - p) / sd)
            checked += 1
            min_bits = min(min_bits, r["bits"])
    elapsed = time.perf_counter() - t0
    ok = worst <= 3 and min_bits >= 2 * 10**5 and elapsed < 600
    report(6, "analytic vs Monte Carlo BER (desk)", ok,
           f"{checked} points, worst |z| = {worst:.2f}, >= {int(min_bits)} bits each, {elapsed:.0f} s")


def _crossing(snr, ber, level=1e-4):
    ber = np.asarray(ber)
    idx = np.flatnonzero(ber < level)
    if idx.size == 0 or idx[0] == 0:
        return np.nan
    i = idx[0]
    lo, hi = np.log10(ber[i - 1]), np.log10(ber[i])
    return snr[i - 1] + (np.log10(level) - lo) / (hi - lo) * (snr[i] - snr[i - 1])


@pytest.mark.slow
def test_criterion_07_paper_scale():
    t0 = time.perf_counter()
    cfg = preset("lte5").with_snr_db(10)
    fine = np.arange(0.0, 15.01, 0.25)
    one_bit, one_bit_arcsine = [], []
    four, ideal = np.zeros(fine.size), np.zeros(fine.size)
    tracemalloc.start()
    realizations = 20
    for t in range(realizations):
        chan, prec = setup_trial(cfg, t)
        g1 = analytic_grids(cfg, chan, prec, design_quantizer(cfg), ("rounding", "arcsine"))
        one_bit.append(uncoded_ber_qpsk(g1["rounding"]))
        one_bit_arcsine.append(uncoded_ber_qpsk(g1["arcsine"]))
        c4 = cfg.replace(L=16)
        g4 = analytic_grids(c4, chan, prec, design_quantizer(c4), ("rounding", "infinite"))
        for i, snr in enumerate(fine):
            n0 = cfg.P / 10 ** (snr / 10)
            four[i] += uncoded_ber_qpsk(g4["rounding"].with_noise(n0)) / realizations
            ideal[i] += uncoded_ber_qpsk(g4["infinite"].with_noise(n0)) / realizations
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    elapsed = time.perf_counter() - t0
    ber1 = float(np.mean(one_bit))
    gap = _crossing(fine, four) - _crossing(fine, ideal)
    ok = ber1 < 1e-4 and abs(gap) <= 1.0 and elapsed <= 1800 and peak <= 2 * 2**30
    report(7, "full-scale spot check (lte5)", ok,
           f"1-bit BER at 10 dB {ber1:.2e} (arcsine {np.mean(one_bit_arcsine):.2e}), "
           f"4-bit gap to ideal at 1e-4 {gap:.2f} dB, peak {peak / 2**30:.2f} GiB, {elapsed:.0f} s")


def test_criterion_08_model_ordering():
    cfg = preset("desk")
    fractions = []
    rel = 0.0
    for t in range(5):
        chan, prec = setup_trial(cfg, t)
        for snr in (10, 14):
            c = cfg.with_snr_db(snr)
            g = analytic_grids(c, chan, prec, design_quantizer(c), ("rounding", "diagonal"))
            fractions.append(np.mean(g["diagonal"].gamma > g["rounding"].gamma))
        c8 = cfg.replace(L=256)
        g8 = analytic_grids(c8, chan, prec, design_quantizer(c8), ("rounding", "diagonal"))
        for snr in SNR_GRID:
            n0 = cfg.P / 10 ** (snr / 10)
            a = uncoded_ber_qpsk(g8["rounding"].with_noise(n0))
            b = uncoded_ber_qpsk(g8["diagonal"].with_noise(n0))
            if min(a, b) >= 1e-6:
                rel = max(rel, abs(a / b - 1))
    frac = float(np.min(fractions))
    ok = frac >= 0.95 and rel <= 0.10
    report(8, "diagonal vs rounding ordering", ok,
           f"min fraction diagonal > rounding {frac:.3f}, 8-bit max relative BER gap {rel:.3%}")


def test_criterion_09_psd():
    t0 = time.perf_counter()
    cfg = preset("desk")
    guard = cfg.guard
    worst, floors = 0.0, {}
    for bits in (1, 2, 3):
        ana, emp = psd_curves(cfg.replace(L=2**bits), 100, n_symbols=4)
        worst = max(worst, float(np.max(np.abs(10 * np.log10(ana / emp)))))
        floors[bits] = 10 * np.log10(ana[guard].mean())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and floors[1] > floors[3]
    report(9, "transmit PSD", ok,
           f"max |analytic - periodogram| {worst:.2f} dB, guard floor 1/2/3 bits "
           f"{floors[1]:.1f}/{floors[2]:.1f}/{floors[3]:.1f} dB, {elapsed:.0f} s")


def test_criterion_10_determinism(tmp_path, monkeypatch):
    outputs = []
    for workers in ("1", "3"):
        monkeypatch.setenv("DACPRECODE_WORKERS", workers)
        out = tmp_path / f"w{workers}.csv"
        code = cli.main(["ber", "--preset", "desk", "--bits", "2", "--snr-db=-4:4:8", "--trials", "4",
                         "--symbols", "3", "--seed", "99", "--out", str(out)])
        assert code == 0
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1]
    report(10, "determinism across worker counts", ok, f"{len(outputs[0])} bytes, identical={ok}")
