import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dacprecode import SystemConfig
from dacprecode.channel import (
    corrupt_csi,
    draw_channel,
    dump,
    freq_response,
    from_taps,
    load,
    taps_to_freq,
)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(8, 64))
def test_freq_response_matches_fft(seed, T, N):
    rng = np.random.default_rng(seed)
    taps = rng.standard_normal((T, 2, 3)) + 1j * rng.standard_normal((T, 2, 3))
    full = taps_to_freq(taps, N)
    k = int(rng.integers(N))
    np.testing.assert_allclose(freq_response(taps, k, N), full[k], atol=1e-12)


def test_freq_response_range():
    with pytest.raises(IndexError):
        freq_response(np.ones((2, 1, 1)), 8, 8)


def test_tap_statistics(rng):
    cfg = SystemConfig(B=64, U=32, N=64, S=20, T=4)
    chan = draw_channel(cfg, rng)
    # Each tap entry is CN(0, 1/T), so each subcarrier entry is CN(0, 1).
    n = chan.taps.size
    var = np.mean(np.abs(chan.taps) ** 2)
    assert abs(var - 1 / cfg.T) < 4 * (1 / cfg.T) / np.sqrt(n)
    assert abs(np.mean(np.abs(chan.freq) ** 2) - 1.0) < 0.05


def test_csi_error_statistics(rng):
    taps = np.zeros((4, 64, 64), dtype=complex)
    est = corrupt_csi(taps, 0.3, rng)
    # Pure error part: variance eps/T.
    assert abs(np.mean(np.abs(est) ** 2) - 0.3 / 4) < 4 * (0.3 / 4) / np.sqrt(est.size)


def test_csi_preserves_power(rng):
    cfg = SystemConfig(B=64, U=32, N=64, S=20, T=4, eps=0.5)
    chan = draw_channel(cfg, rng)
    assert abs(np.mean(np.abs(chan.est_taps) ** 2) - 0.25) < 0.01


def test_csi_edges(rng):
    taps = rng.standard_normal((2, 2, 2)) + 0j
    same = corrupt_csi(taps, 0.0, rng)
    np.testing.assert_array_equal(same, taps)
    assert same is not taps
    with pytest.raises(ValueError):
        corrupt_csi(taps, 1.2, rng)


def test_separate_csi_stream_keeps_channel(rng):
    cfg = SystemConfig(B=8, U=2, N=16, S=6, T=2)
    a = draw_channel(cfg, np.random.default_rng(1), np.random.default_rng(2))
    b = draw_channel(cfg.replace(eps=0.4), np.random.default_rng(1), np.random.default_rng(2))
    np.testing.assert_array_equal(a.taps, b.taps)
    assert not np.array_equal(b.taps, b.est_taps)


def test_dump_round_trip(tmp_path, rng):
    cfg = SystemConfig(B=6, U=3, N=16, S=6, T=2, eps=0.1)
    chan = draw_channel(cfg, rng)
    path = tmp_path / "chan.bin"
    dump(chan, path)
    raw = path.read_bytes()
    assert np.frombuffer(raw[:32], "<i8").tolist() == [6, 3, 16, 2]
    back = load(path)
    np.testing.assert_array_equal(back.taps, chan.taps)
    np.testing.assert_array_equal(back.est_taps, chan.est_taps)
    np.testing.assert_allclose(back.est_freq, chan.est_freq)


def test_dump_truncated(tmp_path, rng):
    chan = from_taps(rng.standard_normal((2, 2, 2)) + 0j, 8)
    path = tmp_path / "c.bin"
    dump(chan, path)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ValueError):
        load(path)
