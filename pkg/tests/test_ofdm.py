import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from dacprecode.channel import taps_to_freq
from dacprecode.ofdm import apply_channel_cyclic, demodulate, dft, idft, precode, synthesize_time_precoded


def _cgauss(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@given(st.integers(0, 2**32 - 1), st.integers(2, 64))
def test_unitary_round_trip(seed, N):
    rng = np.random.default_rng(seed)
    x = _cgauss(rng, (3, N, 4))
    np.testing.assert_allclose(dft(idft(x)), x, atol=1e-12)
    assert np.isclose(np.sum(np.abs(dft(x)) ** 2), np.sum(np.abs(x) ** 2))


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_cyclic_channel_is_diagonalized(seed, T):
    rng = np.random.default_rng(seed)
    N, U, B = 16, 2, 3
    taps = _cgauss(rng, (T, U, B))
    x = _cgauss(rng, (2, N, B))
    Y = demodulate(apply_channel_cyclic(taps, x))
    H = taps_to_freq(taps, N)
    expected = np.einsum("kub,skb->sku", H, dft(x))
    np.testing.assert_allclose(Y, expected, atol=1e-10)


def test_precode_shape_check(rng):
    P = _cgauss(rng, (8, 4, 2))
    s = _cgauss(rng, (8, 2))
    out = precode(P, s)
    np.testing.assert_allclose(out[3], P[3] @ s[3])
    try:
        precode(P, _cgauss(rng, (7, 2)))
    except ValueError:
        pass
    else:
        raise AssertionError("shape mismatch accepted")


def test_synthesis_matches_definition(rng):
    N = 8
    P = _cgauss(rng, (N, 3, 2))
    s = _cgauss(rng, (N, 2))
    z = synthesize_time_precoded(P, s)
    n = 5
    direct = sum(P[k] @ s[k] * np.exp(2j * np.pi * k * n / N) for k in range(N)) / np.sqrt(N)
    np.testing.assert_allclose(z[n], direct, atol=1e-12)


def test_noise_variance(rng):
    y = apply_channel_cyclic(np.zeros((1, 4, 2)), np.zeros((500, 64, 2)), noise_psd=0.25, rng=rng)
    assert abs(np.mean(np.abs(y) ** 2) - 0.25) < 4 * 0.25 / np.sqrt(y.size)
