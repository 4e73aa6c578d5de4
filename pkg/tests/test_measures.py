import numpy as np
import pytest

from gazeeg.errors import DegenerateSignal
from gazeeg.measures import BANDS, band_power, dfa_alpha, dfa_windows, higuchi_fd, hjorth, moments, petrosian_fd

FS = 500.0


def _sine(freq_hz, n):
    return np.sin(2 * np.pi * freq_hz * np.arange(n) / FS)


def test_petrosian_of_ramp():
    assert petrosian_fd(np.arange(100, dtype=float)) == pytest.approx(1.0)


def test_petrosian_of_alternating_signal():
    x = np.tile([1.0, -1.0], 500)
    expected = 3.0 / (3.0 + np.log10(1000.0 / 1399.2))
    assert petrosian_fd(x) == pytest.approx(expected)


def test_petrosian_of_white_noise():
    x = np.random.default_rng(0).standard_normal(5000)
    assert 1.02 < petrosian_fd(x) < 1.04


def test_hjorth_of_sine():
    mobility, complexity = hjorth(_sine(10.0, 5000))
    assert mobility == pytest.approx(2 * np.sin(np.pi / 50), rel=0.01)
    assert complexity == pytest.approx(1.0, rel=0.01)


def test_hjorth_complexity_of_white_noise_is_stable():
    complexities = np.array([hjorth(np.random.default_rng(seed).standard_normal(5000))[1] for seed in range(20)])
    assert complexities.std() / complexities.mean() <= 0.05
    assert complexities.mean() == pytest.approx(np.sqrt(1.5), rel=0.05)


def test_alpha_share_of_10hz_sine():
    shares = band_power(_sine(10.0, 1000), FS)
    assert shares.shape == (len(BANDS),)
    assert shares[2] >= 0.95


def test_band_edges_are_half_open():
    shares = band_power(_sine(12.0, 1000), FS)
    assert shares[3] >= 0.95
    assert shares[2] <= 0.05


def test_no_spectral_mass_gives_uniform_shares():
    np.testing.assert_allclose(band_power(np.zeros(500), FS), 0.2)


def test_higuchi_of_line_and_noise():
    assert higuchi_fd(np.arange(1000, dtype=float)) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    assert higuchi_fd(rng.standard_normal(5000)) == pytest.approx(2.0, abs=0.1)


def test_higuchi_rejects_bad_arguments():
    with pytest.raises(ValueError):
        higuchi_fd(np.arange(100, dtype=float), kmax=1)
    with pytest.raises(ValueError):
        higuchi_fd(np.arange(5, dtype=float), kmax=8)


def _windows():
    return np.unique(np.round(np.logspace(np.log10(16), np.log10(1000), 12)).astype(int))


def test_dfa_of_white_noise():
    rng = np.random.default_rng(1)
    assert dfa_alpha(rng.standard_normal(20000), _windows()) == pytest.approx(0.5, abs=0.05)


def test_dfa_of_random_walk():
    rng = np.random.default_rng(2)
    assert dfa_alpha(np.cumsum(rng.standard_normal(20000)), _windows()) == pytest.approx(1.5, abs=0.1)


def test_dfa_windows_for_short_signals():
    sizes = dfa_windows(20)
    assert sizes.shape[0] >= 3
    assert sizes.min() >= 4 and sizes.max() <= 10
    assert dfa_windows(4000).max() == 1000


def test_moments():
    skew, kurtosis, low, high, std = moments(np.array([1.0, 2.0, 3.0, 4.0]))
    assert skew == pytest.approx(0.0)
    assert kurtosis == pytest.approx(-1.36)
    assert (low, high) == (1.0, 4.0)
    assert std == pytest.approx(np.sqrt(1.25))


def test_moments_of_alternating_signal():
    skew, kurtosis, low, high, std = moments(np.tile([1.0, -1.0], 500))
    assert skew == pytest.approx(0.0, abs=1e-12)
    assert kurtosis == pytest.approx(-2.0)
    assert (low, high) == (-1.0, 1.0)
    assert std == pytest.approx(1.0)


@pytest.mark.parametrize('measure', [hjorth, moments, higuchi_fd, dfa_alpha])
def test_constant_signal_is_degenerate(measure):
    with pytest.raises(DegenerateSignal):
        measure(np.full(200, 4.0))
