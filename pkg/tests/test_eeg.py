import numpy as np
import pytest
from scipy import signal

from gazeeg.config import EegConfig
from gazeeg.core import montages
from gazeeg.eeg import (EegMatrix, bandpass_chain, common_average_reference, detect_bad_channels, epoch_fixations,
                        epoch_srp, interpolate_spherical, reject_artifact_components, sobi_unmix)
from gazeeg.errors import AllRejected, FilterDesignError, TooFewChannels
from gazeeg.gaze import Fixation, Saccade

FS = 500.0


def _sine(freq_hz, seconds=20.0):
    t = np.arange(int(seconds * FS)) / FS
    return np.sin(2 * np.pi * freq_hz * t)


def _rms_gain(freq_hz):
    x = _sine(freq_hz)
    out = bandpass_chain(EegMatrix(x[None, :], FS, ('Cz',))).data[0]
    middle = slice(2000, 8000)
    return np.sqrt(np.mean(out[middle] ** 2) / np.mean(x[middle] ** 2))


def test_passband_gain():
    assert _rms_gain(10.0) == pytest.approx(1.0, abs=0.05)


def test_line_noise_is_attenuated():
    assert 20 * np.log10(_rms_gain(50.0)) <= -20.0


def test_constant_offset_is_removed():
    x = EegMatrix(np.full((1, int(20 * FS)), 5.0), FS, ('Cz',))
    out = bandpass_chain(x).data[0]
    assert np.abs(out[2000:8000]).max() <= 5.0 * 1e-3


def test_filtering_adds_no_delay():
    x = np.zeros(int(20 * FS))
    x[x.shape[0] // 2] = 1.0
    out = bandpass_chain(EegMatrix(x[None, :], FS, ('Cz',))).data[0]
    lags = signal.correlation_lags(out.shape[0], x.shape[0])
    assert lags[np.argmax(signal.correlate(out, x))] == 0


def test_filters_need_a_usable_rate():
    x = EegMatrix(np.zeros((1, 1000)), 100.0, ('Cz',))
    with pytest.raises(FilterDesignError):
        bandpass_chain(x)


def _ar(rng, rho, n):
    return signal.lfilter([1.0], [1.0, -rho], rng.standard_normal(n))


def test_detects_uncorrelated_channel(channels):
    rng = np.random.default_rng(1)
    n = int(20 * FS)
    common = rng.standard_normal(n)
    data = common[None, :] + 0.1 * rng.standard_normal((len(channels), n))
    data[channels.index('O2')] = rng.standard_normal(n)
    assert detect_bad_channels(EegMatrix(data, FS, tuple(channels))) == ['O2']


def test_no_bad_channels_in_correlated_data(channels):
    rng = np.random.default_rng(2)
    n = int(8 * FS)
    data = rng.standard_normal(n)[None, :] + 0.2 * rng.standard_normal((len(channels), n))
    assert detect_bad_channels(EegMatrix(data, FS, tuple(channels))) == []


def test_spherical_interpolation_of_smooth_field(channels):
    positions = montages['standard_1020'].positions(channels)
    field = positions @ np.array([3.0, -5.0, 8.0])
    data = field[:, None] * np.ones((1, 50))
    truth = field[channels.index('Cz')]
    corrupted = data.copy()
    corrupted[channels.index('Cz')] = 0.0
    x = EegMatrix(corrupted, FS, tuple(channels), positions)
    repaired = interpolate_spherical(x, ['Cz'])
    np.testing.assert_allclose(repaired.channel('Cz'), truth, atol=0.1 * np.abs(field).max())
    np.testing.assert_array_equal(np.delete(repaired.data, channels.index('Cz'), axis=0),
                                  np.delete(corrupted, channels.index('Cz'), axis=0))


def test_flat_channel_is_bad(channels):
    rng = np.random.default_rng(8)
    n = int(8 * FS)
    data = rng.standard_normal(n)[None, :] + 0.2 * rng.standard_normal((len(channels), n))
    data[channels.index('T7')] = 3.0
    assert detect_bad_channels(EegMatrix(data, FS, tuple(channels))) == ['T7']


def test_identical_channels_are_good(channels):
    common = np.random.default_rng(9).standard_normal(int(8 * FS))
    data = np.tile(common, (len(channels), 1))
    assert detect_bad_channels(EegMatrix(data, FS, tuple(channels))) == []


def test_constant_field_interpolates_exactly(channels):
    positions = montages['standard_1020'].positions(channels)
    data = np.full((len(channels), 20), 7.25)
    data[channels.index('Cz')] = 0.0
    data[channels.index('O1')] = -40.0
    x = EegMatrix(data, FS, tuple(channels), positions)
    repaired = interpolate_spherical(x, ['Cz', 'O1'])
    np.testing.assert_allclose(repaired.data, 7.25, atol=1e-6)


def test_interpolation_needs_four_good_channels(channels):
    names = tuple(channels[:5])
    x = EegMatrix(np.zeros((5, 10)), FS, names, montages['standard_1020'].positions(names))
    with pytest.raises(TooFewChannels):
        interpolate_spherical(x, names[:2])


def test_common_average_reference():
    rng = np.random.default_rng(3)
    x = EegMatrix(rng.standard_normal((4, 100)) + 5.0, FS, ('a', 'b', 'c', 'd'))
    np.testing.assert_allclose(common_average_reference(x).data.mean(axis=0), 0.0, atol=1e-12)


def test_common_average_reference_is_idempotent():
    rng = np.random.default_rng(10)
    once = common_average_reference(EegMatrix(rng.standard_normal((5, 200)), FS, ('a', 'b', 'c', 'd', 'e')))
    np.testing.assert_allclose(common_average_reference(once).data, once.data, atol=1e-12)
    single = common_average_reference(EegMatrix(rng.standard_normal((1, 200)), FS, ('Cz',)))
    np.testing.assert_array_equal(single.data, 0.0)


def test_sobi_keeps_separated_channels():
    rng = np.random.default_rng(11)
    segment, gap = 1000, 100
    data = np.zeros((3, 3 * (segment + gap)))
    for i, scale in enumerate((1.0, 3.0, 6.0)):
        part = _ar(rng, 0.8, segment)
        start = i * (segment + gap)
        data[i, start:start + segment] = scale * (part - part.mean())
    result = sobi_unmix(data, n_lags=10)
    weights = np.abs(result.unmixing)
    weights /= weights.max(axis=1, keepdims=True)
    assert sorted(np.argmax(weights, axis=1)) == [0, 1, 2]
    assert np.sort(weights, axis=1)[:, :-1].max() <= 1e-3


def test_sobi_recovers_ar_sources():
    rng = np.random.default_rng(4)
    n = 20000
    sources = np.vstack([_ar(rng, 0.95, n), _ar(rng, -0.5, n)])
    mixing = np.array([[1.0, 0.6], [0.4, 1.0]])
    result = sobi_unmix(mixing @ sources, n_lags=20)
    assert result.converged
    corr = np.abs(np.corrcoef(np.vstack([sources, result.sources]))[:2, 2:])
    assert corr.max(axis=1).min() >= 0.95


def test_sobi_drops_rank_deficient_directions():
    rng = np.random.default_rng(5)
    sources = np.vstack([_ar(rng, 0.9, 5000), _ar(rng, 0.2, 5000)])
    mixing = np.array([[1.0, 0.5], [0.3, 1.0], [1.3, 1.5]])
    result = sobi_unmix(mixing @ sources, n_lags=10)
    assert result.unmixing.shape == (2, 3)
    assert result.mixing.shape == (3, 2)


def test_reconstruction_without_rejection():
    rng = np.random.default_rng(6)
    data = np.vstack([_ar(rng, rho, 3000) for rho in (0.9, 0.4, -0.2)]) + 2.0
    result = sobi_unmix(data, n_lags=10)
    np.testing.assert_allclose(result.mixing @ result.sources + result.mean, data, atol=1e-8)


def test_ocular_component_is_rejected():
    rng = np.random.default_rng(7)
    n = int(60 * FS)
    t = np.arange(n) / FS * 1000.0
    blink = np.zeros(n)
    for onset in rng.uniform(500.0, t[-1] - 500.0, size=12):
        blink += np.exp(-0.5 * ((t - onset) / 60.0) ** 2)
    sources = np.vstack([20.0 * blink] + [_ar(rng, rho, n) for rho in (0.7, 0.3, -0.4, 0.0)])
    names = ('Fp1', 'Fp2', 'Cz', 'Pz', 'O1')
    mixing = np.array([
        [1.0, 0.2, 0.1, 0.3, 0.1],
        [0.9, 0.1, 0.3, 0.1, 0.2],
        [0.1, 1.0, 0.2, 0.4, 0.1],
        [0.05, 0.3, 1.0, 0.2, 0.3],
        [0.0, 0.2, 0.3, 1.0, 0.5],
    ])
    x = EegMatrix(mixing @ sources, FS, names)
    result = sobi_unmix(x, n_lags=20)
    cleaned, rejected = reject_artifact_components(x, result, ('Fp1', 'Fp2'), EegConfig())
    assert rejected
    assert len(rejected) < 5
    assert abs(np.corrcoef(cleaned.channel('Fp1'), blink)[0, 1]) < 0.3


def test_all_components_rejected():
    rng = np.random.default_rng(12)
    n = 10000
    sources = np.zeros((3, n))
    for row in sources:
        row[rng.choice(n, size=10, replace=False)] = rng.uniform(1.0, 3.0, size=10)
    mixing = np.array([[1.0, 0.3, 0.2], [0.2, 1.0, 0.4], [0.1, 0.5, 1.0]])
    x = EegMatrix(mixing @ sources, FS, ('Cz', 'Pz', 'O1'))
    with pytest.raises(AllRejected):
        reject_artifact_components(x, sobi_unmix(x, n_lags=5), ('Fp1', 'Fp2'), EegConfig())


def _continuous(seconds=4.0):
    n = int(seconds * FS)
    data = np.tile(np.arange(n, dtype=np.float64), (3, 1))
    return EegMatrix(data, FS, ('Fz', 'Cz', 'Pz'))


def test_fixation_epochs():
    x = _continuous()
    fixations = [Fixation(1000.0, 200.0, (0.0, 0.0), 12), Fixation(3900.0, 200.0, (0.0, 0.0), 12)]
    result = epoch_fixations(x, fixations)
    assert result.skipped == 1
    assert result.epochs[1] is None
    epoch = result.epochs[0]
    assert epoch.data.shape == (3, 100)
    assert epoch.data[0, 0] == 500.0
    assert epoch.kind == 'frp'


def test_saccade_epochs_start_at_preceding_midpoint():
    x = _continuous()
    fixations = [Fixation(500.0, 200.0, (0.0, 0.0), 12), Fixation(1000.0, 200.0, (0.0, 0.0), 12),
                 Fixation(3200.0, 200.0, (0.0, 0.0), 12)]
    saccades = [Saccade(900.0, 1000.0), Saccade(3100.0, 3200.0)]
    result = epoch_srp(x, fixations, saccades, length_ms=1000.0)
    assert len(result.epochs) == 3
    assert result.epochs[0] is None
    assert result.epochs[1].onset_ms == 950.0
    assert result.epochs[1].data.shape == (3, 500)
    assert result.epochs[1].data[0, 0] == 475.0
    assert result.epochs[2] is None
    assert result.skipped == 2
