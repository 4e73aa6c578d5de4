from dataclasses import replace

import numpy as np
import pytest

from gazeeg.core import montages
from gazeeg.dataset import load_recording, validate
from gazeeg.errors import ConfigError
from gazeeg.synth import (DURATION_RANGE_MS, effect_wave, forward_model, generate, generate_participant,
                          load_truth, minimum_jerk, participant_id, pink_noise, saccade_duration_ms)


def test_minimum_jerk_profile():
    tau = np.linspace(0.0, 1.0, 11)
    s = minimum_jerk(tau)
    assert s[0] == 0.0 and s[-1] == 1.0
    assert s[5] == pytest.approx(0.5)
    assert np.all(np.diff(s) > 0)
    assert saccade_duration_ms(10.0) == pytest.approx(43.0)


def test_pink_noise_is_unit_variance():
    noise = pink_noise(np.random.default_rng(0), 3, 4096)
    np.testing.assert_allclose(noise.std(axis=1), 1.0)
    assert np.abs(noise.mean(axis=1)).max() < 1e-9


def test_effect_wave_peaks_after_onset():
    t = np.arange(0.0, 2000.0, 2.0)
    wave = effect_wave(t, [100.0], 4.0, 350.0, 300.0)
    assert t[np.argmax(wave)] == 450.0
    assert wave.max() == pytest.approx(4.0)
    assert np.all(wave[t < 300.0] == 0.0) and np.all(wave[t > 600.0] == 0.0)
    assert not effect_wave(t, [100.0], 0.0, 350.0, 300.0).any()


def test_participant_id():
    assert participant_id(0, 6) == 'P01'
    assert participant_id(11, 120) == 'P012'


def test_same_seed_same_participant(synth_config):
    a, truth_a = generate_participant(0, synth_config.synth, 11)
    b, truth_b = generate_participant(0, synth_config.synth, 11)
    np.testing.assert_array_equal(a.gaze, b.gaze)
    np.testing.assert_array_equal(a.eeg.values, b.eeg.values)
    assert a.events == b.events
    assert truth_a.fixations == truth_b.fixations
    c, _ = generate_participant(0, synth_config.synth, 12)
    assert not np.array_equal(a.gaze['lx'][:100], c.gaze['lx'][:100])


def test_generated_recording_is_valid(synthetic):
    recording, truth = synthetic
    validate(recording)
    assert recording.participant_id == truth.participant_id == 'P01'
    assert len(recording.events) == 12
    assert [event.scene_domain for event in recording.events] == ['workshop'] * 6 + ['desktop'] * 6
    assert recording.eeg.values.shape[1] == len(recording.channels)


def test_target_is_first_fixation_in_box(synthetic):
    recording, truth = synthetic
    for event in recording.events:
        planted = [fix for fix in truth.fixations if fix.trial_id == event.trial_id]
        assert planted
        for fix in planted:
            assert event.search_onset_ms <= fix.onset_ms and fix.end_ms <= event.search_end_ms + 1e-6
        inside = [fix for fix in planted if event.contains(fix.x_px, fix.y_px)]
        if event.outcome == 'skipped':
            assert not inside
            assert {fix.label for fix in planted} == {'nontarget'}
        else:
            assert [fix.label for fix in inside] == ['target']
            assert planted.index(inside[0]) >= 1
            assert all(fix.label == 'nontarget' for fix in planted[:planted.index(inside[0])])


def test_scanpath_timing(synthetic, synth_config):
    _, truth = synthetic
    assert truth.fixations[0].label == 'pause' and truth.fixations[0].onset_ms == 0.0
    for fix in truth.fixations:
        if fix.label != 'pause':
            assert DURATION_RANGE_MS[0] <= fix.duration_ms <= DURATION_RANGE_MS[1]
    for sac in truth.saccades:
        assert sac.offset_ms - sac.onset_ms == pytest.approx(saccade_duration_ms(sac.amplitude_deg))
    # Fixations and saccades alternate without gaps.
    for fix, sac, after in zip(truth.fixations, truth.saccades, truth.fixations[1:]):
        assert sac.onset_ms == pytest.approx(fix.end_ms)
        assert after.onset_ms == pytest.approx(sac.offset_ms)
    assert truth.duration_effect


def test_no_effect_source_without_effect(synth_config):
    config = replace(synth_config.synth, effect_amplitude_uv=0.0, effect_background_uv=0.0, blink_rate_hz=0.0)
    assert not config.duration_effect_active
    _, truth = generate_participant(0, config, 5)
    assert not truth.duration_effect
    assert not truth.sources[truth.source_names.index('effect')].any()
    assert not truth.sources[truth.source_names.index('blink')].any()
    assert truth.blink_onsets_ms == []


def test_screen_too_small(synth_config):
    config = replace(synth_config.synth, screen_px=[200, 200], screen_mm=[50.0, 50.0])
    with pytest.raises(ConfigError):
        generate_participant(0, config, 1)


def test_forward_model_keeps_background_off_the_fixed_patterns():
    positions = montages['standard_1020'].positions(montages['standard_1020'].names)
    forward = forward_model(np.random.default_rng(3), positions, 10)
    assert forward.shape == (20, 12)
    background, fixed = forward[:, :10], forward[:, 10:]
    np.testing.assert_allclose(background.T @ fixed, 0.0, atol=1e-9)
    np.testing.assert_allclose(forward.sum(axis=0), 0.0, atol=1e-9)
    assert np.abs(fixed).max(axis=0) == pytest.approx([1.0, 1.0])
    assert (background ** 2).sum(axis=1).mean() == pytest.approx(1.0)
    other = forward_model(np.random.default_rng(4), positions, 10)
    np.testing.assert_allclose(other[:, 10:], fixed)
    with pytest.raises(ConfigError):
        forward_model(np.random.default_rng(3), positions, 18)


def test_truth_on_disk(recording_dir, synthetic):
    recording, truth = synthetic
    stored = load_truth(recording_dir)
    assert stored['participant_id'] == 'P01'
    assert len(stored['fixations']) == len(truth.fixations)
    assert stored['forward']['sources'][-2:] == ['effect', 'blink']
    assert np.asarray(stored['forward']['matrix']).shape == (len(recording.channels), len(truth.source_names))
    np.testing.assert_array_equal(stored['sources'], truth.sources)
    assert all(sac['peak_velocity_deg_s'] > 0 for sac in stored['saccades'])
    loaded = load_recording(recording_dir)
    assert loaded.events == recording.events


def test_generate_does_not_depend_on_workers(synth_config, tmp_path):
    serial = generate(synth_config, tmp_path / 'serial', jobs=1)
    parallel = generate(synth_config, tmp_path / 'parallel', jobs=2)
    assert [path.name for path in serial] == ['P01', 'P02']
    for a, b in zip(serial, parallel):
        files = sorted(path.name for path in a.iterdir())
        assert files == ['eeg.csv', 'events.jsonl', 'gaze.csv', 'meta.json', 'truth.json', 'truth_sources.npy']
        assert files == sorted(path.name for path in b.iterdir())
        for name in files:
            assert (a / name).read_bytes() == (b / name).read_bytes()
