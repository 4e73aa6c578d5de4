import shutil

import numpy as np
import pandas as pd
import pytest

from gazeeg.dataset import (EegStream, TrialEvent, find_event, load_recording, slice_stream, validate,
                            write_recording)
from gazeeg.errors import ClockError, CoverageError, MissingFile, RangeError, SchemaError


def test_load_round_trip(synthetic, recording_dir):
    recording, _ = synthetic
    loaded = load_recording(recording_dir)
    assert loaded.participant_id == recording.participant_id
    assert len(loaded.events) == 12
    assert loaded.channels == recording.channels
    assert loaded.events == recording.events
    assert loaded.gaze.shape == recording.gaze.shape
    np.testing.assert_allclose(loaded.gaze['t_ms'], recording.gaze['t_ms'], atol=5e-4)
    np.testing.assert_allclose(loaded.gaze['lx'], recording.gaze['lx'], atol=1e-5)
    np.testing.assert_array_equal(loaded.gaze['rvalid'], recording.gaze['rvalid'])
    np.testing.assert_allclose(loaded.eeg.values, recording.eeg.values, rtol=1e-5, atol=1e-4)


def test_missing_directory(tmp_path):
    with pytest.raises(MissingFile):
        load_recording(tmp_path)
    with pytest.raises(FileNotFoundError):
        load_recording(tmp_path / 'absent')


def test_column_mismatch(recording_dir, tmp_path):
    copy = shutil.copytree(recording_dir, tmp_path / 'copy')
    path = copy / 'gaze.csv'
    lines = path.read_text(encoding='utf-8').split('\n')
    lines[0] = lines[0].replace('lvalid', 'lval')
    path.write_text('\n'.join(lines), encoding='utf-8')
    with pytest.raises(SchemaError):
        load_recording(copy)


def test_meta_lacks_channels(recording_dir, tmp_path):
    copy = shutil.copytree(recording_dir, tmp_path / 'copy')
    (copy / 'meta.json').write_text('{"participant_id": "P01", "screen_px": [1920, 1080]}', encoding='utf-8')
    with pytest.raises(SchemaError):
        load_recording(copy)


def test_non_monotone_timestamps(tiny_recording):
    n = 2000
    t = np.arange(n) * 2.0
    t[10], t[11] = t[11], t[10]
    recording = tiny_recording(eeg=EegStream(t, np.zeros((n, 20))))
    with pytest.raises(ClockError):
        validate(recording)


def test_wrong_sample_rate(tiny_recording):
    n = 1000
    recording = tiny_recording(eeg=EegStream(np.arange(n) * 4.0, np.zeros((n, 20))))
    with pytest.raises(ClockError):
        validate(recording)


def test_event_outside_span(tiny_recording):
    event = TrialEvent(1, 'desktop_001', 'desktop', 'obj_01', (10.0, 10.0, 50.0, 50.0), 3000.0, 5000.0, 'clicked')
    with pytest.raises(CoverageError):
        validate(tiny_recording(events=[event]))


def test_bbox_outside_screen(tiny_recording):
    event = TrialEvent(1, 'desktop_001', 'desktop', 'obj_01', (1900.0, 10.0, 1960.0, 50.0), 500.0, 900.0, 'clicked')
    with pytest.raises(SchemaError):
        validate(tiny_recording(events=[event]))


def test_duplicate_trial_ids(tiny_recording):
    event = TrialEvent(1, 'desktop_001', 'desktop', 'obj_01', (10.0, 10.0, 50.0, 50.0), 500.0, 900.0, 'clicked')
    with pytest.raises(SchemaError):
        validate(tiny_recording(events=[event, event]))


def test_bbox_is_closed_and_window_half_open():
    event = TrialEvent(1, 'workshop_001', 'workshop', 'obj_01', (10.0, 10.0, 20.0, 20.0), 100.0, 200.0, 'clicked')
    assert event.contains(20.0, 20.0)
    assert event.contains(10.0, 15.0)
    assert not event.contains(20.001, 20.0)
    assert event.covers(100.0)
    assert not event.covers(200.0)


def test_find_event():
    first = TrialEvent(1, 'workshop_001', 'workshop', 'a', (0.0, 0.0, 1.0, 1.0), 0.0, 100.0, 'clicked')
    second = TrialEvent(2, 'workshop_002', 'workshop', 'b', (0.0, 0.0, 1.0, 1.0), 150.0, 300.0, 'skipped')
    assert find_event([first, second], 100.0) is None
    assert find_event([first, second], 99.9) is first
    assert find_event([first, second], 150.0) is second


def test_slice_stream(tiny_recording):
    recording = tiny_recording()
    part = slice_stream(recording, 10.0, 20.0)
    np.testing.assert_array_equal(part.t_ms, [10.0, 12.0, 14.0, 16.0, 18.0])
    assert part.values.shape == (5, 20)
    gaze = slice_stream(recording, 0.0, 50.0, stream='gaze')
    assert gaze.shape[0] == 3
    with pytest.raises(RangeError):
        slice_stream(recording, 20.0, 20.0)
    with pytest.raises(RangeError):
        slice_stream(recording, -5.0, 20.0)


def test_recording_is_read_only(tiny_recording):
    recording = tiny_recording()
    with pytest.raises(ValueError):
        recording.eeg.values[0, 0] = 1.0


def test_top_right_origin_is_flipped_on_disk(tiny_recording, gaze_samples, tmp_path):
    n = 240
    gaze = gaze_samples(np.linspace(0.1, 0.4, n), np.full(n, 0.5))
    recording = tiny_recording(gaze=gaze, gaze_origin='top_right')
    path = write_recording(recording, tmp_path / 'rec')
    raw = pd.read_csv(path / 'gaze.csv')
    np.testing.assert_allclose(raw['lx'].to_numpy(), 1.0 - gaze['lx'], atol=1e-6)
    loaded = load_recording(path)
    assert loaded.gaze_origin == 'top_right'
    np.testing.assert_allclose(loaded.gaze['lx'], gaze['lx'], atol=1e-6)


def test_written_files_use_lf(recording_dir):
    for name in ('gaze.csv', 'eeg.csv', 'events.jsonl', 'meta.json'):
        assert b'\r\n' not in (recording_dir / name).read_bytes()
