import shutil
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from gazeeg import __version__
from gazeeg.cli import build_parser, main


def test_usage_errors_exit_with_one():
    with pytest.raises(SystemExit) as info:
        main(['frobnicate'])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(['gaze', '--out', 'x.csv'])
    assert info.value.code == 1


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(['--version'])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_features_uses_override_flag():
    args = build_parser().parse_args(['features', '--epochs', 'e.bin', '--set', 'srp+gaze', '--out', 'f.csv',
                                      '--override', 'seed=3'])
    assert args.feature_set == 'srp+gaze'
    assert args.overrides == ['seed=3']


def test_missing_recording(tmp_path):
    assert main(['gaze', '--in', str(tmp_path / 'absent'), '--out', str(tmp_path / 'fix.csv')]) == 1


def test_invalid_config(recording_dir, tmp_path):
    out = str(tmp_path / 'fix.csv')
    assert main(['gaze', '--in', str(recording_dir), '--out', out, '--set', 'gaze.nope=1']) == 1
    assert main(['gaze', '--in', str(recording_dir), '--out', out, '--set', 'gaze.velocity_window_ms']) == 1
    assert main(['features', '--epochs', str(tmp_path / 'e.bin'), '--set', 'bogus', '--out', out]) == 1


def test_gaze_stage(recording_dir, tmp_path):
    out = tmp_path / 'fixations' / 'P01.csv'
    assert main(['gaze', '--in', str(recording_dir), '--out', str(out), '--seed', '5']) == 0
    frame = pd.read_csv(out)
    assert set(frame['kind']) == {'fixation', 'saccade'}
    assert frame['onset_ms'].is_monotonic_increasing
    config = yaml.safe_load((out.parent / 'config.yaml').read_text(encoding='utf-8'))
    assert config['seed'] == 5


@pytest.mark.slow
def test_eeg_features_train(recording_dir, tmp_path):
    epochs = tmp_path / 'epochs' / 'epochs.bin'
    assert main(['eeg', '--in', str(recording_dir), '--out', str(epochs), '--jobs', '1']) == 0
    assert epochs.is_file()
    features = tmp_path / 'features' / 'features.csv'
    assert main(['features', '--epochs', str(epochs), '--set', 'srp+gaze', '--out', str(features)]) == 0
    frame = pd.read_csv(features)
    assert list(frame.columns[:4]) == ['participant_id', 'trial_id', 'scene_domain', 'label']
    assert frame.columns[-1] == 'fix_dur_ms'
    assert set(frame['label']) == {'target', 'nontarget'}
    model = tmp_path / 'model' / 'model.json'
    assert main(['train', '--features', str(features), '--out', str(model), '--jobs', '1',
                 '--set', 'learn.inner_folds=3', '--set', 'learn.c_values=[1.0]']) == 0
    assert model.is_file()
    assert len(pd.read_csv(tmp_path / 'model' / 'model_grid.csv')) == 6


@pytest.mark.slow
def test_all(tmp_path):
    argv = ['all', '--out', str(tmp_path), '--seed', '11', '--jobs', '1',
            '--set', 'synth.n_participants=2', '--set', 'synth.trials_per_participant=24',
            '--set', 'eval.conditions=[both>both]', '--set', 'eval.feature_sets=[gaze, fusion]',
            '--set', 'learn.inner_folds=3', '--set', 'learn.c_values=[1.0]', '--set', 'eval.folds=3']
    assert main(argv) == 0
    for name in ('data/P01/gaze.csv', 'data/P02/truth.json', 'fixations/P02.csv', 'epochs/epochs.bin',
                 'features/features.csv', 'model/model.json', 'report/report.csv', 'report/report.json',
                 'report/config.yaml'):
        assert (tmp_path / name).is_file(), name
    frame = pd.read_csv(tmp_path / 'report' / 'report.csv')
    assert len(frame) == 4
    assert set(zip(frame['split'], frame['feature_set'])) == {
        ('within_user', 'gaze'), ('within_user', 'fusion'), ('cross_user', 'gaze'), ('cross_user', 'fusion')}
    assert frame['mean_accuracy'].between(0.0, 1.0).all()


@pytest.fixture
def broken_recording(recording_dir, tmp_path):
    """A writable copy of the session recording."""
    return Path(shutil.copytree(recording_dir, tmp_path / 'P01'))


@pytest.mark.parametrize('name,content', [
    ('meta.json', '{not json'),
    ('meta.json', '[1, 2]'),
    ('meta.json', '{"channels": 5}'),
    ('events.jsonl', '{"trial_id": '),
    ('gaze.csv', 't_ms,x\n"unterminated\n'),
    ('eeg.csv', ''),
])
def test_malformed_recording_exits_with_one(broken_recording, tmp_path, name, content):
    (broken_recording / name).write_text(content, encoding='utf-8')
    assert main(['gaze', '--in', str(broken_recording), '--out', str(tmp_path / 'fix.csv')]) == 1


def test_malformed_inputs_of_later_stages(tmp_path):
    features = tmp_path / 'features.csv'
    features.write_text('participant_id,trial_id,scene_domain,label,fix_dur_ms\nP01,0,indoor,target,long\n',
                        encoding='utf-8')
    assert main(['train', '--features', str(features), '--out', str(tmp_path / 'model.json')]) == 1
    report_json = tmp_path / 'report.json'
    report_json.write_bytes(b'\xff\xfe\x00')
    assert main(['report', '--in', str(report_json), '--out', str(tmp_path / 'report')]) == 1
    epochs = tmp_path / 'epochs.bin'
    epochs.write_bytes(b'GZEPOCH1\x01')
    assert main(['features', '--epochs', str(epochs), '--set', 'gaze', '--out', str(tmp_path / 'f.csv')]) == 1


def test_unexpected_errors_exit_with_two(recording_dir, tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise KeyError('boom')

    monkeypatch.setattr('gazeeg.cli.detect_fixations', fail)
    assert main(['gaze', '--in', str(recording_dir), '--out', str(tmp_path / 'fix.csv')]) == 2


def test_train_balances_rows(tmp_path, monkeypatch):
    rng = np.random.default_rng(3)
    labels = ['target'] * 6 + ['nontarget'] * 18
    frame = pd.DataFrame({'participant_id': 'P01', 'trial_id': range(24), 'scene_domain': 'indoor',
                          'label': labels,
                          'fix_dur_ms': [400.0 if label == 'target' else 200.0 for label in labels]
                          + rng.normal(0.0, 5.0, 24)})
    features = tmp_path / 'features.csv'
    frame.to_csv(features, index=False)
    seen = {}

    class Model:
        def save(self, path):
            path.write_text('{}', encoding='utf-8')

    def capture(block, labels, config):
        seen['labels'] = list(labels)
        seen['values'] = block.values.copy()
        return Model(), [{'kernel': 'linear', 'C': 1.0, 'accuracy': 1.0}]

    monkeypatch.setattr('gazeeg.cli.train_model', capture)
    assert main(['train', '--features', str(features), '--out', str(tmp_path / 'model.json'), '--jobs', '1']) == 0
    assert seen['labels'].count('target') == 6
    assert seen['labels'].count('nontarget') == 6
    assert seen['values'].shape == (12, 1)
    assert seen['labels'][:6] == ['target'] * 6
