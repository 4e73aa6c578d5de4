import json

import numpy as np
import pandas as pd
import pytest

from gazeeg.config import PipelineConfig
from gazeeg.errors import MissingFile, NothingToReport, SchemaError
from gazeeg.evaluation import ConditionResult, conditions_from_config
from gazeeg.report import COLUMNS, load_report, object_count_curve, report


def _results(seed=0):
    rng = np.random.default_rng(seed)
    results = []
    for condition in conditions_from_config(PipelineConfig()):
        folds = rng.uniform(0.5, 0.9, size=5).tolist()
        outcomes = [(int(n), bool(ok)) for n, ok in zip(rng.integers(5, 50, 40), rng.random(40) < 0.7)]
        results.append(ConditionResult(condition=condition, fold_accuracies=folds, mean=float(np.mean(folds)),
                                       ci_half=0.05, n_train=120, n_test=200, hyperparameters='linear C=1 x5',
                                       seed=7, n_participants=6, object_outcomes=outcomes))
    return results


def test_report_files(tmp_path):
    written = report(_results(), tmp_path / 'report')
    names = sorted(path.name for path in written)
    assert names == ['accuracy_cross_user.svg', 'accuracy_within_user.svg', 'object_curve.csv',
                     'object_curve.svg', 'report.csv', 'report.json']
    frame = pd.read_csv(tmp_path / 'report' / 'report.csv')
    assert list(frame.columns) == COLUMNS
    assert len(frame) == 70
    assert set(frame['split']) == {'within_user', 'cross_user'}
    assert b'\r\n' not in (tmp_path / 'report' / 'report.csv').read_bytes()


def test_report_is_reproducible(tmp_path):
    first = report(_results(), tmp_path / 'a')
    second = report(_results(), tmp_path / 'b')
    for a, b in zip(first, second):
        assert a.name == b.name
        assert a.read_bytes() == b.read_bytes()


def test_report_from_saved_json(tmp_path):
    report(_results(), tmp_path / 'a')
    rows = load_report(tmp_path / 'a' / 'report.json')
    assert len(rows) == 70
    report(rows, tmp_path / 'b', svg=False)
    assert (tmp_path / 'a' / 'report.csv').read_bytes() == (tmp_path / 'b' / 'report.csv').read_bytes()
    assert not (tmp_path / 'b' / 'accuracy_within_user.svg').exists()


def test_nothing_to_report(tmp_path):
    with pytest.raises(NothingToReport):
        report([], tmp_path)


def test_load_report_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_report(tmp_path / 'absent.json')
    path = tmp_path / 'list.json'
    path.write_text(json.dumps([1, 2]), encoding='utf-8')
    with pytest.raises(SchemaError):
        load_report(path)
    path.write_text(json.dumps({'rows': [{'split': 'cross_user'}]}), encoding='utf-8')
    with pytest.raises(SchemaError):
        report(load_report(path), tmp_path / 'out')


def test_object_count_curve():
    curve = object_count_curve([(5, True), (6, False), (20, True), (49, True)], bins=5)
    assert curve['objects_from'].tolist() == [5, 14, 41]
    assert curve['objects_to'].tolist() == [13, 22, 49]
    assert curve['n'].tolist() == [2, 1, 1]
    assert curve['accuracy'].tolist() == [0.5, 1.0, 1.0]
    assert curve['ci_low'][0] < 0.5 < curve['ci_high'][0]


def test_curve_prefers_cross_user_fusion(tmp_path):
    report(_results(), tmp_path)
    data = json.loads((tmp_path / 'report.json').read_text(encoding='utf-8'))
    assert all('object_outcomes' in row for row in data['rows'])
    svg = (tmp_path / 'object_curve.svg').read_text(encoding='utf-8')
    assert 'cross_user both&gt;both fusion' in svg or 'cross_user both>both fusion' in svg
