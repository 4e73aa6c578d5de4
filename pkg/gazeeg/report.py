"""Report files: CSV and JSON tables, accuracy bar charts and the object-count curve."""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib
matplotlib.use('Agg')
from matplotlib.figure import Figure  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .dataset import read_json  # noqa: E402
from .errors import MissingFile, NothingToReport, SchemaError  # noqa: E402
from .evaluation import CANONICAL_CONDITIONS, ConditionResult, Z_95  # noqa: E402

LOG = logging.getLogger('gazeeg.report')

COLUMNS = ['split', 'condition', 'train_domains', 'test_domain', 'feature_set', 'mean_accuracy',
           'ci_low', 'ci_high', 'n_folds', 'n_participants', 'n_train', 'n_test', 'hyperparameters', 'seed',
           'reference_accuracy', 'fold_accuracies']

matplotlib.rcParams['svg.hashsalt'] = 'gazeeg'
matplotlib.rcParams['svg.fonttype'] = 'none'


def _as_row(item: Union[ConditionResult, Dict]) -> Dict:
    if isinstance(item, ConditionResult):
        row = item.to_row()
        row['object_outcomes'] = [[int(n), bool(ok)] for n, ok in item.object_outcomes]
        return row
    missing = [column for column in COLUMNS if column not in item]
    if missing:
        raise SchemaError("Report row lacks column(s) {}.".format(", ".join(missing)))
    return dict(item)


def _condition_order(name: str) -> int:
    return CANONICAL_CONDITIONS.index(name) if name in CANONICAL_CONDITIONS else len(CANONICAL_CONDITIONS)


def report(results: Sequence[Union[ConditionResult, Dict]], out: Union[str, Path], svg: bool = True,
           object_curve: bool = True, object_bins: int = 5) -> List[Path]:
    """
    Write report.csv, report.json and optional SVG charts.

    :param results: condition results or rows of a saved report.json
    :param out: output directory
    :param svg: render accuracy bar charts
    :param object_curve: render the accuracy-vs-object-count curve when counts are present
    :param object_bins: number of object-count bins
    :return: written files
    """
    rows = [_as_row(item) for item in results]
    if not rows:
        raise NothingToReport("There are no evaluation results to report.")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    frame = pd.DataFrame([{column: row[column] for column in COLUMNS} for row in rows], columns=COLUMNS)
    written = [out / 'report.csv', out / 'report.json']
    frame.to_csv(written[0], index=False, lineterminator='\n')
    written[1].write_text(json.dumps({'rows': rows}, indent=2, sort_keys=True) + "\n", encoding='utf-8')

    if svg:
        for split in sorted(frame['split'].unique()):
            path = out / 'accuracy_{}.svg'.format(split)
            _bar_chart(frame[frame['split'] == split], split, path)
            written.append(path)
    if object_curve:
        chosen = _curve_row(rows)
        if chosen is not None:
            curve = object_count_curve(chosen['object_outcomes'], object_bins)
            path = out / 'object_curve.csv'
            curve.to_csv(path, index=False, lineterminator='\n')
            written.append(path)
            if svg:
                svg_path = out / 'object_curve.svg'
                _curve_chart(curve, chosen, svg_path)
                written.append(svg_path)
    LOG.info("report rows=%d files=%d out=%s", len(rows), len(written), out)
    return written


def load_report(path: Union[str, Path]) -> List[Dict]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile("Report '{}' does not exist.".format(path))
    data = read_json(path)
    if not isinstance(data, dict) or 'rows' not in data:
        raise SchemaError("'{}' is not a gazeeg report.".format(path))
    return data['rows']


def _curve_row(rows: Sequence[Dict]) -> Optional[Dict]:
    candidates = [row for row in rows if row.get('object_outcomes')]
    if not candidates:
        return None
    for row in candidates:
        if (row['split'], row['condition'], row['feature_set']) == ('cross_user', 'both>both', 'fusion'):
            return row
    return max(candidates, key=lambda row: len(row['object_outcomes']))


def object_count_curve(outcomes: Sequence, bins: int = 5) -> pd.DataFrame:
    """
    Accuracy per object-count bin with a normal-approximation binomial CI.

    :param outcomes: (n_objects, correct) pairs
    :param bins: number of equal-width bins over the observed count range
    """
    counts = np.array([int(n) for n, _ in outcomes])
    correct = np.array([bool(ok) for _, ok in outcomes])
    lo, hi = counts.min(), counts.max()
    edges = np.linspace(lo, hi + 1, min(bins, hi - lo + 1) + 1)
    index = np.clip(np.searchsorted(edges, counts, side='right') - 1, 0, edges.shape[0] - 2)
    rows = []
    for b in range(edges.shape[0] - 1):
        hits = correct[index == b]
        if hits.shape[0] == 0:
            continue
        accuracy = float(hits.mean())
        half = Z_95 * np.sqrt(accuracy * (1 - accuracy) / hits.shape[0])
        rows.append({'objects_from': int(np.ceil(edges[b])), 'objects_to': int(np.ceil(edges[b + 1])) - 1,
                     'n': int(hits.shape[0]), 'accuracy': round(accuracy, 6),
                     'ci_low': round(max(0.0, accuracy - half), 6), 'ci_high': round(min(1.0, accuracy + half), 6)})
    return pd.DataFrame(rows, columns=['objects_from', 'objects_to', 'n', 'accuracy', 'ci_low', 'ci_high'])


def _bar_chart(frame: pd.DataFrame, split: str, path: Path):
    conditions = sorted(frame['condition'].unique(), key=_condition_order)
    sets = list(dict.fromkeys(frame['feature_set']))
    width = 0.8 / max(1, len(sets))
    figure = Figure(figsize=(max(6.0, 1.4 * len(conditions)), 4.0))
    axes = figure.add_subplot(1, 1, 1)
    for s, feature_set in enumerate(sets):
        part = frame[frame['feature_set'] == feature_set].set_index('condition')
        x = np.array([c for c, name in enumerate(conditions) if name in part.index]) + (s - (len(sets) - 1) / 2) * width
        present = [name for name in conditions if name in part.index]
        means = part.loc[present, 'mean_accuracy'].to_numpy(dtype=float)
        errors = np.vstack([means - part.loc[present, 'ci_low'].to_numpy(dtype=float),
                            part.loc[present, 'ci_high'].to_numpy(dtype=float) - means])
        axes.bar(x, means, width, yerr=errors, capsize=2, label=feature_set)
        reference = pd.to_numeric(part.loc[present, 'reference_accuracy'], errors='coerce').to_numpy(dtype=float)
        axes.plot(x, reference, linestyle='none', marker='_', markersize=12, color='black')
    axes.axhline(0.5, color='grey', linewidth=0.8, linestyle='--')
    axes.set_xticks(np.arange(len(conditions)))
    axes.set_xticklabels(conditions)
    axes.set_ylim(0.0, 1.0)
    axes.set_ylabel('accuracy')
    axes.set_title(split.replace('_', '-'))
    axes.legend(fontsize='small', ncol=min(len(sets), 5))
    figure.tight_layout()
    figure.savefig(path, format='svg', metadata={'Date': None})


def _curve_chart(curve: pd.DataFrame, row: Dict, path: Path):
    figure = Figure(figsize=(6.0, 4.0))
    axes = figure.add_subplot(1, 1, 1)
    centres = 0.5 * (curve['objects_from'] + curve['objects_to'])
    axes.plot(centres, curve['accuracy'], marker='o')
    axes.fill_between(centres, curve['ci_low'], curve['ci_high'], alpha=0.3)
    axes.set_ylim(0.0, 1.0)
    axes.set_xlabel('objects in scene')
    axes.set_ylabel('accuracy')
    axes.set_title('{} {} {}'.format(row['split'], row['condition'], row['feature_set']))
    figure.tight_layout()
    figure.savefig(path, format='svg', metadata={'Date': None})
