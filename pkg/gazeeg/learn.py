"""Min-max scaling, early fusion, grid search and the persisted classifier."""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from .config import LearnConfig
from .core.featureset import FeatureBlock, FeatureVector, check_schema
from .dataset import read_json
from .errors import MissingFile, SchemaError, SchemaMismatch, TooFewSamples
from .svm import KERNELS, SvmModel, SvmSpec, svm_fit

LOG = logging.getLogger('gazeeg.learn')

MODEL_FORMAT = 'gazeeg-model'
MODEL_VERSION = 1


@dataclass(frozen=True)
class Scaler:
    minimum: np.ndarray
    maximum: np.ndarray
    clip_low: float = -0.5
    clip_high: float = 1.5

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (X - self.minimum) / safe, 0.0)
        return np.clip(scaled, self.clip_low, self.clip_high)


def fit_scaler(X: np.ndarray, clip_low: float = -0.5, clip_high: float = 1.5) -> Scaler:
    """Per-feature minimum and maximum of the training rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise TooFewSamples("Cannot fit a scaler without training rows.")
    if not np.all(np.isfinite(X)):
        raise ValueError("Scaler training data must be finite.")
    return Scaler(X.min(axis=0), X.max(axis=0), clip_low, clip_high)


def apply_scaler(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    return scaler.transform(X)


def fuse(*vectors: FeatureVector) -> FeatureVector:
    """Concatenate feature vectors of one observation (early fusion)."""
    if not vectors:
        raise ValueError("Nothing to fuse.")
    if len(vectors) == 1:
        return vectors[0]
    schema = tuple(name for vector in vectors for name in vector.schema)
    check_schema(schema)
    first = vectors[0]
    return FeatureVector(values=np.concatenate([vector.values for vector in vectors]), schema=schema,
                         label=first.label, participant_id=first.participant_id,
                         trial_id=first.trial_id, scene_domain=first.scene_domain)


def grid(config: LearnConfig = LearnConfig()) -> List[SvmSpec]:
    """
    The hyperparameter grid: C per linear and poly kernel, C x gamma for rbf.

    Poly cells always use gamma 'scale' with ``poly_degree`` and ``poly_coef0``;
    ``gamma_values`` only spans the rbf cells.
    """
    specs = []
    for kernel in KERNELS:
        if kernel not in config.kernels:
            continue
        for C in config.c_values:
            if kernel == 'linear':
                specs.append(SvmSpec('linear', C))
            elif kernel == 'poly':
                specs.append(SvmSpec('poly', C, 'scale', config.poly_degree, config.poly_coef0))
            else:
                specs.extend(SvmSpec('rbf', C, gamma) for gamma in config.gamma_values)
    return specs


def _score_cell(X, y, spec, splits, tol, max_iter) -> List[float]:
    scores = []
    for train, test in splits:
        model = svm_fit(X[train], y[train], spec, tol, max_iter)
        scores.append(float(np.mean(model.predict(X[test]) == y[test])))
    return scores


def grid_search(X: np.ndarray, y: np.ndarray, config: LearnConfig = LearnConfig(), seed: int = 0,
                jobs: int = 1) -> Tuple[SvmSpec, List[Dict]]:
    """
    Stratified k-fold grid search on training data only.

    The best cell has the highest mean accuracy; ties go to lower C, then
    kernel order linear < poly < rbf, then smaller resolved gamma.

    :param X: scaled training matrix
    :param y: labels in {+1, -1}
    :param config: grid and solver settings
    :param seed: fold shuffling seed
    :param jobs: parallel grid cells
    :return: best spec and one table row per grid cell
    """
    y = np.where(np.asarray(y) > 0, 1, -1)
    smallest = min(np.sum(y > 0), np.sum(y < 0))
    if smallest < 2:
        raise TooFewSamples("Grid search needs at least 2 samples per class, got {}.".format(smallest))
    folds = min(config.inner_folds, int(smallest))
    if folds < config.inner_folds:
        LOG.warning("grid_search folds reduced from=%d to=%d", config.inner_folds, folds)
    splits = list(StratifiedKFold(folds, shuffle=True, random_state=seed).split(X, y))
    specs = grid(config)
    scores = Parallel(n_jobs=jobs)(delayed(_score_cell)(X, y, spec, splits, config.tol, config.max_iter)
                                   for spec in specs)
    table = []
    for spec, cell in zip(specs, scores):
        gamma = spec.resolve_gamma(X)
        table.append({'kernel': spec.kernel, 'C': spec.C,
                      'gamma': spec.gamma if spec.kernel != 'linear' else None,
                      'gamma_resolved': gamma,
                      'mean_accuracy': float(np.mean(cell)),
                      'std_accuracy': float(np.std(cell)),
                      'fold_accuracies': cell})

    def rank(item):
        spec, row = item
        return (-round(row['mean_accuracy'], 12), spec.C, KERNELS.index(spec.kernel),
                row['gamma_resolved'] if row['gamma_resolved'] is not None else 0.0)

    best, row = min(zip(specs, table), key=rank)
    LOG.debug("grid_search best=%s accuracy=%.3f", best.describe(), row['mean_accuracy'])
    return best, table


@dataclass
class FittedModel:
    svm: SvmModel
    scalers: List[Scaler]
    blocks: List[Tuple[str, ...]]

    @property
    def schema(self) -> Tuple[str, ...]:
        return tuple(name for block in self.blocks for name in block)

    @property
    def spec(self) -> SvmSpec:
        return self.svm.spec

    def scale(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.schema):
            raise SchemaMismatch("Model expects {} features, got {}.".format(len(self.schema), X.shape[1]))
        parts, start = [], 0
        for scaler, block in zip(self.scalers, self.blocks):
            parts.append(scaler.transform(X[:, start:start + len(block)]))
            start += len(block)
        return np.hstack(parts)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.svm.decision_function(self.scale(X))

    def to_dict(self) -> dict:
        svm = self.svm
        return {
            'format': MODEL_FORMAT,
            'version': MODEL_VERSION,
            'kernel': svm.spec.kernel,
            'C': svm.spec.C,
            'gamma': svm.spec.gamma,
            'gamma_resolved': svm.gamma,
            'degree': svm.spec.degree,
            'coef0': svm.spec.coef0,
            'rho': svm.rho,
            'converged': svm.converged,
            'support_vectors': svm.support_vectors.tolist(),
            'dual_coef': svm.dual_coef.tolist(),
            'scaler': {
                'clip': [self.scalers[0].clip_low, self.scalers[0].clip_high] if self.scalers else [-0.5, 1.5],
                'blocks': [{'schema': list(block), 'min': scaler.minimum.tolist(), 'max': scaler.maximum.tolist()}
                           for scaler, block in zip(self.scalers, self.blocks)],
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedModel":
        if data.get('format') != MODEL_FORMAT or data.get('version') != MODEL_VERSION:
            raise SchemaError("Not a gazeeg model (format {!r}, version {!r}).".format(
                data.get('format'), data.get('version')))
        spec = SvmSpec(data['kernel'], float(data['C']), data['gamma'], int(data['degree']), float(data['coef0']))
        n_features = sum(len(block['schema']) for block in data['scaler']['blocks'])
        support_vectors = np.asarray(data['support_vectors'], dtype=np.float64).reshape(-1, n_features)
        svm = SvmModel(spec=spec, gamma=data['gamma_resolved'],
                       support_vectors=support_vectors,
                       dual_coef=np.asarray(data['dual_coef'], dtype=np.float64),
                       rho=float(data['rho']), converged=bool(data['converged']))
        low, high = data['scaler']['clip']
        scalers = [Scaler(np.asarray(block['min'], dtype=np.float64), np.asarray(block['max'], dtype=np.float64),
                          low, high) for block in data['scaler']['blocks']]
        return cls(svm, scalers, [tuple(block['schema']) for block in data['scaler']['blocks']])

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding='utf-8')
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FittedModel":
        path = Path(path)
        if not path.is_file():
            raise MissingFile("Model file '{}' does not exist.".format(path))
        data = read_json(path)
        if not isinstance(data, dict):
            raise SchemaError("'{}' is not a gazeeg model.".format(path))
        try:
            return cls.from_dict(data)
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as error:
            raise SchemaError("Model file '{}' is malformed: {}".format(path, error)) from error


def scale_blocks(blocks: Sequence[FeatureBlock], config: LearnConfig = LearnConfig()
                 ) -> Tuple[np.ndarray, List[Scaler]]:
    """Fit one scaler per block and return the fused, scaled training matrix."""
    scalers = [fit_scaler(block.values, config.clip_low, config.clip_high) for block in blocks]
    return np.hstack([scaler.transform(block.values) for scaler, block in zip(scalers, blocks)]), scalers


def fit_model(blocks: Sequence[FeatureBlock], y: np.ndarray, spec: SvmSpec,
              config: LearnConfig = LearnConfig()) -> FittedModel:
    X, scalers = scale_blocks(blocks, config)
    svm = svm_fit(X, y, spec, config.tol, config.max_iter)
    return FittedModel(svm, scalers, [tuple(block.schema) for block in blocks])


def train(blocks: Sequence[FeatureBlock], y: np.ndarray, config: LearnConfig = LearnConfig(), seed: int = 0,
          jobs: int = 1) -> Tuple[FittedModel, List[Dict]]:
    """
    Scale per block, select hyperparameters by grid search and fit the final model.

    :param blocks: training feature blocks (rows aligned with ``y``)
    :param y: labels in {+1, -1}
    :return: fitted model and grid table
    """
    X, _ = scale_blocks(blocks, config)
    spec, table = grid_search(X, y, config, seed, jobs)
    return fit_model(blocks, y, spec, config), table


def predict(model: FittedModel, X: np.ndarray, schema: Optional[Sequence[str]] = None) -> np.ndarray:
    """
    Labels +1 (target) where the decision value is positive, -1 otherwise.

    :param model: fitted model
    :param X: raw (unscaled) feature matrix
    :param schema: feature names of ``X`` columns; checked against the model
    """
    if schema is not None and tuple(schema) != model.schema:
        raise SchemaMismatch("Feature schema does not match the model schema.")
    return np.where(model.decision_function(X) > 0, 1, -1)
