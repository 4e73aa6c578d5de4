"""Ground truth, balancing, cross-validation splits and the evaluation conditions."""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedKFold

from . import feature_sets
from .config import PipelineConfig
from .core.epoch import Epoch, Observation
from .dataset import SCENE_DOMAINS, Recording, TrialEvent
from .eeg import epoch_fixations, epoch_srp, from_recording, preprocess
from .errors import ConfigError, TooFewSamples
from .gaze import Fixation, detect_fixations
from .learn import predict, train

LOG = logging.getLogger('gazeeg.evaluation')

SPLITS = ('within_user', 'cross_user')
DOMAIN_CODES = {'W': 'workshop', 'D': 'desktop'}
CANONICAL_CONDITIONS = ('both>both', 'W>W', 'D>W', 'WD>W', 'D>D', 'W>D', 'WD>D')
Z_95 = 1.96

# Accuracies published for the recording study, keyed by (split, condition, feature set).
REFERENCE_ACCURACY = {
    ('within_user', 'both>both', 'fusion'): 0.789,
    ('within_user', 'both>both', 'gaze'): 0.708,
    ('within_user', 'both>both', 'csp15'): 0.725,
    ('within_user', 'both>both', 'pyeeg'): 0.521,
    ('within_user', 'both>both', 'fusion_pyeeg'): 0.609,
    ('within_user', 'both>both', 'srp'): 0.534,
    ('cross_user', 'both>both', 'fusion'): 0.836,
    ('cross_user', 'both>both', 'srp'): 0.569,
    ('within_user', 'W>W', 'fusion'): 0.754,
    ('cross_user', 'W>W', 'fusion'): 0.819,
    ('cross_user', 'W>W', 'gaze'): 0.663,
    ('within_user', 'D>D', 'fusion'): 0.792,
    ('within_user', 'D>D', 'csp15'): 0.669,
    ('within_user', 'D>D', 'gaze'): 0.751,
    ('cross_user', 'D>D', 'fusion'): 0.830,
    ('cross_user', 'D>D', 'gaze'): 0.754,
}


@dataclass(frozen=True)
class LabeledFixation:
    fixation: Fixation
    label: str
    participant_id: str
    trial_id: int
    scene_domain: str
    n_objects: Optional[int] = None

    @property
    def is_target(self) -> bool:
        return self.label == 'target'


def label_fixations(fixations: Sequence[Fixation], events: Sequence[TrialEvent], participant_id: str = '',
                    include_unfound: bool = False) -> List[LabeledFixation]:
    """
    Target/non-target ground truth per trial.

    In a clicked trial the first fixation whose centroid lies in the target
    box is the target, earlier fixations are non-targets and later ones are
    dropped. Skipped trials and trials without an in-box fixation contribute
    nothing, unless ``include_unfound`` is set: then their out-of-box
    fixations count as non-targets.

    :param fixations: detected fixations
    :param events: trial events
    :param participant_id: stored with every labelled fixation
    :param include_unfound: keep fixations of unfound-target trials as non-targets
    :return: labelled fixations in time order
    """
    ordered = sorted(fixations, key=lambda fix: fix.onset_ms)
    labeled = []
    for event in sorted(events, key=lambda ev: ev.search_onset_ms):
        members = [fix for fix in ordered
                   if (fix.trial_id == event.trial_id) or (fix.trial_id is None and event.covers(fix.onset_ms))]

        def make(fix, label):
            return LabeledFixation(fix, label, participant_id, event.trial_id, event.scene_domain, event.n_objects)

        target = None
        if event.outcome == 'clicked':
            target = next((i for i, fix in enumerate(members) if event.contains(*fix.centroid_px)), None)
        if target is not None:
            labeled.extend(make(fix, 'nontarget') for fix in members[:target])
            labeled.append(make(members[target], 'target'))
        elif include_unfound:
            labeled.extend(make(fix, 'nontarget') for fix in members if not event.contains(*fix.centroid_px))
    return labeled


def _balance_indices(indices: np.ndarray, targets: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    indices = np.asarray(indices)
    positive = indices[targets[indices]]
    negative = indices[~targets[indices]]
    if positive.shape[0] == 0 or negative.shape[0] == 0:
        return np.sort(indices)
    if negative.shape[0] > positive.shape[0]:
        negative = rng.choice(negative, size=positive.shape[0], replace=False)
    elif positive.shape[0] > negative.shape[0]:
        positive = rng.choice(positive, size=negative.shape[0], replace=False)
    return np.sort(np.concatenate([positive, negative]))


def balanced_rows(is_target: Sequence[bool], seed: int = 0) -> np.ndarray:
    """Sorted row indices with the majority class uniformly subsampled to the minority count."""
    targets = np.asarray(is_target, dtype=bool)
    return _balance_indices(np.arange(targets.shape[0]), targets, np.random.default_rng(seed))


def balance(labeled: Sequence, seed: int = 0) -> List:
    """
    Uniformly subsample the majority class down to the minority count.

    :param labeled: items with an ``is_target`` property
    :param seed: subsampling seed
    :return: balanced items in their original order
    """
    return [labeled[i] for i in balanced_rows([item.is_target for item in labeled], seed)]


@dataclass(frozen=True)
class Condition:
    split: str
    train_domains: Tuple[str, ...]
    test_domain: str
    feature_set: str = 'fusion'

    @property
    def name(self) -> str:
        if self.test_domain == 'both':
            return 'both>both'
        codes = {value: key for key, value in DOMAIN_CODES.items()}
        return '{}>{}'.format(''.join(codes[domain] for domain in self.train_domains), codes[self.test_domain])

    def tests(self, domain: str) -> bool:
        return self.test_domain == 'both' or domain == self.test_domain

    def trains(self, domain: str) -> bool:
        return domain in self.train_domains


def parse_condition(name: str, split: str, feature_set: str) -> Condition:
    """Condition from its short name, e.g. ``'WD>D'`` or ``'both>both'``."""
    if split not in SPLITS:
        raise ConfigError("Unknown split '{}'.".format(split))
    train, _, test = name.partition('>')
    if name == 'both>both':
        return Condition(split, SCENE_DOMAINS, 'both', feature_set)
    if not train or test not in DOMAIN_CODES or any(code not in DOMAIN_CODES for code in train):
        raise ConfigError("Unknown condition '{}'.".format(name))
    domains = tuple(domain for domain in SCENE_DOMAINS if any(DOMAIN_CODES[code] == domain for code in train))
    return Condition(split, domains, DOMAIN_CODES[test], feature_set)


def conditions_from_config(config: PipelineConfig) -> List[Condition]:
    names = list(CANONICAL_CONDITIONS) if config.eval.conditions == ['all'] else list(config.eval.conditions)
    for identifier in config.eval.feature_sets:
        if identifier not in feature_sets:
            raise ConfigError("Unknown feature set '{}'; available: {}.".format(identifier, feature_sets))
    return [parse_condition(name, split, identifier)
            for split in config.eval.splits
            for name in names
            for identifier in config.eval.feature_sets]


@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    test: np.ndarray
    participant_id: Optional[str] = None
    test_participants: Tuple[str, ...] = ()


def make_splits(labeled: Sequence, condition: Condition, k: int = 10, seed: int = 0,
                min_targets: int = 10) -> List[Fold]:
    """
    Cross-validation folds with domain filters and per-side balancing.

    :param labeled: items with ``participant_id``, ``scene_domain`` and ``is_target``
    :param condition: split type and domain filters
    :param k: number of folds
    :param seed: fold and balancing seed
    :param min_targets: within-user participants with fewer targets are skipped
    :return: folds of balanced train and test indices into ``labeled``
    """
    participants = np.array([item.participant_id for item in labeled])
    domains = np.array([item.scene_domain for item in labeled])
    targets = np.array([item.is_target for item in labeled], dtype=bool)
    trains = np.array([condition.trains(domain) for domain in domains], dtype=bool)
    tests = np.array([condition.tests(domain) for domain in domains], dtype=bool)
    pool = trains | tests
    folds = []

    if condition.split == 'within_user':
        ids = sorted(set(participants[pool].tolist()))
        for p, participant in enumerate(ids):
            rows = np.flatnonzero(pool & (participants == participant))
            n_targets = int(targets[rows].sum())
            n_minority = min(n_targets, rows.shape[0] - n_targets)
            if n_targets < min_targets or n_minority < 2:
                LOG.warning("participant skipped id=%s targets=%d reason=too_few_targets", participant, n_targets)
                continue
            splitter = StratifiedKFold(min(k, n_minority), shuffle=True, random_state=seed)
            for f, (rest, held) in enumerate(splitter.split(rows, targets[rows])):
                rng = np.random.default_rng((seed, p, f))
                train = rows[rest][trains[rows[rest]]]
                test = rows[held][tests[rows[held]]]
                folds.append(Fold(_balance_indices(train, targets, rng), _balance_indices(test, targets, rng),
                                  participant, (participant,)))
        if not folds:
            raise TooFewSamples("No participant has at least {} targets for within-user folds.".format(min_targets))
        return folds

    if condition.split != 'cross_user':
        raise ConfigError("Unknown split '{}'.".format(condition.split))
    ids = np.array(sorted(set(participants[pool].tolist())))
    if ids.shape[0] < 2:
        raise TooFewSamples("Cross-user folds need at least 2 participants, got {}.".format(ids.shape[0]))
    rng = np.random.default_rng(seed)
    groups = np.array_split(rng.permutation(ids), min(k, ids.shape[0]))
    for f, group in enumerate(groups):
        held = np.isin(participants, group)
        fold_rng = np.random.default_rng((seed, f))
        train = np.flatnonzero(~held & trains)
        test = np.flatnonzero(held & tests)
        folds.append(Fold(_balance_indices(train, targets, fold_rng), _balance_indices(test, targets, fold_rng),
                          None, tuple(sorted(group.tolist()))))
    return folds


@dataclass
class FoldResult:
    accuracy: float
    n_train: int
    n_test: int
    spec: str
    participant_id: Optional[str]
    object_outcomes: List[Tuple[int, bool]] = field(default_factory=list)


@dataclass
class ConditionResult:
    condition: Condition
    fold_accuracies: List[float]
    mean: float
    ci_half: float
    n_train: int
    n_test: int
    hyperparameters: str
    seed: int
    n_participants: int
    reference_accuracy: Optional[float] = None
    object_outcomes: List[Tuple[int, bool]] = field(default_factory=list)

    @property
    def ci_low(self) -> float:
        return max(0.0, self.mean - self.ci_half)

    @property
    def ci_high(self) -> float:
        return min(1.0, self.mean + self.ci_half)

    def to_row(self) -> Dict:
        return {'split': self.condition.split,
                'condition': self.condition.name,
                'train_domains': '+'.join(self.condition.train_domains),
                'test_domain': self.condition.test_domain,
                'feature_set': self.condition.feature_set,
                'mean_accuracy': round(self.mean, 6),
                'ci_low': round(self.ci_low, 6),
                'ci_high': round(self.ci_high, 6),
                'n_folds': len(self.fold_accuracies),
                'n_participants': self.n_participants,
                'n_train': self.n_train,
                'n_test': self.n_test,
                'hyperparameters': self.hyperparameters,
                'seed': self.seed,
                'reference_accuracy': self.reference_accuracy,
                'fold_accuracies': ' '.join('{:.6f}'.format(acc) for acc in self.fold_accuracies)}


def _labels(observations: Sequence[Observation]) -> np.ndarray:
    return np.array([1 if observation.is_target else -1 for observation in observations])


def fit_and_score(train_obs: Sequence[Observation], test_obs: Sequence[Observation], identifier: str,
                  config: PipelineConfig, seed: int) -> Tuple[float, str, np.ndarray]:
    """Fit feature set, scalers and classifier on the training side; accuracy on the test side."""
    feature_set = feature_sets[identifier](config.features, train_obs[0].frp.channels)
    if feature_set.requires_fit():
        feature_set.fit(train_obs)
    model, _ = train(feature_set.blocks(train_obs), _labels(train_obs), config.learn, seed, jobs=1)
    X_test = np.hstack([block.values for block in feature_set.blocks(test_obs)])
    correct = predict(model, X_test) == _labels(test_obs)
    return float(correct.mean()), model.spec.describe(), correct


def _run_fold(observations, fold: Fold, identifier, config, seed) -> Optional[FoldResult]:
    train_obs = [observations[i] for i in fold.train]
    test_obs = [observations[i] for i in fold.test]
    labels = {observation.label for observation in train_obs}
    if len(labels) < 2 or not test_obs:
        LOG.warning("fold skipped participant=%s train=%d test=%d reason=empty_side",
                    fold.participant_id, len(train_obs), len(test_obs))
        return None
    try:
        accuracy, spec, correct = fit_and_score(train_obs, test_obs, identifier, config, seed)
    except TooFewSamples as err:
        LOG.warning("fold skipped participant=%s reason=%s", fold.participant_id, err)
        return None
    outcomes = [(obs.n_objects, bool(ok)) for obs, ok in zip(test_obs, correct) if obs.n_objects is not None]
    return FoldResult(accuracy, len(train_obs), len(test_obs), spec, fold.participant_id, outcomes)


def run_condition(observations: Sequence[Observation], condition: Condition,
                  config: Optional[PipelineConfig] = None, seed: Optional[int] = None, jobs: Optional[int] = None
                  ) -> ConditionResult:
    """
    Cross-validated accuracy of one condition.

    Every fold fits features, scalers and the grid search on its training
    side only. Cross-user CIs are taken over folds, within-user CIs over
    participant means.

    :param observations: labelled observations of all participants
    :param condition: split, domains and feature set
    :param config: pipeline config
    :param seed: split seed (default: ``config.seed``)
    :param jobs: parallel folds (default: ``config.resolved_jobs``)
    :return: aggregated result
    """
    config = config or PipelineConfig()
    seed = config.seed if seed is None else seed
    jobs = config.resolved_jobs if jobs is None else jobs
    checker = feature_sets[condition.feature_set](config.features, observations[0].frp.channels)
    usable = [observation for observation in observations if checker.usable(observation)]
    if len(usable) < len(observations):
        LOG.info("condition=%s feature_set=%s unusable=%d", condition.name, condition.feature_set,
                 len(observations) - len(usable))
    folds = make_splits(usable, condition, config.eval.folds, seed, config.eval.min_targets)
    results = Parallel(n_jobs=jobs)(delayed(_run_fold)(usable, fold, condition.feature_set, config, seed)
                                    for fold in folds)
    results = [result for result in results if result is not None]
    if not results:
        raise TooFewSamples("No fold of condition {} {} could be evaluated.".format(condition.split, condition.name))

    accuracies = [result.accuracy for result in results]
    if condition.split == 'within_user':
        per_participant: Dict[str, List[float]] = {}
        for result in results:
            per_participant.setdefault(result.participant_id, []).append(result.accuracy)
        samples = np.array([np.mean(values) for values in per_participant.values()])
        n_participants = len(per_participant)
    else:
        samples = np.array(accuracies)
        n_participants = len({p for fold in folds for p in fold.test_participants})
    mean = float(samples.mean())
    ci_half = float(Z_95 * samples.std(ddof=1) / np.sqrt(samples.shape[0])) if samples.shape[0] > 1 else 0.0
    specs = Counter(result.spec for result in results)
    hyperparameters = '; '.join('{} x{}'.format(spec, count) for spec, count in sorted(
        specs.items(), key=lambda item: (-item[1], item[0])))
    LOG.info("condition split=%s name=%s feature_set=%s accuracy=%.3f folds=%d",
             condition.split, condition.name, condition.feature_set, mean, len(results))
    return ConditionResult(condition=condition,
                           fold_accuracies=accuracies,
                           mean=mean,
                           ci_half=ci_half,
                           n_train=int(round(np.mean([result.n_train for result in results]))),
                           n_test=int(sum(result.n_test for result in results)),
                           hyperparameters=hyperparameters,
                           seed=seed,
                           n_participants=n_participants,
                           reference_accuracy=REFERENCE_ACCURACY.get(
                               (condition.split, condition.name, condition.feature_set)),
                           object_outcomes=[pair for result in results for pair in result.object_outcomes])


def evaluate(observations: Sequence[Observation], config: Optional[PipelineConfig] = None,
             jobs: Optional[int] = None) -> List[ConditionResult]:
    """Run every configured condition x split x feature set."""
    config = config or PipelineConfig()
    if not observations:
        raise TooFewSamples("No labelled observations to evaluate.")
    jobs = config.resolved_jobs if jobs is None else jobs
    return [run_condition(observations, condition, config, config.seed, jobs)
            for condition in conditions_from_config(config)]


def _annotated(epoch: Optional[Epoch], item: LabeledFixation, key: int) -> Optional[Epoch]:
    if epoch is None:
        return None
    return Epoch(epoch.data, epoch.sample_rate_hz, epoch.channels, epoch.onset_ms, epoch.duration_ms,
                 kind=epoch.kind, label=item.label, trial_id=item.trial_id, participant_id=item.participant_id,
                 scene_domain=item.scene_domain, key=key)


def prepare_recording(recording: Recording, config: Optional[PipelineConfig] = None) -> List[Observation]:
    """
    Gaze and EEG pipeline of one recording: labelled fixations with their FRP and SRP epochs.

    Fixations whose fixation-locked epoch falls outside the EEG, or is shorter
    than the CSP and feature guards admit, are dropped.
    """
    config = config or PipelineConfig()
    fixations, saccades = detect_fixations(recording.gaze, config.gaze, recording.screen, recording.events)
    labeled = label_fixations(fixations, recording.events, recording.participant_id, config.eval.include_unfound)
    cleaned = preprocess(from_recording(recording), config.eeg)
    chosen = [item.fixation for item in labeled]
    frp = epoch_fixations(cleaned.eeg, chosen)
    srp = epoch_srp(cleaned.eeg, chosen, saccades, config.eeg.srp_length_ms)
    shortest = max(config.features.min_epoch_samples, len(recording.channels))
    observations, short = [], 0
    for key, (item, frp_epoch, srp_epoch) in enumerate(zip(labeled, frp.epochs, srp.epochs)):
        if frp_epoch is None:
            continue
        if frp_epoch.n_samples < shortest:
            short += 1
            continue
        observations.append(Observation(key=key,
                                        participant_id=item.participant_id,
                                        trial_id=item.trial_id,
                                        scene_domain=item.scene_domain,
                                        label=item.label,
                                        fixation_ms=item.fixation.duration_ms,
                                        frp=_annotated(frp_epoch, item, key),
                                        srp=_annotated(srp_epoch, item, key),
                                        n_objects=item.n_objects))
    n_targets = sum(observation.is_target for observation in observations)
    LOG.info("prepared participant=%s fixations=%d labeled=%d targets=%d nontargets=%d short=%d bad=%s",
             recording.participant_id, len(fixations), len(labeled), n_targets,
             len(observations) - n_targets, short, ",".join(cleaned.bad_channels) or "-")
    return observations


def prepare_observations(recordings: Sequence[Recording], config: Optional[PipelineConfig] = None,
                         jobs: Optional[int] = None) -> List[Observation]:
    """:func:`prepare_recording` over many recordings in parallel, concatenated in input order."""
    config = config or PipelineConfig()
    jobs = config.resolved_jobs if jobs is None else jobs
    per_recording = Parallel(n_jobs=jobs)(delayed(prepare_recording)(recording, config) for recording in recordings)
    return [observation for observations in per_recording for observation in observations]
