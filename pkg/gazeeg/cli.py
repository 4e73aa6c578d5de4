"""Command line interface: ``gazeeg <stage> [options]``."""
import argparse
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__, feature_sets
from .config import PipelineConfig, load_config, parse_assignment
from .core import FeatureBlock
from .core.functions import epochs_read, epochs_write, features, load, train_model
from .dataset import read_table
from .errors import ConfigError, GazeegError, MissingFile, SchemaError, ValidationError
from .evaluation import balanced_rows, evaluate, prepare_observations
from .gaze import detect_fixations, events_frame
from .report import load_report, report
from .synth import generate

LOG = logging.getLogger('gazeeg.cli')

META_COLUMNS = ['participant_id', 'trial_id', 'scene_domain', 'label']


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, "{}: error: {}\n".format(self.prog, message))


@contextmanager
def _stage(name: str):
    start = time.perf_counter()
    yield
    LOG.info("stage=%s seconds=%.2f", name, time.perf_counter() - start)


def _dump(config: PipelineConfig, out: Path) -> Path:
    """Write config.yaml into the directory of an output file or into an output directory."""
    directory = out if out.suffix == '' else out.parent
    return config.dump(directory)


def _check_sets(identifiers: Sequence[str]):
    unknown = [identifier for identifier in identifiers if identifier not in feature_sets]
    if unknown:
        raise ConfigError("Unknown feature set(s) {}; known: {}.".format(", ".join(unknown), feature_sets))


def run_synth(config: PipelineConfig, out: Path) -> List[Path]:
    with _stage('synth'):
        paths = generate(config, out)
    _dump(config, out)
    return paths


def run_gaze(config: PipelineConfig, source: Path, out: Path) -> pd.DataFrame:
    with _stage('gaze'):
        recording = load(source)
        fixations, saccades = detect_fixations(recording.gaze, config.gaze, recording.screen, recording.events)
        frame = events_frame(fixations, saccades)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, lineterminator='\n')
    _dump(config, out)
    return frame


def run_eeg(config: PipelineConfig, sources: Sequence[Path], out: Path):
    with _stage('eeg'):
        recordings = [load(source) for source in sources]
        observations = prepare_observations(recordings, config)
        out.parent.mkdir(parents=True, exist_ok=True)
        epochs_write(out, observations, provenance={'config': config.flat(), 'seed': config.seed,
                                                    'version': __version__,
                                                    'recordings': [rec.participant_id for rec in recordings]})
    _dump(config, out)
    return observations


def run_features(config: PipelineConfig, epochs: Path, identifier: str, out: Path) -> pd.DataFrame:
    _check_sets([identifier])
    with _stage('features'):
        observations = epochs_read(epochs)
        if not observations:
            raise SchemaError("Epoch file '{}' holds no observations.".format(epochs))
        checker = feature_sets[identifier](config.features, observations[0].frp.channels)
        usable = [observation for observation in observations if checker.usable(observation)]
        block = features(usable, identifier, config)
        frame = pd.DataFrame(block.values, columns=list(block.schema))
        meta = pd.DataFrame([[obs.participant_id, obs.trial_id, obs.scene_domain, obs.label] for obs in usable],
                            columns=META_COLUMNS)
        frame = pd.concat([meta, frame], axis=1)
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, lineterminator='\n')
    _dump(config, out)
    return frame


def read_features(path: Path) -> Tuple[FeatureBlock, List[str]]:
    """Feature block and labels of a features.csv file."""
    if not path.is_file():
        raise MissingFile("Feature file '{}' does not exist.".format(path))
    frame = read_table(path)
    if list(frame.columns[:len(META_COLUMNS)]) != META_COLUMNS:
        raise SchemaError("'{}' does not start with the columns {}.".format(path, META_COLUMNS))
    schema = tuple(frame.columns[len(META_COLUMNS):])
    try:
        values = frame[list(schema)].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as error:
        raise SchemaError("'{}' has non-numeric feature values: {}".format(path, error)) from error
    return FeatureBlock(schema, values), frame['label'].tolist()


def run_train(config: PipelineConfig, source: Path, out: Path):
    with _stage('train'):
        block, labels = read_features(source)
        keep = balanced_rows([label == 'target' for label in labels], config.seed)
        LOG.info("train rows=%d balanced=%d", len(labels), keep.shape[0])
        block = FeatureBlock(block.schema, block.values[keep])
        model, table = train_model(block, [labels[i] for i in keep], config)
        model.save(out)
        pd.DataFrame(table).to_csv(out.with_name(out.stem + '_grid.csv'), index=False, lineterminator='\n')
    _dump(config, out)
    return model


def run_eval(config: PipelineConfig, observations, out: Path) -> List[Path]:
    _check_sets(config.eval.feature_sets)
    with _stage('eval'):
        results = evaluate(observations, config)
    with _stage('report'):
        written = report(results, out, svg=config.eval.svg, object_curve=config.eval.object_curve,
                         object_bins=config.eval.object_bins)
    _dump(config, out)
    return written


def run_all(config: PipelineConfig, out: Path) -> List[Path]:
    paths = run_synth(config, out / 'data')
    for path in paths:
        run_gaze(config, path, out / 'fixations' / '{}.csv'.format(path.name))
    epochs = out / 'epochs' / 'epochs.bin'
    observations = run_eeg(config, paths, epochs)
    identifier = 'fusion' if 'fusion' in config.eval.feature_sets else config.eval.feature_sets[0]
    run_features(config, epochs, identifier, out / 'features' / 'features.csv')
    run_train(config, out / 'features' / 'features.csv', out / 'model' / 'model.json')
    return run_eval(config, observations, out / 'report')


def _common(override_flag: str = '--set') -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', '--params', dest='config', type=Path, help="flat YAML config file")
    common.add_argument(override_flag, dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help="override a config key, may be repeated")
    common.add_argument('--seed', type=int, help="master seed")
    common.add_argument('--jobs', type=int, help="worker count (default: physical cores)")
    common.add_argument('--include-unfound', action='store_true', default=None,
                        help="count fixations of unfound-target trials as non-targets")
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return common


def build_parser() -> ArgumentParser:
    common = _common()

    parser = ArgumentParser(prog='gazeeg', description="Target vs. non-target fixation classification "
                                                       "from synchronized eye tracking and EEG.")
    parser.add_argument('--version', action='version', version='%(prog)s {}'.format(__version__))
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    sub = commands.add_parser('synth', parents=[common], help="generate synthetic recordings")
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('gaze', parents=[common], help="detect fixations of one recording")
    sub.add_argument('--in', dest='source', type=Path, required=True)
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('eeg', parents=[common], help="clean EEG and cut labelled epochs")
    sub.add_argument('--in', dest='sources', type=Path, nargs='+', required=True)
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('features', parents=[_common('--override')], help="compute a feature set from epochs")
    sub.add_argument('--epochs', type=Path, required=True)
    sub.add_argument('--set', dest='feature_set', required=True)
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('train', parents=[common],
                              help="grid-search and fit a classifier on class-balanced rows")
    sub.add_argument('--features', dest='source', type=Path, required=True)
    sub.add_argument('--grid', default='default', choices=['default'])
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('eval', parents=[common], help="evaluate conditions and write the report")
    inputs = sub.add_mutually_exclusive_group(required=True)
    inputs.add_argument('--data', type=Path, nargs='+', help="recording directories")
    inputs.add_argument('--epochs', type=Path, help="epoch container written by 'gazeeg eeg'")
    sub.add_argument('--conditions', nargs='+')
    sub.add_argument('--features', dest='feature_sets', nargs='+')
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('report', parents=[common], help="render a saved report.json")
    sub.add_argument('--in', dest='source', type=Path, required=True)
    sub.add_argument('--out', type=Path, required=True)

    sub = commands.add_parser('all', parents=[common], help="synth, gaze, eeg, features, train, eval and report")
    sub.add_argument('--out', type=Path, required=True)
    return parser


def _config(args) -> PipelineConfig:
    overrides: Dict[str, object] = dict(parse_assignment(text) for text in args.overrides)
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.jobs is not None:
        overrides['jobs'] = args.jobs
    if args.include_unfound:
        overrides['eval.include_unfound'] = True
    if getattr(args, 'conditions', None):
        overrides['eval.conditions'] = list(args.conditions)
    if getattr(args, 'feature_sets', None):
        overrides['eval.feature_sets'] = list(args.feature_sets)
    return load_config(args.config, overrides)


def _dispatch(args, config: PipelineConfig):
    if args.command == 'synth':
        run_synth(config, args.out)
    elif args.command == 'gaze':
        run_gaze(config, args.source, args.out)
    elif args.command == 'eeg':
        run_eeg(config, args.sources, args.out)
    elif args.command == 'features':
        run_features(config, args.epochs, args.feature_set, args.out)
    elif args.command == 'train':
        run_train(config, args.source, args.out)
    elif args.command == 'eval':
        if args.epochs is not None:
            observations = epochs_read(args.epochs)
        else:
            with _stage('prepare'):
                observations = prepare_observations([load(path) for path in args.data], config)
        run_eval(config, observations, args.out)
    elif args.command == 'report':
        cfg = config.eval
        report(load_report(args.source), args.out, svg=cfg.svg, object_curve=cfg.object_curve,
               object_bins=cfg.object_bins)
    elif args.command == 'all':
        with _stage('all'):
            run_all(config, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line interface.

    :param argv: arguments without the program name (default: ``sys.argv[1:]``)
    :return: exit code, 0 on success, 1 on invalid input, 2 on runtime failure
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s %(message)s')
    try:
        config = _config(args)
        LOG.info("command=%s seed=%d jobs=%d", args.command, config.seed, config.resolved_jobs)
        _dispatch(args, config)
    except ValidationError as error:
        LOG.error("invalid input error=%s message=%s", type(error).__name__, error)
        return 1
    except GazeegError as error:
        LOG.error("failed error=%s message=%s", type(error).__name__, error)
        return 2
    except Exception as error:
        LOG.exception("unexpected error=%s message=%s", type(error).__name__, error)
        return 2
    return 0
