from typing import List, Optional, Sequence, Union
import numpy as np
from .. import feature_sets
from ..config import PipelineConfig
from ..dataset import load_recording, write_recording
from ..errors import TooFewSamples
from ..eeg import from_recording, preprocess as clean
from ..gaze import detect_fixations
from ..learn import FittedModel, train
from . import EpochReader, EpochWriter
from .epoch import Observation
from .featureset import FeatureBlock, split_blocks


def load(path):
    """
    Load and validate a recording directory.

    :param path: str, Path of the recording directory
    :return: recording
    """
    return load_recording(path)


def save(recording, path):
    """
    Write a recording directory.

    :param recording: recording
    :param path: str, Path of the target directory
    :return: directory path
    """
    return write_recording(recording, path)


def detect(recording, config: Optional[PipelineConfig] = None):
    """
    Detect fixations and saccades in the gaze stream of a recording.

    :param recording: recording
    :param config: pipeline config (default: built-in defaults)
    :return: fixations, saccades
    """
    config = config or PipelineConfig()
    return detect_fixations(recording.gaze, config.gaze, recording.screen, recording.events)


def preprocess(recording, config: Optional[PipelineConfig] = None):
    """
    Clean the EEG stream of a recording.

    :param recording: recording
    :param config: pipeline config (default: built-in defaults)
    :return: cleaned EEG, bad channels, rejected components, SOBI convergence
    """
    config = config or PipelineConfig()
    return clean(from_recording(recording), config.eeg)


def get_reader(file):
    """
    Get a reader for the given epoch container.

    :param file: str, Path, file handle
    :return: reader
    """
    return EpochReader(file)


def get_writer(file, channels: Sequence[str], sample_rate_hz: float, provenance: Optional[dict] = None):
    """
    Get a writer for an epoch container.

    :param file: str, Path, file handle
    :param channels: channel names of every epoch
    :param sample_rate_hz: EEG sample rate
    :param provenance: metadata stored in the header
    :return: writer
    """
    return EpochWriter(file, channels, sample_rate_hz, provenance)


def epochs_read(file, index=0, count=None) -> List[Observation]:
    """
    Read observations from the given epoch container.

    :param file: str, Path, file handle
    :param index: first observation index (default: 0)
    :param count: observation count (read all if None)
    :return: list of observations
    """
    reader = EpochReader(file)
    return reader.read(index, count)


def epochs_write(file, observations: Union[Observation, List[Observation]], provenance: Optional[dict] = None):
    """
    Write observations to an epoch container.

    :param file: str, Path, file handle
    :param observations: observation or list of observations sharing channels and rate
    :param provenance: metadata stored in the header
    """
    if isinstance(observations, Observation):
        observations = [observations]
    if not observations:
        raise TooFewSamples("Cannot write an empty epoch container.")
    first = observations[0].frp
    writer = EpochWriter(file, first.channels, first.sample_rate_hz, provenance)
    writer.write(observations)
    writer.close()


def features(observations: Sequence[Observation], identifier: str, config: Optional[PipelineConfig] = None,
             fit_on: Optional[Sequence[Observation]] = None) -> FeatureBlock:
    """
    Compute a feature set for the given observations.

    :param observations: observations to transform
    :param identifier: feature set identifier, 'a+b' for ad-hoc fusions
    :param config: pipeline config (default: built-in defaults)
    :param fit_on: observations to fit learnt sets on (default: ``observations``)
    :return: fused feature block
    """
    config = config or PipelineConfig()
    if not observations:
        raise TooFewSamples("No observations to compute features for.")
    feature_set = feature_sets[identifier](config.features, observations[0].frp.channels)
    if feature_set.requires_fit():
        feature_set.fit(fit_on if fit_on is not None else observations)
    return feature_set.transform(observations)


def train_model(blocks: Union[FeatureBlock, Sequence[FeatureBlock]], labels, config: Optional[PipelineConfig] = None):
    """
    Grid-search and fit a classifier.

    :param blocks: fused feature block (split by feature family) or per-modality blocks
    :param labels: 'target'/'nontarget' or +1/-1 per row
    :param config: pipeline config (default: built-in defaults)
    :return: fitted model, grid table
    """
    config = config or PipelineConfig()
    if isinstance(blocks, FeatureBlock):
        blocks = split_blocks(blocks)
    y = np.array([1 if label in ('target', 1) else -1 for label in labels])
    return train(blocks, y, config.learn, config.seed, config.resolved_jobs)


def load_model(path):
    """
    Load a model written by :meth:`gazeeg.learn.FittedModel.save`.

    :param path: str, Path of model.json
    :return: fitted model
    """
    return FittedModel.load(path)
