"""Per-channel univariate EEG features in the style of the PyEEG toolbox."""
from typing import Sequence, Tuple
import numpy as np
from .. import feature_sets
from ..core import Epoch, FeatureSet, FeatureVector
from ..errors import EpochTooShort
from ..measures import BANDS, band_power, dfa_alpha, higuchi_fd, hjorth, moments, petrosian_fd

MEASURES = tuple('{}_psi'.format(name) for name, _, _ in BANDS) + (
    'pfd', 'hjorth_mobility', 'hjorth_complexity', 'hfd', 'dfa',
    'skewness', 'kurtosis', 'min', 'max', 'std')


def pyeeg_schema(channels: Sequence[str]) -> Tuple[str, ...]:
    return tuple('{}.{}'.format(channel, measure) for channel in channels for measure in MEASURES)


def channel_features(x: np.ndarray, fs: float, kmax: int = 8) -> np.ndarray:
    mobility, complexity = hjorth(x)
    return np.concatenate([band_power(x, fs),
                           [petrosian_fd(x), mobility, complexity, higuchi_fd(x, kmax), dfa_alpha(x)],
                           moments(x)])


def pyeeg_features(epoch: Epoch, kmax: int = 8, min_samples: int = 16) -> FeatureVector:
    """
    15 features per channel, channel-major.

    :param epoch: EEG epoch
    :param kmax: Higuchi kmax
    :param min_samples: shortest admissible epoch
    """
    if epoch.n_samples < min_samples:
        raise EpochTooShort("Epoch of {} samples is shorter than {}.".format(epoch.n_samples, min_samples))
    values = np.concatenate([channel_features(row, epoch.sample_rate_hz, kmax) for row in epoch.data])
    return FeatureVector(values=values, schema=pyeeg_schema(epoch.channels), label=epoch.label,
                         participant_id=epoch.participant_id, trial_id=epoch.trial_id,
                         scene_domain=epoch.scene_domain)


class PyeegSet(FeatureSet):

    @staticmethod
    def identifier():
        return "pyeeg"

    @property
    def schema(self):
        return pyeeg_schema(self.channels)

    def compute(self, observation):
        return pyeeg_features(observation.frp, self._config.higuchi_kmax, self._config.min_epoch_samples).values


feature_sets.register(PyeegSet)
