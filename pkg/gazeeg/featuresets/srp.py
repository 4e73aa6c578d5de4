from typing import Sequence, Tuple
import numpy as np
from .. import feature_sets
from ..core import Epoch, FeatureSet, FeatureVector


def srp_bins(length_ms: float = 1000.0, rate_hz: float = 25.0) -> Tuple[int, ...]:
    step = 1000.0 / rate_hz
    return tuple(int(round(k * step)) for k in range(int(round(length_ms / step))))


def srp_schema(channels: Sequence[str], length_ms: float = 1000.0, rate_hz: float = 25.0) -> Tuple[str, ...]:
    return tuple('{}.srp_{:03d}ms'.format(channel, ms) for channel in channels for ms in srp_bins(length_ms, rate_hz))


def srp_features(epoch: Epoch, baseline_ms: float = 100.0, rate_hz: float = 25.0) -> FeatureVector:
    """
    Baseline-corrected saccade-locked epoch, block-averaged down to ``rate_hz``.

    :param epoch: saccade-locked epoch
    :param baseline_ms: leading interval whose mean is subtracted per channel
    :param rate_hz: output rate
    """
    fs = epoch.sample_rate_hz
    baseline = max(1, int(round(baseline_ms * fs / 1000.0)))
    block = max(1, int(round(fs / rate_hz)))
    count = epoch.n_samples // block
    data = epoch.data - epoch.data[:, :baseline].mean(axis=1, keepdims=True)
    values = data[:, :count * block].reshape(data.shape[0], count, block).mean(axis=2)
    schema = srp_schema(epoch.channels, 1000.0 * count / rate_hz, rate_hz)
    return FeatureVector(values=values.ravel(), schema=schema, label=epoch.label,
                         participant_id=epoch.participant_id, trial_id=epoch.trial_id,
                         scene_domain=epoch.scene_domain)


class SrpSet(FeatureSet):

    @staticmethod
    def identifier():
        return "srp"

    @property
    def schema(self):
        return srp_schema(self.channels, 1000.0, self._config.srp_rate_hz)

    def usable(self, observation):
        return observation.srp is not None

    def compute(self, observation):
        values = srp_features(observation.srp, self._config.srp_baseline_ms, self._config.srp_rate_hz).values
        if values.shape[0] != len(self.schema):
            raise ValueError("SRP epoch yields {} values, expected {}.".format(values.shape[0], len(self.schema)))
        return values


feature_sets.register(SrpSet)
