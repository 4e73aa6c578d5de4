import numpy as np
from .. import feature_sets
from ..core import FeatureSet, FeatureVector


def gaze_feature(fixation_ms: float) -> FeatureVector:
    """Fixation duration as a one-element feature vector."""
    return FeatureVector(values=np.array([float(fixation_ms)]), schema=GazeSet.SCHEMA)


class GazeSet(FeatureSet):
    SCHEMA = ('fix_dur_ms',)

    @staticmethod
    def identifier():
        return "gaze"

    @property
    def schema(self):
        return self.SCHEMA

    def compute(self, observation):
        return np.array([float(observation.fixation_ms)])


feature_sets.register(GazeSet)
