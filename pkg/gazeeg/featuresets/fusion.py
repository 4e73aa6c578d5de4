from .. import feature_sets
from ..core import FusionSet


class CspGazeFusion(FusionSet):
    components = ('csp15', 'gaze')

    @staticmethod
    def identifier():
        return "fusion"


class PyeegGazeFusion(FusionSet):
    components = ('pyeeg', 'gaze')

    @staticmethod
    def identifier():
        return "fusion_pyeeg"


feature_sets.register(CspGazeFusion)
feature_sets.register(PyeegGazeFusion)
