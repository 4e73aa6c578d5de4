from typing import Optional
from .. import feature_sets
from ..core import FeatureSet
from ..csp import CspModel, csp_fit, csp_transform


class CspSet(FeatureSet):
    """Log-variance of CSP-filtered fixation epochs; filters are learnt in :meth:`fit`."""

    def __init__(self, config, channels):
        super().__init__(config, channels)
        self._model: Optional[CspModel] = None

    @staticmethod
    def identifier():
        return "csp15"

    @staticmethod
    def requires_fit():
        return True

    @property
    def model(self) -> Optional[CspModel]:
        return self._model

    @property
    def schema(self):
        return tuple('csp_{:02d}'.format(i + 1) for i in range(self._config.csp_components))

    def fit(self, observations):
        self._model = csp_fit([observation.frp for observation in observations],
                              [observation.label for observation in observations],
                              self._config.csp_components, self._config.csp_ridge, self.channels)
        return self

    def compute(self, observation):
        if self._model is None:
            raise RuntimeError("CSP features must be fit before they can be computed.")
        return csp_transform(self._model, observation.frp)


feature_sets.register(CspSet)
