from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple
import numpy as np
from ..errors import DuplicateFeatureName
from .epoch import Observation


@dataclass(frozen=True)
class FeatureVector:
    """Named, ordered feature values of a single observation."""
    values: np.ndarray
    schema: Tuple[str, ...]
    label: Optional[str] = None
    participant_id: Optional[str] = None
    trial_id: Optional[int] = None
    scene_domain: Optional[str] = None

    def __post_init__(self):
        if len(self.values) != len(self.schema):
            raise ValueError("Feature vector has {} values but {} names.".format(len(self.values), len(self.schema)))

    def __len__(self):
        return len(self.schema)


@dataclass(frozen=True)
class FeatureBlock:
    """Feature matrix (observations, features) of one modality block."""
    schema: Tuple[str, ...]
    values: np.ndarray


def check_schema(schema: Sequence[str]):
    seen = set()
    for name in schema:
        if name in seen:
            raise DuplicateFeatureName("Feature name '{}' occurs more than once.".format(name))
        seen.add(name)


def family(name: str) -> str:
    """Feature family of a feature name, used to recover fusion blocks from a flat schema."""
    if name == 'fix_dur_ms':
        return 'gaze'
    if name.startswith('csp_'):
        return 'csp'
    if '.srp_' in name:
        return 'srp'
    return 'pyeeg'


def split_blocks(block: FeatureBlock) -> List[FeatureBlock]:
    """Split a fused block into contiguous single-family blocks."""
    blocks, start = [], 0
    names = list(block.schema)
    for i in range(1, len(names) + 1):
        if i == len(names) or family(names[i]) != family(names[start]):
            blocks.append(FeatureBlock(tuple(names[start:i]), block.values[:, start:i]))
            start = i
    return blocks


class FeatureSet(ABC):
    """A family of features computed from observations.

    Sets that learn from data (e.g. spatial filters) must be fit on training
    observations before transforming.
    """

    def __init__(self, config, channels: Sequence[str]):
        self._config = config
        self._channels = tuple(channels)

    @staticmethod
    @abstractmethod
    def identifier() -> str:
        """Return the unique identifier for this feature set."""
        pass

    @staticmethod
    def requires_fit() -> bool:
        return False

    @property
    def name(self) -> str:
        return self.identifier()

    @property
    def channels(self) -> Tuple[str, ...]:
        return self._channels

    @property
    @abstractmethod
    def schema(self) -> Tuple[str, ...]:
        """Ordered feature names produced by :meth:`compute`."""
        pass

    def usable(self, observation: Observation) -> bool:
        """Whether the observation carries everything :meth:`compute` needs."""
        return True

    def fit(self, observations: Sequence[Observation]) -> "FeatureSet":
        return self

    @abstractmethod
    def compute(self, observation: Observation) -> np.ndarray:
        """Feature values of a single observation, ordered like :attr:`schema`."""
        pass

    def vector(self, observation: Observation) -> FeatureVector:
        return FeatureVector(values=self.compute(observation),
                             schema=self.schema,
                             label=observation.label,
                             participant_id=observation.participant_id,
                             trial_id=observation.trial_id,
                             scene_domain=observation.scene_domain)

    def blocks(self, observations: Sequence[Observation]) -> List[FeatureBlock]:
        """Feature blocks for ``observations``; one block unless the set is a fusion."""
        values = np.empty((len(observations), len(self.schema)), dtype=np.float64)
        for i, observation in enumerate(observations):
            values[i] = self.compute(observation)
        return [FeatureBlock(self.schema, values)]

    def transform(self, observations: Sequence[Observation]) -> FeatureBlock:
        blocks = self.blocks(observations)
        schema = tuple(name for block in blocks for name in block.schema)
        check_schema(schema)
        return FeatureBlock(schema, np.hstack([block.values for block in blocks]))


class FusionSet(FeatureSet):
    """Early fusion: concatenation of the blocks of several feature sets."""

    components: Tuple[str, ...] = ()

    def __init__(self, config, channels: Sequence[str], components: Optional[Sequence[str]] = None):
        super().__init__(config, channels)
        from .. import feature_sets
        if components is not None:
            self.components = tuple(components)
        if len(self.components) < 1:
            raise ValueError("A fusion needs at least one component feature set.")
        self._parts = [feature_sets[identifier](config, channels) for identifier in self.components]
        check_schema(self.schema)

    @staticmethod
    def identifier():
        return "fusion"

    @property
    def name(self):
        if type(self) is FusionSet:
            return "+".join(self.components)
        return self.identifier()

    def requires_fit(self) -> bool:
        return any(part.requires_fit() for part in self._parts)

    @property
    def parts(self) -> List[FeatureSet]:
        return list(self._parts)

    @property
    def schema(self):
        return tuple(name for part in self._parts for name in part.schema)

    def usable(self, observation):
        return all(part.usable(observation) for part in self._parts)

    def fit(self, observations):
        for part in self._parts:
            part.fit(observations)
        return self

    def compute(self, observation):
        return np.concatenate([part.compute(observation) for part in self._parts])

    def blocks(self, observations):
        return [block for part in self._parts for block in part.blocks(observations)]


class FeatureSetManager:

    def __init__(self):
        self._sets: Dict[str, type] = {}

    def register(self, set_cls: type, overwrite: bool = False):
        identifier = set_cls.identifier()
        if identifier in self._sets and not overwrite:
            raise KeyError("Another feature set with identifier '{}' is registered already.".format(identifier))
        self._sets[identifier] = set_cls

    def __iter__(self):
        return iter(self._sets)

    def __len__(self):
        return len(self._sets)

    def __getitem__(self, key: str):
        if '+' in key:
            components = [part.strip() for part in key.split('+')]
            unknown = [part for part in components if part not in self._sets]
            if unknown:
                raise KeyError("Unknown feature set(s) {} in '{}'.".format(", ".join(unknown), key))
            return partial(FusionSet, components=components)
        return self._sets[key]

    def __contains__(self, item):
        if isinstance(item, str) and '+' in item:
            return all(part.strip() in self._sets for part in item.split('+'))
        return item in self._sets

    def __str__(self):
        return ", ".join(list(self._sets.keys()))
