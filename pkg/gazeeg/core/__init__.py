from .montage import Montage, MontageManager, montages
from .epoch import Epoch, Observation
from .featureset import FeatureSet, FeatureSetManager, FusionSet, FeatureVector, FeatureBlock, split_blocks
from .reader import EpochReader
from .writer import EpochWriter
