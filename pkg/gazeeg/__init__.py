__version__ = "0.3.0"

from .core import FeatureSetManager
from .core import montages

feature_sets = FeatureSetManager()

from .core.functions import load, save, detect, preprocess
from .core.functions import get_reader, get_writer, epochs_read, epochs_write
from .core.functions import features, train_model, load_model
from .config import PipelineConfig, load_config
from .synth import generate
from . import featuresets
