from .gaze import GazeSet
from .pyeeg import PyeegSet
from .csp import CspSet
from .srp import SrpSet
from .fusion import CspGazeFusion, PyeegGazeFusion
