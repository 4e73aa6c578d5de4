from dataclasses import dataclass
from typing import Optional, Sequence, Tuple
import numpy as np

KINDS = ('frp', 'srp')
LABELS = ('target', 'nontarget')


class Epoch:
    """Epoch provides access to a single fixation- or saccade-locked EEG slice."""

    def __init__(self, data: np.ndarray,
                 sample_rate_hz: float,
                 channels: Sequence[str],
                 onset_ms: float,
                 duration_ms: float,
                 kind: str = 'frp',
                 label: Optional[str] = None,
                 trial_id: Optional[int] = None,
                 participant_id: Optional[str] = None,
                 scene_domain: Optional[str] = None,
                 key: Optional[int] = None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != len(channels):
            raise ValueError("Epoch data must have shape (channels, samples), got {} for {} channels.".format(
                data.shape, len(channels)))
        if data.shape[1] < 1:
            raise ValueError("Epoch must contain at least one sample.")
        if kind not in KINDS:
            raise ValueError("Unknown epoch kind '{}'.".format(kind))
        if label is not None and label not in LABELS:
            raise ValueError("Unknown epoch label '{}'.".format(label))
        self._data = data
        self._sample_rate_hz = float(sample_rate_hz)
        self._channels = tuple(channels)
        self._onset_ms = float(onset_ms)
        self._duration_ms = float(duration_ms)
        self._kind = kind
        self._label = label
        self._trial_id = trial_id
        self._participant_id = participant_id
        self._scene_domain = scene_domain
        self._key = key

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n_samples(self) -> int:
        return self._data.shape[1]

    @property
    def sample_rate_hz(self) -> float:
        return self._sample_rate_hz

    @property
    def channels(self) -> Tuple[str, ...]:
        return self._channels

    @property
    def onset_ms(self) -> float:
        return self._onset_ms

    @property
    def duration_ms(self) -> float:
        return self._duration_ms

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def label(self) -> Optional[str]:
        return self._label

    @label.setter
    def label(self, value: Optional[str]):
        if value is not None and value not in LABELS:
            raise ValueError("Unknown epoch label '{}'.".format(value))
        self._label = value

    @property
    def trial_id(self) -> Optional[int]:
        return self._trial_id

    @property
    def participant_id(self) -> Optional[str]:
        return self._participant_id

    @property
    def scene_domain(self) -> Optional[str]:
        return self._scene_domain

    @property
    def key(self) -> Optional[int]:
        """Identifier shared by the FRP and SRP epoch of the same fixation."""
        return self._key

    def __getitem__(self, channel: str) -> np.ndarray:
        return self._data[self._channels.index(channel)]

    def __repr__(self):
        return "Epoch(kind={!r}, onset_ms={:.1f}, samples={}, label={!r})".format(
            self._kind, self._onset_ms, self.n_samples, self._label)


@dataclass
class Observation:
    """Everything known about one labelled fixation: gaze event, FRP epoch and optional SRP epoch."""
    key: int
    participant_id: str
    trial_id: int
    scene_domain: str
    label: str
    fixation_ms: float
    frp: Epoch
    srp: Optional[Epoch] = None
    n_objects: Optional[int] = None

    @property
    def is_target(self) -> bool:
        return self.label == 'target'
