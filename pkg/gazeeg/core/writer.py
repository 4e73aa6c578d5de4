from typing import List, Optional, Sequence, Union
from io import IOBase
from pathlib import Path
import json
import struct
import numpy as np
from ..errors import SchemaMismatch
from .epoch import Epoch, Observation

MAGIC = b"GZEPOCH1"
VERSION = 1


def _epoch_entry(epoch: Epoch, offset: int) -> dict:
    return {'onset_ms': epoch.onset_ms,
            'duration_ms': epoch.duration_ms,
            'n_samples': epoch.n_samples,
            'offset': offset}


class EpochWriter:
    """Writes observations into the epochs.bin container.

    Layout: 8 byte magic, little-endian uint32 header length, UTF-8 JSON
    header, then the float64 little-endian (channels, n_samples) payload of
    every epoch in header order.
    """

    def __init__(self, file, channels: Sequence[str], sample_rate_hz: float, provenance: Optional[dict] = None):
        if isinstance(file, IOBase):
            self._close = False
            self._file = file
        else:
            self._close = True
            path = Path(file).expanduser().resolve()
            path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(path, 'wb')
        self._channels = list(channels)
        self._sample_rate_hz = float(sample_rate_hz)
        self._provenance = dict(provenance or {})
        self._written = False

    def __del__(self):
        self.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if getattr(self, '_close', False) and not self._file.closed:
            self._file.close()

    def write(self, observations: Union[Observation, List[Observation]]):
        if isinstance(observations, Observation):
            observations = [observations]
        if self._written:
            raise RuntimeError("The epoch container has been written already.")

        entries = []
        payload = []
        offset = 0
        for observation in observations:
            entry = {'key': observation.key,
                     'participant_id': observation.participant_id,
                     'trial_id': observation.trial_id,
                     'scene_domain': observation.scene_domain,
                     'label': observation.label,
                     'fixation_ms': observation.fixation_ms,
                     'n_objects': observation.n_objects}
            for kind in ('frp', 'srp'):
                epoch = getattr(observation, kind)
                if epoch is None:
                    entry[kind] = None
                    continue
                if list(epoch.channels) != self._channels:
                    raise SchemaMismatch("Epoch channels do not match the container channels.")
                data = np.ascontiguousarray(epoch.data, dtype='<f8')
                entry[kind] = _epoch_entry(epoch, offset)
                payload.append(data)
                offset += data.nbytes
            entries.append(entry)

        header = json.dumps({'format': 'gazeeg-epochs',
                             'version': VERSION,
                             'channels': self._channels,
                             'sample_rate_hz': self._sample_rate_hz,
                             'provenance': self._provenance,
                             'observations': entries}, sort_keys=True).encode('utf-8')
        self._file.write(MAGIC)
        self._file.write(struct.pack('<I', len(header)))
        self._file.write(header)
        for data in payload:
            self._file.write(data.tobytes())
        self._file.flush()
        self._written = True
