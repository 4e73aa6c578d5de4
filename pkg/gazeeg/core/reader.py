from typing import List, Union
import io
import json
import struct
from pathlib import Path
import psutil
import numpy as np
from ..errors import InsufficientMemory, MissingFile, RangeError, SchemaError
from .epoch import Epoch, Observation
from .writer import MAGIC, VERSION


class EpochReader:

    def __init__(self, file: Union[Path, str, io.RawIOBase, io.BufferedIOBase]):
        if isinstance(file, io.RawIOBase) or isinstance(file, io.BufferedIOBase):
            self._close = False
            self._file = file
        else:
            path = Path(file).expanduser().resolve()
            if not path.is_file():
                raise MissingFile("Epoch container '{}' does not exist.".format(path))
            self._close = True
            self._file = open(path, 'rb')
        self._header = self._read_header()
        self._entries = self._header['observations']
        self._channels = tuple(self._header['channels'])
        self._sample_rate_hz = float(self._header['sample_rate_hz'])

    def __del__(self):
        if getattr(self, '_close', False):
            self._file.close()

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        for i in range(len(self._entries)):
            yield self.read(i, count=1)[0]

    @property
    def channels(self):
        return self._channels

    @property
    def sample_rate_hz(self) -> float:
        return self._sample_rate_hz

    @property
    def provenance(self) -> dict:
        return dict(self._header.get('provenance', {}))

    def _read_header(self) -> dict:
        self._file.seek(0, io.SEEK_SET)
        name = getattr(self._file, 'name', self._file)
        if self._file.read(len(MAGIC)) != MAGIC:
            raise SchemaError("'{}' is not an epoch container.".format(name))
        try:
            (length,) = struct.unpack('<I', self._file.read(4))
            header = json.loads(self._file.read(length).decode('utf-8'))
        except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as error:
            raise SchemaError("Header of '{}' is corrupt: {}".format(name, error)) from error
        if not isinstance(header, dict) or header.get('version') != VERSION:
            raise SchemaError("Unsupported epoch container version in '{}'.".format(name))
        if not {'observations', 'channels', 'sample_rate_hz'} <= set(header):
            raise SchemaError("Header of '{}' lacks required fields.".format(name))
        self._payload_start = len(MAGIC) + 4 + length
        return header

    def _validate_memory(self, entries):
        available = psutil.virtual_memory().available
        required = sum(8 * len(self._channels) * entry[kind]['n_samples']
                       for entry in entries for kind in ('frp', 'srp') if entry[kind] is not None)
        if required > available * 0.9:
            raise InsufficientMemory("The required memory ({}) to read '{}' observations "
                                     "from file '{}' exceeds 90% of the available system "
                                     "memory ({})".format(required,
                                                          len(entries),
                                                          getattr(self._file, 'name', self._file),
                                                          available))

    def _epoch(self, entry: dict, kind: str) -> Epoch:
        record = entry[kind]
        n = int(record['n_samples'])
        self._file.seek(self._payload_start + int(record['offset']))
        data = np.frombuffer(self._file.read(8 * n * len(self._channels)), dtype='<f8')
        return Epoch(data.reshape(len(self._channels), n).astype(np.float64),
                     self._sample_rate_hz, self._channels,
                     onset_ms=record['onset_ms'], duration_ms=record['duration_ms'],
                     kind=kind, label=entry['label'], trial_id=entry['trial_id'],
                     participant_id=entry['participant_id'], scene_domain=entry['scene_domain'],
                     key=entry['key'])

    def read(self, index, count=None) -> List[Observation]:
        if count is None:
            count = len(self._entries) - index
        if index + count > len(self._entries):
            raise RangeError("Cannot read number of observations '{}' at index '{}' "
                             "from a container with length '{}'.".format(count, index, len(self._entries)))
        entries = self._entries[index:index + count]
        self._validate_memory(entries)
        observations = []
        for entry in entries:
            observations.append(Observation(key=entry['key'],
                                            participant_id=entry['participant_id'],
                                            trial_id=entry['trial_id'],
                                            scene_domain=entry['scene_domain'],
                                            label=entry['label'],
                                            fixation_ms=entry['fixation_ms'],
                                            frp=self._epoch(entry, 'frp'),
                                            srp=None if entry['srp'] is None else self._epoch(entry, 'srp'),
                                            n_objects=entry.get('n_objects')))
        return observations
