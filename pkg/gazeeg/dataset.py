"""On-disk recording format, loading, validation and stream slicing.

A recording directory holds

* ``meta.json``: participant_id, screen_px, screen_mm, channels and optionally
  montage, gaze_rate_hz, eeg_rate_hz, bbox_buffer_px, gaze_origin
* ``gaze.csv``: t_ms,lx,ly,lvalid,rx,ry,rvalid,eye_dist_mm
* ``eeg.csv``: t_ms followed by one column per channel (microvolts)
* ``events.jsonl``: one trial event per line

All timestamps share one clock in milliseconds. Gaze coordinates are
normalized screen coordinates; in memory the origin is always the top-left
corner. A recording written with ``gaze_origin: top_right`` has its x axis
flipped once at load (and back at write).
"""
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .core.montage import Montage, montages
from .errors import ClockError, CoverageError, MissingFile, RangeError, SchemaError

LOG = logging.getLogger('gazeeg.dataset')

GAZE_COLUMNS = ['t_ms', 'lx', 'ly', 'lvalid', 'rx', 'ry', 'rvalid', 'eye_dist_mm']

GAZE_DTYPE = np.dtype([
    ('t_ms', '<f8'),
    ('lx', '<f8'), ('ly', '<f8'), ('lvalid', '?'),
    ('rx', '<f8'), ('ry', '<f8'), ('rvalid', '?'),
    ('eye_dist_mm', '<f8'),
])

SCENE_DOMAINS = ('workshop', 'desktop')
OUTCOMES = ('clicked', 'skipped')
GAZE_ORIGINS = ('top_left', 'top_right')

COORDINATE_SLACK = 0.2
RATE_TOLERANCE = 0.05

_REQUIRED_META = ('participant_id', 'screen_px', 'screen_mm', 'channels')
_REQUIRED_EVENT = ('trial_id', 'scene_id', 'scene_domain', 'target_id', 'target_bbox',
                   'search_onset_ms', 'search_end_ms', 'outcome')


@dataclass(frozen=True)
class ScreenGeometry:
    px: Tuple[int, int]
    mm: Optional[Tuple[float, float]]

    @property
    def mm_per_px(self) -> Tuple[float, float]:
        return self.mm[0] / self.px[0], self.mm[1] / self.px[1]


@dataclass(frozen=True)
class TrialEvent:
    trial_id: int
    scene_id: str
    scene_domain: str
    target_id: str
    target_bbox: Tuple[float, float, float, float]
    search_onset_ms: float
    search_end_ms: float
    outcome: str
    n_objects: Optional[int] = None

    def contains(self, x_px: float, y_px: float) -> bool:
        """Closed-rectangle test against the target box (buffer included)."""
        x0, y0, x1, y1 = self.target_bbox
        return x0 <= x_px <= x1 and y0 <= y_px <= y1

    def covers(self, t_ms: float) -> bool:
        return self.search_onset_ms <= t_ms < self.search_end_ms

    def to_dict(self) -> dict:
        data = asdict(self)
        data['target_bbox'] = list(self.target_bbox)
        if self.n_objects is None:
            del data['n_objects']
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrialEvent":
        missing = [key for key in _REQUIRED_EVENT if key not in data]
        if missing:
            raise SchemaError("Trial event is missing field(s) {}.".format(", ".join(missing)))
        bbox = tuple(float(v) for v in data['target_bbox'])
        if len(bbox) != 4:
            raise SchemaError("Target bbox of trial '{}' must have 4 values.".format(data['trial_id']))
        n_objects = data.get('n_objects')
        return cls(trial_id=int(data['trial_id']),
                   scene_id=str(data['scene_id']),
                   scene_domain=str(data['scene_domain']),
                   target_id=str(data['target_id']),
                   target_bbox=bbox,
                   search_onset_ms=float(data['search_onset_ms']),
                   search_end_ms=float(data['search_end_ms']),
                   outcome=str(data['outcome']),
                   n_objects=None if n_objects is None else int(n_objects))


@dataclass(frozen=True)
class EegStream:
    """EEG frames: timestamps (n,) and channel amplitudes (n, channels) in microvolts."""
    t_ms: np.ndarray
    values: np.ndarray

    def __len__(self):
        return self.t_ms.shape[0]


class Recording:
    """One synchronized gaze + EEG session of a single participant.

    Arrays are made read-only, recordings can be shared between workers.
    """

    def __init__(self, participant_id: str,
                 screen: ScreenGeometry,
                 gaze: np.ndarray,
                 eeg: EegStream,
                 events: Sequence[TrialEvent],
                 channels: Sequence[str],
                 montage: Montage,
                 gaze_rate_hz: float = 60.0,
                 eeg_rate_hz: float = 500.0,
                 bbox_buffer_px: float = 10.0,
                 gaze_origin: str = 'top_left'):
        self._participant_id = participant_id
        self._screen = screen
        self._gaze = _frozen(gaze)
        self._eeg = EegStream(_frozen(eeg.t_ms), _frozen(eeg.values))
        self._events = tuple(events)
        self._channels = tuple(channels)
        self._montage = montage
        self._gaze_rate_hz = float(gaze_rate_hz)
        self._eeg_rate_hz = float(eeg_rate_hz)
        self._bbox_buffer_px = float(bbox_buffer_px)
        self._gaze_origin = gaze_origin

    @property
    def participant_id(self) -> str:
        return self._participant_id

    @property
    def screen(self) -> ScreenGeometry:
        return self._screen

    @property
    def gaze(self) -> np.ndarray:
        return self._gaze

    @property
    def eeg(self) -> EegStream:
        return self._eeg

    @property
    def events(self) -> Tuple[TrialEvent, ...]:
        return self._events

    @property
    def channels(self) -> Tuple[str, ...]:
        return self._channels

    @property
    def montage(self) -> Montage:
        return self._montage

    @property
    def gaze_rate_hz(self) -> float:
        return self._gaze_rate_hz

    @property
    def eeg_rate_hz(self) -> float:
        return self._eeg_rate_hz

    @property
    def bbox_buffer_px(self) -> float:
        return self._bbox_buffer_px

    @property
    def gaze_origin(self) -> str:
        return self._gaze_origin

    def span(self, stream: str) -> Tuple[float, float]:
        """Half-open time span [first, last + one period) of a stream."""
        t, rate = self._stream(stream)
        if t.shape[0] == 0:
            return 0.0, 0.0
        return float(t[0]), float(t[-1]) + 1000.0 / rate

    def event(self, trial_id: int) -> TrialEvent:
        for event in self._events:
            if event.trial_id == trial_id:
                return event
        raise KeyError("Recording '{}' has no trial '{}'.".format(self._participant_id, trial_id))

    def _stream(self, stream: str):
        if stream == 'gaze':
            return self._gaze['t_ms'], self._gaze_rate_hz
        if stream == 'eeg':
            return self._eeg.t_ms, self._eeg_rate_hz
        raise ValueError("Unknown stream '{}', expected 'gaze' or 'eeg'.".format(stream))

    def __repr__(self):
        return "Recording(participant_id={!r}, gaze={}, eeg={}x{}, events={})".format(
            self._participant_id, self._gaze.shape[0], len(self._eeg), len(self._channels), len(self._events))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.flags.writeable = False
    return array


def find_event(events: Sequence[TrialEvent], t_ms: float) -> Optional[TrialEvent]:
    """Trial event whose search window [onset, end) contains ``t_ms``."""
    for event in events:
        if event.covers(t_ms):
            return event
    return None


def slice_stream(rec: Recording, t0_ms: float, t1_ms: float, stream: str = 'eeg'):
    """
    All samples of a stream with ``t0_ms <= t < t1_ms``, order preserved.

    :param rec: recording
    :param t0_ms: window start (inclusive)
    :param t1_ms: window end (exclusive)
    :param stream: 'gaze' or 'eeg'
    :return: gaze structured array or :class:`EegStream`
    """
    t, _ = rec._stream(stream)
    first, end = rec.span(stream)
    if not t0_ms < t1_ms:
        raise RangeError("Empty window [{}, {}) requested from the {} stream.".format(t0_ms, t1_ms, stream))
    if t0_ms < first or t1_ms > end:
        raise RangeError("Window [{}, {}) lies outside the {} stream span [{}, {}).".format(
            t0_ms, t1_ms, stream, first, end))
    lo = int(np.searchsorted(t, t0_ms, side='left'))
    hi = int(np.searchsorted(t, t1_ms, side='left'))
    if stream == 'gaze':
        return rec.gaze[lo:hi]
    return EegStream(rec.eeg.t_ms[lo:hi], rec.eeg.values[lo:hi])


def read_json(path: Path):
    """Parse a JSON file; undecodable or malformed content is a :class:`SchemaError`."""
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise SchemaError("'{}' is not valid JSON: {}".format(path, error)) from error


def read_table(path: Path) -> pd.DataFrame:
    """Read a CSV file; undecodable or malformed content is a :class:`SchemaError`."""
    try:
        return pd.read_csv(path)
    except (UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise SchemaError("'{}' is not a readable CSV table: {}".format(path, error)) from error


def load_recording(path: Union[str, Path]) -> Recording:
    """
    Load and validate a recording directory.

    :param path: directory with meta.json, gaze.csv, eeg.csv and events.jsonl
    :return: recording
    """
    root = Path(path).expanduser().resolve()
    for name in ('meta.json', 'gaze.csv', 'eeg.csv', 'events.jsonl'):
        if not (root / name).is_file():
            raise MissingFile("Recording directory '{}' has no '{}'.".format(root, name))

    meta = read_json(root / 'meta.json')
    if not isinstance(meta, dict):
        raise SchemaError("meta.json in '{}' must hold an object.".format(root))
    missing = [key for key in _REQUIRED_META if meta.get(key) is None]
    if missing:
        raise SchemaError("meta.json in '{}' is missing field(s) {}.".format(root, ", ".join(missing)))
    try:
        channels = [str(name) for name in meta['channels']]
        screen = ScreenGeometry(px=(int(meta['screen_px'][0]), int(meta['screen_px'][1])),
                                mm=(float(meta['screen_mm'][0]), float(meta['screen_mm'][1])))
        if meta.get('montage'):
            montage = Montage({name: tuple(pos) for name, pos in meta['montage'].items()})
        else:
            montage = montages['standard_1020']
    except (AttributeError, TypeError, ValueError, IndexError, KeyError) as error:
        raise SchemaError("meta.json in '{}' has malformed channels, screen or montage fields: {}".format(
            root, error)) from error
    if min(screen.px) <= 0 or min(screen.mm) <= 0:
        raise SchemaError("Screen geometry in '{}' must be positive.".format(root))
    unplaced = [name for name in channels if name not in montage]
    if unplaced:
        raise SchemaError("Montage lacks position(s) for channel(s) {}.".format(", ".join(unplaced)))
    gaze_origin = meta.get('gaze_origin', 'top_left')
    if gaze_origin not in GAZE_ORIGINS:
        raise SchemaError("Unknown gaze origin '{}'.".format(gaze_origin))

    gaze = _read_gaze(root / 'gaze.csv')
    if gaze_origin == 'top_right':
        gaze['lx'] = 1.0 - gaze['lx']
        gaze['rx'] = 1.0 - gaze['rx']
    eeg = _read_eeg(root / 'eeg.csv', channels)
    events = _read_events(root / 'events.jsonl')

    rec = Recording(participant_id=str(meta['participant_id']),
                    screen=screen,
                    gaze=gaze,
                    eeg=eeg,
                    events=events,
                    channels=channels,
                    montage=montage.subset(channels),
                    gaze_rate_hz=float(meta.get('gaze_rate_hz', 60.0)),
                    eeg_rate_hz=float(meta.get('eeg_rate_hz', 500.0)),
                    bbox_buffer_px=float(meta.get('bbox_buffer_px', 10.0)),
                    gaze_origin=gaze_origin)
    validate(rec)
    LOG.info("loaded participant=%s gaze_samples=%d eeg_frames=%d events=%d",
             rec.participant_id, rec.gaze.shape[0], len(rec.eeg), len(rec.events))
    return rec


def _read_gaze(path: Path) -> np.ndarray:
    frame = read_table(path)
    if list(frame.columns) != GAZE_COLUMNS:
        raise SchemaError("Columns of '{}' are {}, expected {}.".format(path, list(frame.columns), GAZE_COLUMNS))
    if frame.isna().any().any():
        raise SchemaError("'{}' contains empty fields.".format(path))
    gaze = np.empty(len(frame), dtype=GAZE_DTYPE)
    try:
        for column in GAZE_COLUMNS:
            gaze[column] = frame[column].to_numpy()
    except (TypeError, ValueError) as error:
        raise SchemaError("'{}' has non-numeric values: {}".format(path, error)) from error
    return gaze


def _read_eeg(path: Path, channels: List[str]) -> EegStream:
    frame = read_table(path)
    expected = ['t_ms'] + channels
    if list(frame.columns) != expected:
        raise SchemaError("Columns of '{}' do not match the declared channel list {}.".format(path, channels))
    if frame.isna().any().any():
        raise SchemaError("'{}' contains empty fields.".format(path))
    try:
        return EegStream(t_ms=frame['t_ms'].to_numpy(dtype=np.float64),
                         values=frame[channels].to_numpy(dtype=np.float64))
    except (TypeError, ValueError) as error:
        raise SchemaError("'{}' has non-numeric values: {}".format(path, error)) from error


def _read_events(path: Path) -> List[TrialEvent]:
    events = []
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except UnicodeDecodeError as error:
        raise SchemaError("'{}' is not UTF-8 text: {}".format(path, error)) from error
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as error:
            raise SchemaError("Line {} of '{}' is not valid JSON: {}".format(line_no, path, error)) from error
        if not isinstance(data, dict):
            raise SchemaError("Line {} of '{}' is not a JSON object.".format(line_no, path))
        try:
            events.append(TrialEvent.from_dict(data))
        except SchemaError:
            raise
        except (TypeError, ValueError) as error:
            raise SchemaError("Line {} of '{}' has a malformed field: {}".format(line_no, path, error)) from error
    return events


def validate(rec: Recording):
    """Check the recording invariants, raising on the first violation."""
    for stream, rate in (('gaze', rec.gaze_rate_hz), ('eeg', rec.eeg_rate_hz)):
        t, _ = rec._stream(stream)
        if t.shape[0] < 2:
            raise ClockError("The {} stream of '{}' has fewer than two samples.".format(stream, rec.participant_id))
        steps = np.diff(t)
        if np.any(steps <= 0):
            index = int(np.argmax(steps <= 0)) + 1
            raise ClockError("The {} stream timestamps are not strictly increasing at row {} ({} ms).".format(
                stream, index, t[index]))
        period = 1000.0 / rate
        median = float(np.median(steps))
        if abs(median - period) > RATE_TOLERANCE * period:
            raise ClockError("The {} stream median interval {:.4f} ms deviates from the nominal {:.4f} ms.".format(
                stream, median, period))

    gaze = rec.gaze
    for eye in ('l', 'r'):
        valid = gaze[eye + 'valid']
        for axis in ('x', 'y'):
            coords = gaze[eye + axis][valid]
            if np.any((coords < -COORDINATE_SLACK) | (coords > 1 + COORDINATE_SLACK)):
                raise SchemaError("Valid {} coordinates of the {} eye lie outside [{}, {}].".format(
                    axis, 'left' if eye == 'l' else 'right', -COORDINATE_SLACK, 1 + COORDINATE_SLACK))

    if rec.eeg.values.shape[1] != len(rec.channels):
        raise SchemaError("EEG stream has {} channels, {} declared.".format(rec.eeg.values.shape[1], len(rec.channels)))
    if not np.all(np.isfinite(rec.eeg.values)):
        raise SchemaError("EEG stream of '{}' contains non-finite values.".format(rec.participant_id))

    width, height = rec.screen.px
    buffer = rec.bbox_buffer_px
    seen = set()
    for event in rec.events:
        if event.trial_id in seen:
            raise SchemaError("Trial id '{}' occurs twice.".format(event.trial_id))
        seen.add(event.trial_id)
        if event.scene_domain not in SCENE_DOMAINS:
            raise SchemaError("Unknown scene domain '{}' in trial '{}'.".format(event.scene_domain, event.trial_id))
        if event.outcome not in OUTCOMES:
            raise SchemaError("Unknown outcome '{}' in trial '{}'.".format(event.outcome, event.trial_id))
        if not event.search_onset_ms < event.search_end_ms:
            raise SchemaError("Trial '{}' ends before it starts.".format(event.trial_id))
        x0, y0, x1, y1 = event.target_bbox
        if not (x0 < x1 and y0 < y1):
            raise SchemaError("Target bbox of trial '{}' is empty.".format(event.trial_id))
        if x0 < -buffer or y0 < -buffer or x1 > width + buffer or y1 > height + buffer:
            raise SchemaError("Target bbox of trial '{}' exceeds the screen plus buffer.".format(event.trial_id))
        for stream in ('gaze', 'eeg'):
            t, _ = rec._stream(stream)
            if event.search_onset_ms < t[0] or event.search_end_ms > t[-1]:
                raise CoverageError("Trial '{}' window [{}, {}] is not covered by the {} stream [{}, {}].".format(
                    event.trial_id, event.search_onset_ms, event.search_end_ms, stream, t[0], t[-1]))


def write_recording(rec: Recording, path: Union[str, Path]) -> Path:
    """
    Write a recording directory readable by :func:`load_recording`.

    Timestamps are written with three decimals, every other float with six
    significant digits.

    :param rec: recording
    :param path: target directory (created if needed)
    :return: directory path
    """
    root = Path(path).expanduser().resolve()
    root.mkdir(parents=True, exist_ok=True)

    meta = {
        'participant_id': rec.participant_id,
        'screen_px': list(rec.screen.px),
        'screen_mm': list(rec.screen.mm),
        'channels': list(rec.channels),
        'montage': rec.montage.to_dict(),
        'gaze_rate_hz': rec.gaze_rate_hz,
        'eeg_rate_hz': rec.eeg_rate_hz,
        'bbox_buffer_px': rec.bbox_buffer_px,
        'gaze_origin': rec.gaze_origin,
    }
    (root / 'meta.json').write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding='utf-8')

    gaze = rec.gaze
    lx, rx = gaze['lx'], gaze['rx']
    if rec.gaze_origin == 'top_right':
        lx, rx = 1.0 - lx, 1.0 - rx
    frame = pd.DataFrame({
        't_ms': _timestamps(gaze['t_ms']),
        'lx': lx, 'ly': gaze['ly'], 'lvalid': gaze['lvalid'].astype(np.int8),
        'rx': rx, 'ry': gaze['ry'], 'rvalid': gaze['rvalid'].astype(np.int8),
        'eye_dist_mm': gaze['eye_dist_mm'],
    }, columns=GAZE_COLUMNS)
    _write_csv(frame, root / 'gaze.csv')

    frame = pd.DataFrame(rec.eeg.values, columns=list(rec.channels))
    frame.insert(0, 't_ms', _timestamps(rec.eeg.t_ms))
    _write_csv(frame, root / 'eeg.csv')

    with open(root / 'events.jsonl', 'w', encoding='utf-8', newline='\n') as handle:
        for event in rec.events:
            handle.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
    return root


def _timestamps(t: np.ndarray) -> np.ndarray:
    return np.char.mod('%.3f', np.asarray(t, dtype=np.float64))


def _write_csv(frame: pd.DataFrame, path: Path):
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        frame.to_csv(handle, index=False, float_format='%.6g', lineterminator='\n')
