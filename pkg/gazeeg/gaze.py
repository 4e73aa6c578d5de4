"""Velocity-threshold (I-VT) fixation detection.

The chain runs gap fill-in, eye selection, moving-median noise reduction,
velocity calculation, I-VT classification, merging of adjacent fixations and
discarding of short fixations, in that order.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import GazeConfig
from .dataset import ScreenGeometry, TrialEvent, find_event
from .errors import GeometryError

LOG = logging.getLogger('gazeeg.gaze')

CYCLOPEAN_DTYPE = np.dtype([
    ('t_ms', '<f8'),
    ('x', '<f8'), ('y', '<f8'), ('valid', '?'),
    ('eye_dist_mm', '<f8'),
])

UNKNOWN = 0
FIXATION = 1
SACCADE = 2


@dataclass(frozen=True)
class Fixation:
    onset_ms: float
    duration_ms: float
    centroid_px: Tuple[float, float]
    sample_count: int
    trial_id: Optional[int] = None
    eye_dist_mm: float = 600.0

    @property
    def end_ms(self) -> float:
        return self.onset_ms + self.duration_ms


@dataclass(frozen=True)
class Saccade:
    onset_ms: float
    offset_ms: float
    trial_id: Optional[int] = None

    @property
    def midpoint_ms(self) -> float:
        return 0.5 * (self.onset_ms + self.offset_ms)


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Half-open index ranges of consecutive True values."""
    padded = np.concatenate(([0], np.asarray(mask, dtype=np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _period(t: np.ndarray) -> float:
    if t.shape[0] < 2:
        return 0.0
    return float(np.median(np.diff(t)))


def fill_gaps(samples: np.ndarray, max_gap_ms: float) -> np.ndarray:
    """
    Linearly interpolate short runs of invalid samples, per eye.

    A gap lasts (next valid - previous valid - one sample period); gaps longer
    than ``max_gap_ms`` or without a valid sample on both sides stay invalid.

    :param samples: raw gaze samples (GAZE_DTYPE)
    :param max_gap_ms: longest gap to fill
    :return: copy with filled gaps
    """
    out = np.array(samples, copy=True)
    if out.shape[0] < 3:
        return out
    t = out['t_ms']
    period = _period(t)
    for eye in ('l', 'r'):
        valid = out[eye + 'valid']
        for start, stop in _runs(~valid):
            if start == 0 or stop == out.shape[0]:
                continue
            before, after = start - 1, stop
            if t[after] - t[before] - period > max_gap_ms + 1e-9:
                continue
            weight = (t[start:stop] - t[before]) / (t[after] - t[before])
            for axis in ('x', 'y'):
                column = out[eye + axis]
                column[start:stop] = column[before] + weight * (column[after] - column[before])
            out[eye + 'valid'][start:stop] = True
    return out


def select_eye(samples: np.ndarray) -> np.ndarray:
    """
    Combine both eyes into one cyclopean gaze signal.

    :param samples: gaze samples (GAZE_DTYPE)
    :return: CYCLOPEAN_DTYPE samples; mean of both eyes, the valid eye, or invalid
    """
    out = np.zeros(samples.shape[0], dtype=CYCLOPEAN_DTYPE)
    out['t_ms'] = samples['t_ms']
    out['eye_dist_mm'] = samples['eye_dist_mm']
    left, right = samples['lvalid'], samples['rvalid']
    both = left & right
    for axis in ('x', 'y'):
        out[axis] = np.where(both, 0.5 * (samples['l' + axis] + samples['r' + axis]),
                             np.where(left, samples['l' + axis],
                                      np.where(right, samples['r' + axis], 0.0)))
    out['valid'] = left | right
    return out


def smooth_median(samples: np.ndarray, window: int) -> np.ndarray:
    """
    Centered moving median of x and y.

    The window shrinks symmetrically at the stream edges, invalid samples are
    excluded from every window and stay invalid.

    :param samples: cyclopean samples
    :param window: odd window length in samples
    :return: smoothed copy
    """
    out = np.array(samples, copy=True)
    n = out.shape[0]
    valid = out['valid']
    if n == 0 or not valid.any():
        return out
    half = window // 2
    index = np.arange(n)
    limit = np.minimum(half, np.minimum(index, n - 1 - index))
    offsets = np.arange(-half, half + 1)
    columns = np.clip(index[:, None] + offsets[None, :], 0, n - 1)
    usable = (np.abs(offsets)[None, :] <= limit[:, None]) & valid[columns]
    usable = usable[valid]
    columns = columns[valid]
    for axis in ('x', 'y'):
        values = np.where(usable, samples[axis][columns], np.nan)
        out[axis][valid] = np.nanmedian(values, axis=1)
    return out


def compute_velocity(samples: np.ndarray, screen: ScreenGeometry, window_ms: float) -> np.ndarray:
    """
    Angular gaze velocity per sample in deg/s.

    The angle between the gaze points at the window endpoints is
    ``2 atan(chord_mm / (2 eye_distance_mm))``. Valid samples whose window is
    not computable take the nearest computable value of their valid run;
    invalid samples get NaN.

    :param samples: cyclopean samples
    :param screen: screen geometry (physical size required)
    :param window_ms: velocity window length
    :return: velocities
    """
    if screen.mm is None or min(screen.mm) <= 0:
        raise GeometryError("Velocity calculation needs the physical screen size in millimeters.")
    n = samples.shape[0]
    velocity = np.full(n, np.nan)
    if n < 2:
        return velocity
    t = samples['t_ms']
    valid = samples['valid']
    distance = samples['eye_dist_mm']
    if np.any(distance[valid] <= 0):
        raise GeometryError("Eye-to-tracker distance must be positive for valid samples.")

    span = max(1, int(round(window_ms / _period(t))))
    index = np.arange(n)
    left = index - span // 2
    right = left + span
    inside = (left >= 0) & (right < n)
    lo = np.clip(left, 0, n - 1)
    hi = np.clip(right, 0, n - 1)
    computable = inside & valid & valid[lo] & valid[hi]

    dx = (samples['x'][hi] - samples['x'][lo]) * screen.mm[0]
    dy = (samples['y'][hi] - samples['y'][lo]) * screen.mm[1]
    chord = np.hypot(dx, dy)
    eye = 0.5 * (distance[lo] + distance[hi])
    with np.errstate(divide='ignore', invalid='ignore'):
        angle = np.degrees(2.0 * np.arctan(chord / (2.0 * eye)))
        rate = angle / ((t[hi] - t[lo]) / 1000.0)
    velocity[computable] = rate[computable]

    for start, stop in _runs(valid):
        run = np.arange(start, stop)
        known = run[computable[start:stop]]
        if known.shape[0] == 0 or known.shape[0] == run.shape[0]:
            continue
        missing = run[~computable[start:stop]]
        position = np.clip(np.searchsorted(known, missing), 1, known.shape[0] - 1) if known.shape[0] > 1 \
            else np.zeros(missing.shape[0], dtype=int)
        if known.shape[0] > 1:
            before = known[position - 1]
            after = known[position]
            nearest = np.where(np.abs(missing - before) <= np.abs(after - missing), before, after)
        else:
            nearest = known[position]
        velocity[missing] = velocity[nearest]
    return velocity


def ivt_classify(velocities: np.ndarray, threshold_deg_s: float) -> np.ndarray:
    """
    Label samples as FIXATION (velocity < threshold), SACCADE or UNKNOWN (no velocity).

    :param velocities: deg/s per sample, NaN where unknown
    :param threshold_deg_s: velocity threshold
    :return: int8 labels
    """
    velocities = np.asarray(velocities, dtype=np.float64)
    labels = np.full(velocities.shape[0], UNKNOWN, dtype=np.int8)
    known = np.isfinite(velocities)
    labels[known & (velocities < threshold_deg_s)] = FIXATION
    labels[known & (velocities >= threshold_deg_s)] = SACCADE
    return labels


def label_events(samples: np.ndarray, labels: np.ndarray, screen: ScreenGeometry
                 ) -> Tuple[List[Fixation], List[Saccade]]:
    """Turn contiguous runs of labelled cyclopean samples into events."""
    t = samples['t_ms']
    period = _period(t)
    width, height = screen.px
    fixations = []
    for start, stop in _runs(labels == FIXATION):
        onset = float(t[start])
        end = float(t[stop - 1]) + period
        fixations.append(Fixation(onset_ms=onset,
                                  duration_ms=end - onset,
                                  centroid_px=(float(np.mean(samples['x'][start:stop])) * width,
                                               float(np.mean(samples['y'][start:stop])) * height),
                                  sample_count=stop - start,
                                  eye_dist_mm=float(np.mean(samples['eye_dist_mm'][start:stop]))))
    saccades = [Saccade(onset_ms=float(t[start]), offset_ms=float(t[stop - 1]) + period)
                for start, stop in _runs(labels == SACCADE)]
    return fixations, saccades


def visual_angle(a: Fixation, b: Fixation, screen: ScreenGeometry) -> float:
    """Angle in degrees between two fixation centroids."""
    sx, sy = screen.mm_per_px
    chord = np.hypot((a.centroid_px[0] - b.centroid_px[0]) * sx, (a.centroid_px[1] - b.centroid_px[1]) * sy)
    eye = 0.5 * (a.eye_dist_mm + b.eye_dist_mm)
    return float(np.degrees(2.0 * np.arctan(chord / (2.0 * eye))))


def _pool(a: Fixation, b: Fixation) -> Fixation:
    total = a.sample_count + b.sample_count
    wa, wb = a.sample_count / total, b.sample_count / total
    return Fixation(onset_ms=a.onset_ms,
                    duration_ms=b.end_ms - a.onset_ms,
                    centroid_px=(wa * a.centroid_px[0] + wb * b.centroid_px[0],
                                 wa * a.centroid_px[1] + wb * b.centroid_px[1]),
                    sample_count=total,
                    trial_id=a.trial_id,
                    eye_dist_mm=wa * a.eye_dist_mm + wb * b.eye_dist_mm)


def merge_fixations(fixations: Sequence[Fixation], max_gap_ms: float, max_angle_deg: float,
                    screen: ScreenGeometry) -> List[Fixation]:
    """
    Merge consecutive fixations closer than both the time gap and the angle limit.

    Repeats until no pair qualifies. A merged fixation keeps the onset of the
    first and the end of the last, with the sample-weighted centroid.
    """
    fixations = sorted(fixations, key=lambda fix: fix.onset_ms)
    changed = True
    while changed:
        changed = False
        merged: List[Fixation] = []
        for fix in fixations:
            if merged:
                last = merged[-1]
                if fix.onset_ms - last.end_ms <= max_gap_ms and visual_angle(last, fix, screen) <= max_angle_deg:
                    merged[-1] = _pool(last, fix)
                    changed = True
                    continue
            merged.append(fix)
        fixations = merged
    return fixations


def detect_fixations(samples: np.ndarray, params: GazeConfig, screen: ScreenGeometry,
                     events: Optional[Sequence[TrialEvent]] = None
                     ) -> Tuple[List[Fixation], List[Saccade]]:
    """
    Run the full I-VT chain on raw gaze samples.

    :param samples: raw gaze samples (GAZE_DTYPE), time ordered
    :param params: I-VT parameters
    :param screen: screen geometry
    :param events: trial events used to tag fixations and saccades with their trial
    :return: fixations and saccades, both time ordered
    """
    if samples.shape[0] == 0:
        return [], []
    filled = fill_gaps(samples, params.max_gap_ms)
    cyclopean = select_eye(filled)
    if not cyclopean['valid'].any():
        return [], []
    smoothed = smooth_median(cyclopean, params.median_window_samples)
    velocity = compute_velocity(smoothed, screen, params.velocity_window_ms)
    labels = ivt_classify(velocity, params.velocity_threshold_deg_s)
    fixations, saccades = label_events(smoothed, labels, screen)
    detected = len(fixations)
    fixations = merge_fixations(fixations, params.merge_max_gap_ms, params.merge_max_angle_deg, screen)
    merged = detected - len(fixations)
    fixations = [fix for fix in fixations if fix.duration_ms >= params.min_fixation_ms]

    if fixations and saccades:
        onsets = np.array([fix.onset_ms for fix in fixations])
        ends = np.array([fix.end_ms for fix in fixations])
        starts = np.array([sac.onset_ms for sac in saccades])
        owner = np.searchsorted(onsets, starts, side='right') - 1
        covered = (owner >= 0) & (starts < ends[np.clip(owner, 0, None)])
        saccades = [sac for sac, inside in zip(saccades, covered) if not inside]

    if events:
        fixations = [replace(fix, trial_id=_trial(events, fix.onset_ms)) for fix in fixations]
        saccades = [replace(sac, trial_id=_trial(events, sac.onset_ms)) for sac in saccades]
    LOG.debug("ivt detected=%d merged=%d kept=%d saccades=%d", detected, merged, len(fixations), len(saccades))
    return fixations, saccades


def _trial(events: Sequence[TrialEvent], t_ms: float) -> Optional[int]:
    event = find_event(events, t_ms)
    return None if event is None else event.trial_id


def events_frame(fixations: Sequence[Fixation], saccades: Sequence[Saccade]) -> pd.DataFrame:
    """One row per detected event, time ordered."""
    rows = [{'kind': 'fixation', 'onset_ms': fix.onset_ms, 'duration_ms': fix.duration_ms,
             'x_px': fix.centroid_px[0], 'y_px': fix.centroid_px[1], 'samples': fix.sample_count,
             'trial_id': fix.trial_id} for fix in fixations]
    rows += [{'kind': 'saccade', 'onset_ms': sac.onset_ms, 'duration_ms': sac.offset_ms - sac.onset_ms,
              'x_px': None, 'y_px': None, 'samples': None, 'trial_id': sac.trial_id} for sac in saccades]
    frame = pd.DataFrame(rows, columns=['kind', 'onset_ms', 'duration_ms', 'x_px', 'y_px', 'samples', 'trial_id'])
    return frame.sort_values(['onset_ms', 'kind'], kind='mergesort').reset_index(drop=True)
