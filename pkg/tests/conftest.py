import numpy as np
import pytest

from gazeeg.config import PipelineConfig
from gazeeg.core import Epoch, Observation, montages
from gazeeg.dataset import GAZE_DTYPE, EegStream, Recording, ScreenGeometry, TrialEvent
from gazeeg.synth import generate_participant, write_participant

SCREEN = ScreenGeometry(px=(1920, 1080), mm=(531.4, 298.9))
CHANNELS = montages['standard_1020'].names


@pytest.fixture
def screen():
    return SCREEN


@pytest.fixture
def channels():
    return list(CHANNELS)


@pytest.fixture
def gaze_samples():
    """Factory for binocular gaze arrays with identical eyes."""

    def make(x, y, rate_hz=60.0, valid=None, eye_dist_mm=600.0):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        gaze = np.zeros(x.shape[0], dtype=GAZE_DTYPE)
        gaze['t_ms'] = np.arange(x.shape[0]) * 1000.0 / rate_hz
        for eye in ('l', 'r'):
            gaze[eye + 'x'] = x
            gaze[eye + 'y'] = y
            gaze[eye + 'valid'] = True if valid is None else valid
        gaze['eye_dist_mm'] = eye_dist_mm
        return gaze

    return make


@pytest.fixture
def tiny_recording(gaze_samples):
    """Factory for a small in-memory recording: centre gaze, random EEG, one trial."""

    def make(duration_ms=4000.0, events=None, gaze=None, eeg=None, gaze_origin='top_left', seed=0):
        rng = np.random.default_rng(seed)
        if gaze is None:
            n = int(duration_ms * 60 / 1000)
            gaze = gaze_samples(np.full(n, 0.5), np.full(n, 0.5))
        if eeg is None:
            n = int(duration_ms * 500 / 1000)
            eeg = EegStream(np.arange(n) * 2.0, rng.standard_normal((n, len(CHANNELS))))
        if events is None:
            events = [TrialEvent(1, 'workshop_001', 'workshop', 'obj_01', (100.0, 100.0, 300.0, 250.0),
                                 500.0, 2500.0, 'clicked', 30)]
        montage = montages['standard_1020']
        return Recording('T01', SCREEN, gaze, eeg, events, CHANNELS, montage.subset(CHANNELS),
                         gaze_origin=gaze_origin)

    return make


@pytest.fixture(scope='session')
def synth_config():
    return PipelineConfig(seed=7).override({'synth.n_participants': 2, 'synth.trials_per_participant': 12})


@pytest.fixture(scope='session')
def synthetic(synth_config):
    """One generated participant: (recording, truth)."""
    return generate_participant(0, synth_config.synth, 7)


@pytest.fixture(scope='session')
def recording_dir(synthetic, tmp_path_factory):
    recording, truth = synthetic
    return write_participant(recording, truth, tmp_path_factory.mktemp('data') / recording.participant_id)


@pytest.fixture
def make_observations(channels):
    """
    Factory for labelled observations with random epochs.

    Targets carry extra variance on ``Pz`` scaled by ``effect`` and a longer
    fixation duration when ``duration_effect`` is set.
    """

    def make(n_per_class=20, participants=('P01',), domains=('workshop', 'desktop'), effect=0.0,
             duration_effect=False, seed=0, n_samples=120, srp=True):
        rng = np.random.default_rng(seed)
        observations = []
        key = 0
        pz = channels.index('Pz')
        for participant in participants:
            for label in ('target', 'nontarget'):
                for i in range(n_per_class):
                    domain = domains[i % len(domains)]
                    data = rng.standard_normal((len(channels), n_samples))
                    if label == 'target':
                        data[pz] *= 1.0 + effect
                    duration = rng.normal(280.0 if (label == 'target' and duration_effect) else 200.0, 20.0)
                    frp = Epoch(data, 500.0, channels, 1000.0 * key, n_samples * 2.0, 'frp', label,
                                i + 1, participant, domain, key)
                    srp_epoch = None
                    if srp:
                        srp_epoch = Epoch(rng.standard_normal((len(channels), 500)), 500.0, channels,
                                          1000.0 * key - 20.0, 1000.0, 'srp', label, i + 1, participant, domain, key)
                    observations.append(Observation(key, participant, i + 1, domain, label, float(duration),
                                                    frp, srp_epoch, n_objects=int(rng.integers(5, 50))))
                    key += 1
        return observations

    return make
