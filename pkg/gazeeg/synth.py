"""Synthetic gaze + EEG recordings with known ground truth.

Every participant gets a scanpath of planted fixations and minimum-jerk
saccades sampled at the gaze rate, and an EEG source mixture sampled at the
EEG rate: 1/f background sources, a parietal source carrying a positive
half-cosine bump after every target fixation onset, a frontal blink source and
a common reference signal. Background lead fields are orthogonal to the fixed
effect and blink patterns.
"""
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import fft, signal

from .config import PipelineConfig, SynthConfig
from .core import montages
from .errors import ConfigError
from .dataset import GAZE_DTYPE, EegStream, Recording, ScreenGeometry, TrialEvent, write_recording

LOG = logging.getLogger('gazeeg.synth')

MIN_AMPLITUDE_DEG = 3.0
BBOX_MARGIN_DEG = 3.0
CENTRE_EXCLUSION_DEG = 5.0
SCREEN_MARGIN_PX = 60.0
BBOX_SIZE_PX = (80.0, 200.0)
BBOX_BUFFER_PX = 10.0
DURATION_RANGE_MS = (120.0, 800.0)
DROPOUT_SAMPLES = (1, 3)
LEAD_WIDTH = 0.45
BLINK_SIGMA_MS = 60.0
BLINK_POSITION = (0.0, 0.95, 0.3)
OBJECT_COUNTS = {'workshop': (20, 60), 'desktop': (8, 40)}
MAX_DRAWS = 10000


@dataclass(frozen=True)
class PlantedFixation:
    onset_ms: float
    duration_ms: float
    x_px: float
    y_px: float
    label: str
    trial_id: Optional[int] = None

    @property
    def end_ms(self) -> float:
        return self.onset_ms + self.duration_ms


@dataclass(frozen=True)
class PlantedSaccade:
    onset_ms: float
    offset_ms: float
    start_px: Tuple[float, float]
    end_px: Tuple[float, float]
    amplitude_deg: float

    @property
    def peak_velocity_deg_s(self) -> float:
        # Peak of the minimum-jerk profile is 15/8 of the mean velocity.
        return 1.875 * self.amplitude_deg / ((self.offset_ms - self.onset_ms) / 1000.0)


@dataclass
class Truth:
    participant_id: str
    fixations: List[PlantedFixation]
    saccades: List[PlantedSaccade]
    forward: np.ndarray
    source_names: List[str]
    sources: np.ndarray
    effect_amplitude_uv: float
    duration_effect: bool
    blink_onsets_ms: List[float]

    def to_dict(self, channels: Sequence[str]) -> Dict:
        return {
            'participant_id': self.participant_id,
            'effect_amplitude_uv': self.effect_amplitude_uv,
            'duration_effect': self.duration_effect,
            'fixations': [asdict(fix) for fix in self.fixations],
            'saccades': [dict(asdict(sac), peak_velocity_deg_s=sac.peak_velocity_deg_s) for sac in self.saccades],
            'forward': {'channels': list(channels), 'sources': list(self.source_names),
                        'matrix': [[float(v) for v in row] for row in self.forward]},
            'blink_onsets_ms': [float(t) for t in self.blink_onsets_ms],
            'sources_file': 'truth_sources.npy',
        }


def saccade_duration_ms(amplitude_deg: float) -> float:
    """Main-sequence duration of a saccade."""
    return 2.2 * amplitude_deg + 21.0


def minimum_jerk(tau: np.ndarray) -> np.ndarray:
    """Normalised minimum-jerk position profile on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau ** 2)


def _angle_deg(p: Tuple[float, float], q: Tuple[float, float], screen: ScreenGeometry, eye_mm: float) -> float:
    sx, sy = screen.mm_per_px
    chord = np.hypot((p[0] - q[0]) * sx, (p[1] - q[1]) * sy)
    return float(np.degrees(2.0 * np.arctan(chord / (2.0 * eye_mm))))


def _px_per_deg(screen: ScreenGeometry, eye_mm: float) -> np.ndarray:
    return eye_mm * np.tan(np.radians(1.0)) / np.asarray(screen.mm_per_px)


def pink_noise(rng: np.random.Generator, n_signals: int, n_samples: int, slope: float = -1.0) -> np.ndarray:
    """
    Unit-variance noise with power spectrum ~ f**slope, shaped in the frequency domain.

    :param rng: random generator
    :param n_signals: number of independent signals
    :param n_samples: samples per signal
    :param slope: log-log slope of the power spectrum
    :return: (n_signals, n_samples)
    """
    spectrum = fft.rfft(rng.standard_normal((n_signals, n_samples)), axis=1)
    freqs = fft.rfftfreq(n_samples)
    gain = np.zeros_like(freqs)
    gain[1:] = freqs[1:] ** (slope / 2.0)
    noise = fft.irfft(spectrum * gain, n=n_samples, axis=1)
    std = noise.std(axis=1, keepdims=True)
    return noise / np.where(std > 0, std, 1.0)


def lead_field(channels: np.ndarray, sources: np.ndarray, width: float = LEAD_WIDTH) -> np.ndarray:
    """Gaussian falloff of each source over the scalp, (channels, sources), peak gain 1."""
    distance = np.linalg.norm(channels[:, None, :] - sources[None, :, :], axis=2)
    gain = np.exp(-distance ** 2 / (2.0 * width ** 2))
    return gain / gain.max(axis=0, keepdims=True)


def forward_model(rng: np.random.Generator, positions: np.ndarray, n_sources: int) -> np.ndarray:
    """
    Lead fields (channels, n_sources + 2) for the background, effect and blink sources.

    The effect (dipole under Pz) and blink (frontal) patterns are fixed and shared
    by all participants. Background columns are drawn per participant,
    orthonormalized against the common mode and both fixed patterns, and scaled
    so every channel receives unit background power on average. All columns
    sum to zero over channels, so re-referencing leaves them unchanged.

    :raises ConfigError: when the montage cannot hold ``n_sources`` orthogonal patterns
    """
    n_channels = positions.shape[0]
    if n_sources > n_channels - 3:
        raise ConfigError("synth.n_sources={} needs at least {} channels, got {}.".format(
            n_sources, n_sources + 3, n_channels))
    locations = np.vstack([montages['standard_1020']['Pz'][None, :],
                           np.asarray(BLINK_POSITION)[None, :] / np.linalg.norm(BLINK_POSITION)])
    fixed = lead_field(positions, locations)
    fixed = fixed - fixed.mean(axis=0, keepdims=True)
    fixed = fixed / np.abs(fixed).max(axis=0, keepdims=True)
    basis, _ = np.linalg.qr(np.column_stack([np.ones(n_channels), fixed]))
    draws = rng.standard_normal((n_channels, n_sources))
    draws -= basis @ (basis.T @ draws)
    background, _ = np.linalg.qr(draws)
    return np.hstack([background * np.sqrt(n_channels / n_sources), fixed])


class _Scanpath:
    """Timeline builder for planted fixations and saccades."""

    def __init__(self, screen: ScreenGeometry, eye_mm: float):
        self.screen = screen
        self.eye_mm = eye_mm
        self.centre = (screen.px[0] / 2.0, screen.px[1] / 2.0)
        self.position = self.centre
        self.t_ms = 0.0
        self.fixations: List[PlantedFixation] = []
        self.saccades: List[PlantedSaccade] = []

    def saccade_to(self, target: Tuple[float, float]):
        amplitude = _angle_deg(self.position, target, self.screen, self.eye_mm)
        duration = saccade_duration_ms(amplitude)
        self.saccades.append(PlantedSaccade(self.t_ms, self.t_ms + duration, self.position, target, amplitude))
        self.t_ms += duration
        self.position = target

    def fixate(self, duration_ms: float, label: str, trial_id: Optional[int] = None):
        self.fixations.append(PlantedFixation(self.t_ms, float(duration_ms), self.position[0], self.position[1],
                                              label, trial_id))
        self.t_ms += duration_ms


class _Participant:
    """Random draws of one participant."""

    def __init__(self, config: SynthConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.screen = ScreenGeometry(px=(int(config.screen_px[0]), int(config.screen_px[1])),
                                     mm=(float(config.screen_mm[0]), float(config.screen_mm[1])))
        self.eye_mm = config.eye_distance_mm
        self.margin_px = BBOX_MARGIN_DEG * _px_per_deg(self.screen, self.eye_mm)

    def angle(self, p, q) -> float:
        return _angle_deg(p, q, self.screen, self.eye_mm)

    def duration(self, mean_ms: float) -> float:
        shape = self.config.duration_shape
        return float(np.clip(self.rng.gamma(shape, mean_ms / shape), *DURATION_RANGE_MS))

    def bbox(self) -> Tuple[float, float, float, float]:
        width, height = self.screen.px
        centre = (width / 2.0, height / 2.0)
        for _ in range(MAX_DRAWS):
            w, h = self.rng.uniform(*BBOX_SIZE_PX, size=2)
            x0 = self.rng.uniform(SCREEN_MARGIN_PX, width - SCREEN_MARGIN_PX - w)
            y0 = self.rng.uniform(SCREEN_MARGIN_PX, height - SCREEN_MARGIN_PX - h)
            if self.angle((x0 + w / 2, y0 + h / 2), centre) >= CENTRE_EXCLUSION_DEG:
                return float(x0), float(y0), float(x0 + w), float(y0 + h)
        raise ConfigError("The screen is too small to place a target box away from its centre.")

    def outside(self, previous, bbox) -> Tuple[float, float]:
        """A point outside the widened box, far enough from ``previous`` and the screen centre."""
        width, height = self.screen.px
        centre = (width / 2.0, height / 2.0)
        mx, my = self.margin_px
        x0, y0, x1, y1 = bbox
        for _ in range(MAX_DRAWS):
            point = (float(self.rng.uniform(SCREEN_MARGIN_PX, width - SCREEN_MARGIN_PX)),
                     float(self.rng.uniform(SCREEN_MARGIN_PX, height - SCREEN_MARGIN_PX)))
            if x0 - mx <= point[0] <= x1 + mx and y0 - my <= point[1] <= y1 + my:
                continue
            if self.angle(point, previous) >= MIN_AMPLITUDE_DEG and self.angle(point, centre) >= MIN_AMPLITUDE_DEG:
                return point
        raise ConfigError("The screen is too small to place a non-target fixation.")

    def inside(self, bbox) -> Tuple[float, float]:
        x0, y0, x1, y1 = bbox
        qx, qy = 0.25 * (x1 - x0), 0.25 * (y1 - y0)
        return float(self.rng.uniform(x0 + qx, x1 - qx)), float(self.rng.uniform(y0 + qy, y1 - qy))


def plan_session(participant: _Participant) -> Tuple[_Scanpath, List[TrialEvent]]:
    """Planted scanpath and trial events: workshop scenes first, then desktop scenes."""
    config, rng = participant.config, participant.rng
    n_workshop = int(round(config.trials_per_participant * config.workshop_fraction))
    domains = ['workshop'] * n_workshop + ['desktop'] * (config.trials_per_participant - n_workshop)
    path = _Scanpath(participant.screen, participant.eye_mm)
    target_mean = config.target_duration_ms if config.duration_effect_active else config.nontarget_duration_ms

    path.fixate(config.pause_ms, 'pause')
    events, counters = [], {'workshop': 0, 'desktop': 0}
    for trial_id, domain in enumerate(domains, start=1):
        counters[domain] += 1
        bbox = participant.bbox()
        skipped = bool(rng.random() < config.skip_rate)
        n_total = int(rng.integers(config.fixations_min, config.fixations_max + 1))
        n_post = 0 if skipped else int(rng.integers(0, config.post_target_max + 1))
        n_before = n_total if skipped else max(1, n_total - 1 - n_post)

        onset = path.t_ms
        for _ in range(n_before):
            path.saccade_to(participant.outside(path.position, bbox))
            path.fixate(participant.duration(config.nontarget_duration_ms), 'nontarget', trial_id)
        if not skipped:
            path.saccade_to(participant.inside(bbox))
            path.fixate(participant.duration(target_mean), 'target', trial_id)
            for _ in range(n_post):
                path.saccade_to(participant.outside(path.position, bbox))
                path.fixate(participant.duration(config.nontarget_duration_ms), 'post', trial_id)
        end = path.t_ms

        low, high = OBJECT_COUNTS[domain]
        x0, y0, x1, y1 = bbox
        events.append(TrialEvent(trial_id=trial_id,
                                 scene_id='{}_{:03d}'.format(domain, counters[domain]),
                                 scene_domain=domain,
                                 target_id='obj_{:02d}'.format(int(rng.integers(1, 100))),
                                 target_bbox=(round(x0 - BBOX_BUFFER_PX, 1), round(y0 - BBOX_BUFFER_PX, 1),
                                              round(x1 + BBOX_BUFFER_PX, 1), round(y1 + BBOX_BUFFER_PX, 1)),
                                 search_onset_ms=round(onset, 3),
                                 search_end_ms=round(end, 3),
                                 outcome='skipped' if skipped else 'clicked',
                                 n_objects=int(rng.integers(low, high + 1))))
        path.saccade_to(path.centre)
        path.fixate(config.pause_ms, 'pause')
    return path, events


def sample_gaze(participant: _Participant, path: _Scanpath) -> np.ndarray:
    """Binocular gaze samples of a planted scanpath with AR(1) jitter and short dropouts."""
    config, rng, screen = participant.config, participant.rng, participant.screen
    period = 1000.0 / config.gaze_rate_hz
    t = np.arange(int(np.floor(path.t_ms / period))) * period
    x = np.empty_like(t)
    y = np.empty_like(t)
    fixating = np.zeros(t.shape[0], dtype=bool)
    for fix in path.fixations:
        sel = (t >= fix.onset_ms) & (t < fix.end_ms)
        x[sel], y[sel] = fix.x_px, fix.y_px
        fixating[sel] = True
    for sac in path.saccades:
        sel = (t >= sac.onset_ms) & (t < sac.offset_ms)
        s = minimum_jerk((t[sel] - sac.onset_ms) / (sac.offset_ms - sac.onset_ms))
        x[sel] = sac.start_px[0] + s * (sac.end_px[0] - sac.start_px[0])
        y[sel] = sac.start_px[1] + s * (sac.end_px[1] - sac.start_px[1])

    rho = config.jitter_correlation
    scale = config.gaze_jitter_deg * np.sqrt(1.0 - rho ** 2)
    jitter = signal.lfilter([scale], [1.0, -rho], rng.standard_normal((2, t.shape[0])), axis=1)
    px_per_deg = _px_per_deg(screen, participant.eye_mm)
    x = x + jitter[0] * px_per_deg[0]
    y = y + jitter[1] * px_per_deg[1]

    gaze = np.zeros(t.shape[0], dtype=GAZE_DTYPE)
    gaze['t_ms'] = t
    for eye in ('l', 'r'):
        gaze[eye + 'x'] = x / screen.px[0]
        gaze[eye + 'y'] = y / screen.px[1]
        gaze[eye + 'valid'] = True
    gaze['eye_dist_mm'] = participant.eye_mm

    # Dropouts only start inside fixations, away from their edges.
    edge = DROPOUT_SAMPLES[1] + 1
    interior = fixating & np.roll(fixating, edge) & np.roll(fixating, -edge)
    starts = np.flatnonzero(interior & (rng.random(t.shape[0]) < config.dropout_rate / 2.0))
    for start in starts:
        length = int(rng.integers(DROPOUT_SAMPLES[0], DROPOUT_SAMPLES[1] + 1))
        eyes = (('l',), ('r',), ('l', 'r'))[int(rng.integers(0, 3))]
        for eye in eyes:
            gaze[eye + 'valid'][start:start + length] = False
            gaze[eye + 'x'][start:start + length] = 0.0
            gaze[eye + 'y'][start:start + length] = 0.0
    return gaze


def blink_train(rng: np.random.Generator, t_ms: np.ndarray, rate_hz: float, amplitude_uv: float
                ) -> Tuple[np.ndarray, List[float]]:
    """Gaussian blink pulses at Poisson onsets."""
    duration_s = (t_ms[-1] - t_ms[0]) / 1000.0
    count = int(rng.poisson(rate_hz * duration_s)) if rate_hz > 0 else 0
    onsets = np.sort(rng.uniform(t_ms[0], t_ms[-1], size=count))
    wave = np.zeros_like(t_ms)
    for onset in onsets:
        near = np.abs(t_ms - onset) <= 4.0 * BLINK_SIGMA_MS
        wave[near] += amplitude_uv * np.exp(-0.5 * ((t_ms[near] - onset) / BLINK_SIGMA_MS) ** 2)
    return wave, [float(onset) for onset in onsets]


def effect_wave(t_ms: np.ndarray, onsets_ms: Sequence[float], amplitude_uv: float, peak_ms: float,
                width_ms: float) -> np.ndarray:
    """Positive half-cosine bumps of ``width_ms`` peaking ``peak_ms`` after every onset."""
    wave = np.zeros_like(t_ms)
    if amplitude_uv == 0:
        return wave
    for onset in onsets_ms:
        phase = (t_ms - onset - peak_ms) / width_ms
        near = np.abs(phase) <= 0.5
        wave[near] += amplitude_uv * np.cos(np.pi * phase[near])
    return wave


def mix_eeg(participant: _Participant, path: _Scanpath, channels: Sequence[str], positions: np.ndarray
            ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, List[str], np.ndarray, List[float]]:
    """EEG frames (n, channels) and the forward model that produced them."""
    config, rng = participant.config, participant.rng
    period = 1000.0 / config.eeg_rate_hz
    t = np.arange(int(np.floor(path.t_ms / period))) * period
    n = t.shape[0]

    background = pink_noise(rng, config.n_sources, n, config.noise_slope) * config.background_uv
    targets = [fix.onset_ms for fix in path.fixations if fix.label == 'target']
    effect = (pink_noise(rng, 1, n, config.noise_slope)[0] * config.effect_background_uv
              + effect_wave(t, targets, config.effect_amplitude_uv, config.effect_peak_ms, config.effect_width_ms))
    blink, blink_onsets = blink_train(rng, t, config.blink_rate_hz, config.blink_amplitude_uv)
    sources = np.vstack([background, effect[None, :], blink[None, :]])

    forward = forward_model(rng, positions, config.n_sources)
    reference = pink_noise(rng, 1, n, config.noise_slope)[0] * config.reference_uv
    noise = rng.standard_normal((len(channels), n)) * config.sensor_noise_uv
    values = forward @ sources + reference[None, :] + noise
    names = ['background_{:02d}'.format(i + 1) for i in range(config.n_sources)] + ['effect', 'blink']
    return t, values.T, forward, names, sources, blink_onsets


def participant_id(index: int, count: int) -> str:
    return 'P{:0{width}d}'.format(index + 1, width=max(2, len(str(count))))


def generate_participant(index: int, config: SynthConfig, seed: Union[int, np.random.SeedSequence]
                         ) -> Tuple[Recording, Truth]:
    """
    Generate one participant's recording and ground truth.

    :param index: zero-based participant index
    :param config: generator settings
    :param seed: seed or seed sequence of this participant's random stream
    :return: recording, truth
    """
    rng = np.random.default_rng(seed)
    participant = _Participant(config, rng)
    path, events = plan_session(participant)
    gaze = sample_gaze(participant, path)
    montage = montages['standard_1020']
    channels = montage.names
    t, values, forward, names, sources, blinks = mix_eeg(participant, path, channels, montage.positions(channels))

    pid = participant_id(index, config.n_participants)
    recording = Recording(participant_id=pid,
                          screen=participant.screen,
                          gaze=gaze,
                          eeg=EegStream(t_ms=t, values=values),
                          events=events,
                          channels=channels,
                          montage=montage.subset(channels),
                          gaze_rate_hz=config.gaze_rate_hz,
                          eeg_rate_hz=config.eeg_rate_hz,
                          bbox_buffer_px=BBOX_BUFFER_PX,
                          gaze_origin=config.gaze_origin)
    truth = Truth(participant_id=pid,
                  fixations=path.fixations,
                  saccades=path.saccades,
                  forward=forward,
                  source_names=names,
                  sources=sources,
                  effect_amplitude_uv=config.effect_amplitude_uv,
                  duration_effect=config.duration_effect_active,
                  blink_onsets_ms=blinks)
    LOG.info("synthesized participant=%s trials=%d fixations=%d targets=%d seconds=%.1f", pid, len(events),
             len(path.fixations), sum(fix.label == 'target' for fix in path.fixations), path.t_ms / 1000.0)
    return recording, truth


def write_participant(recording: Recording, truth: Truth, path: Union[str, Path]) -> Path:
    root = write_recording(recording, path)
    (root / 'truth.json').write_text(json.dumps(truth.to_dict(recording.channels), indent=2, sort_keys=True) + "\n",
                                     encoding='utf-8')
    np.save(root / 'truth_sources.npy', truth.sources)
    return root


def load_truth(path: Union[str, Path]) -> Dict:
    """truth.json of a generated recording directory, with the source signals under ``'sources'``."""
    root = Path(path)
    truth = json.loads((root / 'truth.json').read_text(encoding='utf-8'))
    truth['sources'] = np.load(root / truth['sources_file'])
    return truth


def _generate_one(index: int, config: SynthConfig, seed: np.random.SeedSequence, out: Path) -> Path:
    recording, truth = generate_participant(index, config, seed)
    return write_participant(recording, truth, out / recording.participant_id)


def generate(config: Optional[PipelineConfig] = None, out: Union[str, Path] = 'data',
             jobs: Optional[int] = None) -> List[Path]:
    """
    Write one recording directory per synthetic participant.

    Each participant draws from its own stream spawned from the master seed,
    so output does not depend on the number of workers.

    :param config: pipeline config, ``synth`` section and seed are used
    :param out: output directory
    :param jobs: worker count (default: config)
    :return: participant directories in participant order
    """
    config = (config or PipelineConfig()).validate()
    jobs = config.resolved_jobs if jobs is None else jobs
    out = Path(out).expanduser().resolve()
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(config.synth_seed).spawn(config.synth.n_participants)
    paths = Parallel(n_jobs=jobs)(delayed(_generate_one)(index, config.synth, seed, out)
                                  for index, seed in enumerate(seeds))
    LOG.info("generated participants=%d seed=%d out=%s", len(paths), config.synth_seed, out)
    return list(paths)
