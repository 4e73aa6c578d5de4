"""EEG cleaning and epoching.

The chain follows the recording study: band-pass and notch filtering, bad
channel detection with spherical spline repair, common average reference,
SOBI source separation with heuristic artifact rejection.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, signal, special, stats

from .config import EegConfig
from .core.epoch import Epoch
from .dataset import Recording
from .errors import AllRejected, FilterDesignError, TooFewChannels
from .gaze import Fixation, Saccade

LOG = logging.getLogger('gazeeg.eeg')

MIN_SAMPLE_RATE_HZ = 200.0
RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class EegMatrix:
    """Continuous EEG, channels x samples in microvolts."""
    data: np.ndarray
    sample_rate_hz: float
    channels: Tuple[str, ...]
    positions: Optional[np.ndarray] = None
    t0_ms: float = 0.0

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channels):
            raise ValueError("EEG data rows must match the channel list.")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("EEG data must be finite.")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def end_ms(self) -> float:
        return self.t0_ms + 1000.0 * self.n_samples / self.sample_rate_hz

    def with_data(self, data: np.ndarray) -> "EegMatrix":
        return replace(self, data=np.asarray(data, dtype=np.float64))

    def channel(self, name: str) -> np.ndarray:
        return self.data[self.channels.index(name)]


def from_recording(rec: Recording) -> EegMatrix:
    return EegMatrix(data=np.array(rec.eeg.values.T, dtype=np.float64),
                     sample_rate_hz=rec.eeg_rate_hz,
                     channels=tuple(rec.channels),
                     positions=rec.montage.positions(rec.channels),
                     t0_ms=float(rec.eeg.t_ms[0]) if len(rec.eeg) else 0.0)


def _filtfilt(sos: np.ndarray, data: np.ndarray) -> np.ndarray:
    padlen = min(3 * (2 * sos.shape[0] + 1), data.shape[-1] - 1)
    return signal.sosfiltfilt(sos, data, axis=-1, padlen=max(padlen, 0))


def _check_cutoffs(fs: float, *cutoffs: float):
    if fs < MIN_SAMPLE_RATE_HZ:
        raise FilterDesignError("EEG sample rate {} Hz is below {} Hz.".format(fs, MIN_SAMPLE_RATE_HZ))
    for cutoff in cutoffs:
        if not 0 < cutoff < fs / 2:
            raise FilterDesignError("Cutoff {} Hz must lie in (0, {}) Hz.".format(cutoff, fs / 2))


def highpass(x: EegMatrix, cutoff_hz: float, order: int = 4) -> EegMatrix:
    _check_cutoffs(x.sample_rate_hz, cutoff_hz)
    sos = signal.butter(order, cutoff_hz, btype='highpass', fs=x.sample_rate_hz, output='sos')
    return x.with_data(_filtfilt(sos, x.data))


def bandpass_chain(x: EegMatrix, config: EegConfig = EegConfig()) -> EegMatrix:
    """
    Zero-phase high-pass, band-stop and low-pass filtering of every channel.

    :param x: continuous EEG
    :param config: cutoffs and Butterworth order
    :return: filtered EEG
    """
    fs = x.sample_rate_hz
    _check_cutoffs(fs, config.highpass_hz, config.notch_low_hz, config.notch_high_hz, config.lowpass_hz)
    chain = [
        signal.butter(config.filter_order, config.highpass_hz, btype='highpass', fs=fs, output='sos'),
        signal.butter(config.filter_order, [config.notch_low_hz, config.notch_high_hz],
                      btype='bandstop', fs=fs, output='sos'),
        signal.butter(config.filter_order, config.lowpass_hz, btype='lowpass', fs=fs, output='sos'),
    ]
    data = x.data
    for sos in chain:
        data = _filtfilt(sos, data)
    return x.with_data(data)


def channel_correlations(data: np.ndarray) -> np.ndarray:
    """Absolute Pearson correlation matrix; undefined entries and the diagonal are 0."""
    with np.errstate(divide='ignore', invalid='ignore'):
        corr = np.corrcoef(data)
    corr = np.nan_to_num(np.abs(np.atleast_2d(corr)), nan=0.0)
    np.fill_diagonal(corr, 0.0)
    return corr


def detect_bad_channels(x: EegMatrix, config: EegConfig = EegConfig()) -> List[str]:
    """
    Channels whose best correlation with any other channel stays below the threshold.

    Correlations are computed on high-passed data in consecutive windows; a
    channel is bad when flagged in more than ``bad_channel_fraction`` of them.

    :param x: continuous EEG
    :param config: threshold, window length and fraction
    :return: bad channel names in montage order
    """
    if len(x.channels) < 2:
        return list(x.channels)
    data = highpass(x, config.highpass_hz, config.filter_order).data
    window = int(round(config.bad_channel_window_s * x.sample_rate_hz))
    count = max(1, data.shape[1] // window) if window > 0 else 1
    if data.shape[1] < window:
        window = data.shape[1]
    flagged = np.zeros(len(x.channels), dtype=int)
    for k in range(count):
        corr = channel_correlations(data[:, k * window:(k + 1) * window])
        flagged += corr.max(axis=1) < config.bad_channel_threshold
    bad = [name for name, hits in zip(x.channels, flagged) if hits / count > config.bad_channel_fraction]
    LOG.debug("bad_channels windows=%d bad=%s", count, ",".join(bad) or "-")
    return bad


def spline_kernel(cosines: np.ndarray, order: int = 4, terms: int = 7) -> np.ndarray:
    """Spherical spline g(x) = 1/(4 pi) sum_n (2n+1) / (n^m (n+1)^m) P_n(x)."""
    cosines = np.clip(cosines, -1.0, 1.0)
    out = np.zeros_like(cosines, dtype=np.float64)
    for n in range(1, terms + 1):
        out += (2 * n + 1) / (n ** order * (n + 1) ** order) * special.eval_legendre(n, cosines)
    return out / (4 * np.pi)


def interpolation_matrix(good: np.ndarray, bad: np.ndarray, order: int = 4, terms: int = 7,
                         ridge: float = 1e-5) -> np.ndarray:
    """
    Linear map from good-channel values to bad-channel values.

    :param good: unit vectors of good channels (n_good, 3)
    :param bad: unit vectors of bad channels (n_bad, 3)
    :return: (n_bad, n_good) matrix
    """
    n = good.shape[0]
    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = spline_kernel(good @ good.T, order, terms) + ridge * np.eye(n)
    system[:n, n] = 1.0
    system[n, :n] = 1.0
    rhs = np.vstack([spline_kernel(bad @ good.T, order, terms).T, np.ones((1, bad.shape[0]))])
    weights = linalg.solve(system, rhs, assume_a='sym')
    return weights[:n].T


def interpolate_spherical(x: EegMatrix, bad: Sequence[str], config: EegConfig = EegConfig()) -> EegMatrix:
    """
    Replace bad channels by spherical spline interpolation over the good ones.

    :param x: continuous EEG with montage positions
    :param bad: bad channel names
    :param config: spline order, Legendre terms and ridge
    :return: repaired EEG
    """
    bad = [name for name in x.channels if name in set(bad)]
    good = [i for i, name in enumerate(x.channels) if name not in bad]
    if len(good) < 4:
        raise TooFewChannels("Spherical interpolation needs at least 4 good channels, got {}.".format(len(good)))
    if not bad:
        return x
    if x.positions is None:
        raise ValueError("Spherical interpolation needs montage positions.")
    bad_index = [x.channels.index(name) for name in bad]
    matrix = interpolation_matrix(x.positions[good], x.positions[bad_index],
                                  config.spline_order, config.legendre_terms, config.spline_ridge)
    data = x.data.copy()
    data[bad_index] = matrix @ x.data[good]
    LOG.info("interpolated channels=%s", ",".join(bad))
    return x.with_data(data)


def common_average_reference(x: EegMatrix) -> EegMatrix:
    return x.with_data(x.data - x.data.mean(axis=0, keepdims=True))


@dataclass
class SobiResult:
    unmixing: np.ndarray
    mixing: np.ndarray
    sources: np.ndarray
    mean: np.ndarray
    converged: bool
    history: List[float] = field(default_factory=list)

    @property
    def sweeps(self) -> int:
        return max(0, len(self.history) - 1)


def _off_mass(stack: np.ndarray, r: int) -> float:
    blocks = stack.reshape(r, -1, r).transpose(1, 0, 2)
    diagonal = np.einsum('kii->ki', blocks)
    return float(np.sum(blocks ** 2) - np.sum(diagonal ** 2))


def joint_diagonalize(stack: np.ndarray, tol: float = 1e-8, max_sweeps: int = 100
                      ) -> Tuple[np.ndarray, bool, List[float]]:
    """
    Approximate joint diagonalization of symmetric matrices by Jacobi rotations.

    :param stack: (r, r * K) horizontal stack of K symmetric matrices
    :return: rotation V (r, r), convergence flag, off-diagonal mass per sweep
    """
    stack = np.array(stack, dtype=np.float64, copy=True)
    r = stack.shape[0]
    k = stack.shape[1] // r
    rotation = np.eye(r)
    history = [_off_mass(stack, r)]
    if r < 2:
        return rotation, True, history
    converged = False
    for _ in range(max_sweeps):
        rotated = False
        for p in range(r - 1):
            for q in range(p + 1, r):
                ip = np.arange(p, r * k, r)
                iq = np.arange(q, r * k, r)
                g = np.vstack([stack[p, ip] - stack[q, iq], stack[p, iq] + stack[q, ip]])
                gg = g @ g.T
                ton = gg[0, 0] - gg[1, 1]
                toff = gg[0, 1] + gg[1, 0]
                theta = 0.5 * np.arctan2(toff, ton + np.sqrt(ton * ton + toff * toff))
                if abs(theta) < 1e-12:
                    continue
                rotated = True
                c, s = np.cos(theta), np.sin(theta)
                givens = np.array([[c, -s], [s, c]])
                pair = [p, q]
                rotation[:, pair] = rotation[:, pair] @ givens
                stack[pair, :] = givens.T @ stack[pair, :]
                left, right = stack[:, ip].copy(), stack[:, iq].copy()
                stack[:, ip] = c * left + s * right
                stack[:, iq] = -s * left + c * right
        history.append(_off_mass(stack, r))
        previous, current = history[-2], history[-1]
        if not rotated or abs(previous - current) <= tol * max(previous, np.finfo(float).tiny):
            converged = True
            break
    return rotation, converged, history


def lagged_covariances(z: np.ndarray, n_lags: int) -> np.ndarray:
    """Symmetrized lagged covariances for lags 1..n_lags, stacked horizontally."""
    n = z.shape[1]
    blocks = []
    for lag in range(1, min(n_lags, n - 1) + 1):
        cov = z[:, lag:] @ z[:, :-lag].T / (n - lag)
        blocks.append(0.5 * (cov + cov.T))
    return np.hstack(blocks)


def sobi_unmix(x, n_lags: int = 50, tol: float = 1e-8, max_sweeps: int = 100) -> SobiResult:
    """
    Second-order blind identification.

    Whitens the data (rank deficient directions are dropped), jointly
    diagonalizes the lagged covariances and returns the unmixing matrix and
    sources. Hitting the sweep cap returns the best iterate with
    ``converged=False``.

    :param x: EegMatrix or (channels, samples) array
    :param n_lags: number of lags starting at 1
    :param tol: relative change of the off-diagonal mass that stops the sweeps
    :param max_sweeps: sweep cap
    :return: unmixing (r, channels), mixing (channels, r), sources (r, samples)
    """
    data = x.data if isinstance(x, EegMatrix) else np.asarray(x, dtype=np.float64)
    mean = data.mean(axis=1, keepdims=True)
    centred = data - mean
    n = centred.shape[1]
    eigenvalues, eigenvectors = linalg.eigh(centred @ centred.T / n)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, eigenvectors = eigenvalues[order], eigenvectors[:, order]
    keep = eigenvalues > RANK_TOLERANCE * max(eigenvalues[0], np.finfo(float).tiny)
    eigenvalues, eigenvectors = eigenvalues[keep], eigenvectors[:, keep]
    whitener = (eigenvectors / np.sqrt(eigenvalues)).T
    dewhitener = eigenvectors * np.sqrt(eigenvalues)

    rotation, converged, history = joint_diagonalize(lagged_covariances(whitener @ centred, n_lags),
                                                     tol, max_sweeps)
    unmixing = rotation.T @ whitener
    mixing = dewhitener @ rotation
    if not converged:
        LOG.warning("sobi not converged sweeps=%d off=%.3e", len(history) - 1, history[-1])
    LOG.debug("sobi rank=%d sweeps=%d", unmixing.shape[0], len(history) - 1)
    return SobiResult(unmixing=unmixing, mixing=mixing, sources=unmixing @ centred,
                      mean=mean, converged=converged, history=history)


def artifact_components(sobi: SobiResult, reference: Optional[np.ndarray],
                        ocular_threshold: float = 0.7, kurtosis_threshold: float = 15.0) -> np.ndarray:
    """
    Indices of components flagged as ocular (correlated with the frontal
    reference) or spiky (excess kurtosis above the threshold).
    """
    sources = sobi.sources
    with np.errstate(divide='ignore', invalid='ignore'):
        kurtosis = np.nan_to_num(stats.kurtosis(sources, axis=1, fisher=True, bias=True), nan=0.0)
    flagged = kurtosis > kurtosis_threshold
    if reference is not None and np.std(reference) > 0:
        ref = (reference - reference.mean()) / reference.std()
        spread = sources.std(axis=1)
        centred = sources - sources.mean(axis=1, keepdims=True)
        with np.errstate(divide='ignore', invalid='ignore'):
            corr = np.nan_to_num(np.abs(centred @ ref) / (sources.shape[1] * spread), nan=0.0)
        flagged |= corr > ocular_threshold
    return np.flatnonzero(flagged)


def reject_artifact_components(x: EegMatrix, sobi: SobiResult, frontal_channels: Sequence[str] = ('Fp1', 'Fp2'),
                               config: EegConfig = EegConfig()) -> Tuple[EegMatrix, List[int]]:
    """
    Remove artifact components and back-project the rest.

    :param x: pre-separation EEG the sources were computed from
    :param sobi: separation result
    :param frontal_channels: channels averaged into the ocular reference
    :param config: rejection thresholds
    :return: cleaned EEG and rejected component indices
    """
    frontal = [name for name in frontal_channels if name in x.channels]
    if frontal:
        reference = np.mean([x.channel(name) for name in frontal], axis=0)
    else:
        LOG.warning("no frontal channels present, ocular criterion disabled")
        reference = None
    rejected = artifact_components(sobi, reference, config.ocular_threshold, config.kurtosis_threshold)
    n_components = sobi.sources.shape[0]
    if rejected.shape[0] == n_components:
        raise AllRejected("All {} components were flagged as artifacts.".format(n_components))
    keep = np.setdiff1d(np.arange(n_components), rejected)
    cleaned = sobi.mixing[:, keep] @ sobi.sources[keep] + sobi.mean
    LOG.info("components rejected=%d of=%d", rejected.shape[0], n_components)
    return x.with_data(cleaned), rejected.tolist()


class PreprocessResult(NamedTuple):
    eeg: EegMatrix
    bad_channels: List[str]
    rejected_components: List[int]
    converged: bool


def preprocess(x: EegMatrix, config: EegConfig = EegConfig()) -> PreprocessResult:
    """Full cleaning chain: filters, bad channels, interpolation, CAR, SOBI and rejection."""
    filtered = bandpass_chain(x, config)
    bad = detect_bad_channels(filtered, config)
    repaired = interpolate_spherical(filtered, bad, config)
    referenced = common_average_reference(repaired)
    sobi = sobi_unmix(referenced, config.sobi_lags, config.sobi_tolerance, config.sobi_max_sweeps)
    cleaned, rejected = reject_artifact_components(referenced, sobi, config.frontal_channels, config)
    return PreprocessResult(cleaned, bad, rejected, sobi.converged)


class EpochingResult(NamedTuple):
    epochs: List[Optional[Epoch]]
    skipped: int


def _slice(x: EegMatrix, onset_ms: float, duration_ms: float, kind: str) -> Optional[Epoch]:
    fs = x.sample_rate_hz
    start = int(round((onset_ms - x.t0_ms) * fs / 1000.0))
    count = max(1, int(round(duration_ms * fs / 1000.0)))
    if start < 0 or start + count > x.n_samples:
        return None
    return Epoch(x.data[:, start:start + count].copy(), fs, x.channels, onset_ms, duration_ms, kind=kind)


def epoch_fixations(x: EegMatrix, fixations: Sequence[Fixation]) -> EpochingResult:
    """
    Fixation-locked epochs from fixation onset through its duration.

    Fixations extending beyond the EEG span are skipped (``None``) and counted.
    """
    epochs = [_slice(x, fix.onset_ms, fix.duration_ms, 'frp') for fix in fixations]
    skipped = sum(epoch is None for epoch in epochs)
    if skipped:
        LOG.warning("epochs skipped=%d kind=frp reason=outside_eeg_span", skipped)
    return EpochingResult(epochs, skipped)


def epoch_srp(x: EegMatrix, fixations: Sequence[Fixation], saccades: Sequence[Saccade],
              length_ms: float = 1000.0) -> EpochingResult:
    """
    Saccade-locked epochs of fixed length starting at the midpoint of the
    saccade preceding each fixation.

    Exactly one entry per fixation: an epoch, or ``None`` for a recorded skip.
    """
    ordered = sorted(saccades, key=lambda sac: sac.offset_ms)
    offsets = np.array([sac.offset_ms for sac in ordered])
    epochs = []
    for fix in fixations:
        position = int(np.searchsorted(offsets, fix.onset_ms + 1e-9, side='right')) - 1
        if position < 0:
            epochs.append(None)
            continue
        epochs.append(_slice(x, ordered[position].midpoint_ms, length_ms, 'srp'))
    skipped = sum(epoch is None for epoch in epochs)
    if skipped:
        LOG.warning("epochs skipped=%d kind=srp", skipped)
    return EpochingResult(epochs, skipped)
