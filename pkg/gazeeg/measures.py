"""Univariate EEG measures: spectral band shares, fractal dimensions, Hjorth
parameters, detrended fluctuation and moments."""
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import fft, stats

from .errors import DegenerateSignal

BANDS = (
    ('delta', 0.5, 4.0),
    ('theta', 4.0, 7.0),
    ('alpha', 7.0, 12.0),
    ('beta', 12.0, 30.0),
    ('gamma', 30.0, 40.0),
)
TOTAL_BAND = (0.5, 40.0)


def band_power(x: np.ndarray, fs: float, bands=BANDS, total=TOTAL_BAND) -> np.ndarray:
    """
    Share of the magnitude spectrum falling into each band.

    Bands are half-open ``[low, high)``. A signal without spectral mass in the
    total range yields uniform shares.

    :param x: signal
    :param fs: sample rate in Hz
    :return: one share per band
    """
    x = np.asarray(x, dtype=np.float64)
    magnitude = np.abs(fft.rfft(x))
    freqs = fft.rfftfreq(x.shape[0], 1.0 / fs)
    mass = magnitude[(freqs >= total[0]) & (freqs < total[1])].sum()
    if mass <= 0:
        return np.full(len(bands), 1.0 / len(bands))
    return np.array([magnitude[(freqs >= lo) & (freqs < hi)].sum() / mass for _, lo, hi in bands])


def petrosian_fd(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    diff = np.diff(x)
    n_delta = np.count_nonzero(diff[1:] * diff[:-1] < 0)
    return float(np.log10(n) / (np.log10(n) + np.log10(n / (n + 0.4 * n_delta))))


def hjorth(x: np.ndarray) -> Tuple[float, float]:
    """Hjorth mobility and complexity from first and second differences."""
    x = np.asarray(x, dtype=np.float64)
    d1 = np.diff(x)
    d2 = np.diff(d1)
    var0, var1, var2 = np.var(x), np.var(d1), np.var(d2)
    if var0 == 0:
        raise DegenerateSignal("Hjorth parameters are undefined for a constant signal.")
    mobility = np.sqrt(var1 / var0)
    if var1 == 0:
        return float(mobility), 0.0
    return float(mobility), float(np.sqrt(var2 / var1) / mobility)


def higuchi_fd(x: np.ndarray, kmax: int = 8) -> float:
    """
    Higuchi fractal dimension: slope of ln L(k) over ln(1/k) for k = 1..kmax.
    """
    if kmax < 2:
        raise ValueError("Higuchi fractal dimension needs kmax >= 2, got {}.".format(kmax))
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n <= kmax:
        raise ValueError("Signal of {} samples is too short for kmax {}.".format(n, kmax))
    lengths = []
    for k in range(1, kmax + 1):
        per_offset = []
        for m in range(k):
            steps = (n - 1 - m) // k
            if steps < 1:
                continue
            curve = np.abs(np.diff(x[m:m + steps * k + 1:k])).sum()
            per_offset.append(curve * (n - 1) / (steps * k) / k)
        lengths.append(np.mean(per_offset))
    lengths = np.asarray(lengths)
    if np.any(lengths <= 0):
        raise DegenerateSignal("Higuchi curve length vanishes for a constant signal.")
    ks = np.arange(1, kmax + 1)
    return float(np.polyfit(np.log(1.0 / ks), np.log(lengths), 1)[0])


def dfa_windows(n: int, points: int = 12) -> np.ndarray:
    """Log-spaced integer window sizes from 4 to n/4, widened to n/2 for short signals."""
    for upper in (n // 4, n // 2):
        if upper < 4:
            continue
        sizes = np.unique(np.round(np.logspace(np.log10(4), np.log10(upper), points)).astype(int))
        if sizes.shape[0] >= 3:
            return sizes
    return np.arange(4, max(4, n // 2) + 1)


def dfa_alpha(x: np.ndarray, window_sizes: Optional[Sequence[int]] = None) -> float:
    """
    Detrended fluctuation analysis scaling exponent.

    :param x: signal
    :param window_sizes: window lengths in samples (default :func:`dfa_windows`)
    :return: slope of log F(n) over log n
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    profile = np.cumsum(x - x.mean())
    sizes = dfa_windows(n) if window_sizes is None else np.unique(np.asarray(window_sizes, dtype=int))
    sizes = sizes[(sizes >= 2) & (sizes <= n)]
    if sizes.shape[0] < 3:
        raise ValueError("DFA needs at least 3 window sizes, got {}.".format(sizes.shape[0]))
    fluctuations = []
    for size in sizes:
        count = n // size
        segments = profile[:count * size].reshape(count, size)
        t = np.arange(size) - 0.5 * (size - 1)
        means = segments.mean(axis=1, keepdims=True)
        slopes = (segments - means) @ t / (t @ t)
        residual = segments - means - slopes[:, None] * t[None, :]
        fluctuations.append(np.sqrt(np.mean(residual ** 2)))
    fluctuations = np.asarray(fluctuations)
    if np.any(fluctuations <= 0):
        raise DegenerateSignal("DFA fluctuation vanishes for a constant or linear signal.")
    return float(np.polyfit(np.log(sizes), np.log(fluctuations), 1)[0])


def moments(x: np.ndarray) -> Tuple[float, float, float, float, float]:
    """Skewness, excess kurtosis, minimum, maximum and population standard deviation."""
    x = np.asarray(x, dtype=np.float64)
    if np.ptp(x) == 0:
        raise DegenerateSignal("Skewness and kurtosis are undefined for a constant signal.")
    return (float(stats.skew(x, bias=True)),
            float(stats.kurtosis(x, fisher=True, bias=True)),
            float(x.min()), float(x.max()), float(x.std()))
