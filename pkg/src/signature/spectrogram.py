"""
Short-time Fourier analysis of slow-time series and blade-flash estimation.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate, find_peaks
from scipy.signal.windows import hann

from config.isac_config import SignatureDefaults
from ..core.errors import ConfigurationError, InsufficientDataError, InsufficientPeriodicityError, SizeError
from ..dsp.peaks import parabolic_offset

MIN_COLUMNS = 8


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    Linear power over (time x Doppler).

    Each column is |DFT|^2 / window_len of a Hann-windowed segment, so a
    column sums to the energy of the windowed segment.
    """

    time_axis: np.ndarray
    doppler_axis: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        """Check axis/matrix consistency."""
        if self.power.shape != (self.time_axis.size, self.doppler_axis.size):
            raise SizeError(f"spectrogram matrix {self.power.shape} does not match axes")

    @property
    def hop_s(self) -> float:
        """Time between columns."""
        if self.time_axis.size < 2:
            return 0.0
        return float(self.time_axis[1] - self.time_axis[0])

    @property
    def duration_s(self) -> float:
        """Time spanned by the column centers plus one hop."""
        return self.time_axis.size * self.hop_s

    def peak_trace(self) -> np.ndarray:
        """Doppler of the strongest bin in every column."""
        return self.doppler_axis[np.argmax(self.power, axis=1)]


def spectrogram(series, rate_hz: float, window_len: int, hop: int) -> Spectrogram:
    """Hann-windowed STFT power with a zero-centered Doppler axis, one column per hop."""
    series = np.asarray(series, dtype=complex)
    if hop < 1:
        raise SizeError("hop must be >= 1")
    if window_len < 2 or series.size < window_len:
        raise SizeError(f"series of {series.size} samples is shorter than the window ({window_len})")

    window = hann(window_len, sym=False)
    segments = np.lib.stride_tricks.sliding_window_view(series, window_len)[::hop]
    spectra = np.fft.fftshift(np.fft.fft(segments * window, axis=1), axes=1)
    power = np.abs(spectra) ** 2 / window_len

    starts = np.arange(segments.shape[0]) * hop
    time_axis = (starts + window_len / 2) / rate_hz
    doppler_axis = np.fft.fftshift(np.fft.fftfreq(window_len, d=1.0 / rate_hz))
    return Spectrogram(time_axis=time_axis, doppler_axis=doppler_axis, power=power)


OCCUPANCY_MODES = ("extent", "count")


def occupancy(spec: Spectrogram, threshold_db: float = SignatureDefaults.OCCUPANCY_THRESHOLD_DB,
              mode: str = SignatureDefaults.OCCUPANCY_MODE) -> np.ndarray:
    """
    Occupied Doppler bins per column.

    A bin is occupied when its power exceeds the column median by
    threshold_db. mode "count" counts the occupied bins of each column.
    mode "extent" counts from the zero-Doppler bin up to the highest
    occupied positive-Doppler bin; columns without positive occupancy give 0.
    """
    if mode not in OCCUPANCY_MODES:
        raise ConfigurationError(f"occupancy mode must be one of {OCCUPANCY_MODES}")
    median = np.median(spec.power, axis=1, keepdims=True)
    occupied = spec.power > median * 10.0 ** (threshold_db / 10.0)
    if mode == "count":
        return occupied.sum(axis=1).astype(float)

    zero_bin = int(np.searchsorted(spec.doppler_axis, 0.0))
    positive = occupied[:, zero_bin:]

    has_any = positive.any(axis=1)
    highest = positive.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    return np.where(has_any, highest + 1, 0).astype(float)


def dominant_period(signal, dt: float,
                    min_periodicity: float = SignatureDefaults.MIN_PERIODICITY,
                    min_periods: int = SignatureDefaults.MIN_PERIODS) -> float:
    """
    Period of the strongest autocorrelation peak, refined by a parabola.

    Only lags up to len/min_periods are searched so the signal spans at
    least min_periods periods.
    """
    x = np.asarray(signal, dtype=float)
    if x.size < MIN_COLUMNS:
        raise InsufficientDataError(f"need at least {MIN_COLUMNS} samples, got {x.size}")
    x = x - x.mean()
    energy = float(x @ x)
    if energy <= 0:
        raise InsufficientPeriodicityError("signal is constant; no periodic structure")

    r = correlate(x, x, mode="full", method="fft")[x.size - 1:] / energy
    max_lag = x.size // min_periods
    if max_lag < 2:
        raise InsufficientDataError("signal too short to span the required number of periods")

    peaks, _ = find_peaks(r[:max_lag + 1])
    if peaks.size == 0:
        raise InsufficientPeriodicityError("no autocorrelation peak within the searched lags")
    best = peaks[np.argmax(r[peaks])]
    if r[best] < min_periodicity:
        raise InsufficientPeriodicityError(
            f"autocorrelation peak {r[best]:.2f} below periodicity threshold {min_periodicity}")

    offset = parabolic_offset(r[best - 1], r[best], r[best + 1]) if best + 1 < r.size else 0.0
    return (best + offset) * dt


def flash_rate(spec: Spectrogram, threshold_db: float = SignatureDefaults.OCCUPANCY_THRESHOLD_DB,
               mode: str = SignatureDefaults.OCCUPANCY_MODE) -> float:
    """
    Blade-flash repetition rate in Hz.

    For n identical blades rotating at f_rot this is n * f_rot.
    """
    if spec.time_axis.size < MIN_COLUMNS:
        raise InsufficientDataError(
            f"spectrogram has {spec.time_axis.size} columns; need at least {MIN_COLUMNS}")
    return 1.0 / dominant_period(occupancy(spec, threshold_db, mode), spec.hop_s)
