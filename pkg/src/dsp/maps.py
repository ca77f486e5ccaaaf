"""
Delay-Doppler map formation, background subtraction and zero-Doppler notch.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal.windows import hann

from config.isac_config import DspDefaults
from ..core.errors import SizeError


@dataclass(frozen=True, eq=False)
class DelayDopplerMap:
    """
    Complex map over (delay bin x Doppler bin) for one link and CPI.

    Delay bin n is n * delay_bin_s; Doppler bin m is (m - M/2) * doppler_bin_hz.
    """

    link: int
    cpi_start_s: float
    delay_bin_s: float
    doppler_bin_hz: float
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise SizeError(f"map data must be 2-D, got shape {self.data.shape}")
        if not (self.delay_bin_s > 0 and self.doppler_bin_hz > 0):
            raise SizeError("map bin sizes must be positive")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    @property
    def zero_doppler_index(self) -> int:
        return self.data.shape[1] // 2

    @property
    def delay_axis_s(self) -> np.ndarray:
        return np.arange(self.data.shape[0]) * self.delay_bin_s

    @property
    def doppler_axis_hz(self) -> np.ndarray:
        return (np.arange(self.data.shape[1]) - self.zero_doppler_index) * self.doppler_bin_hz

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.data) ** 2

    def with_data(self, data: np.ndarray) -> "DelayDopplerMap":
        return replace(self, data=data)


def _window(n: int) -> np.ndarray:
    return hann(n, sym=False) if n > 1 else np.ones(1)


def form_map(snapshots: Sequence, bandwidth_hz: float, snapshot_rate_hz: float,
             link: int = 0, cpi_start_s: float = 0.0) -> DelayDopplerMap:
    """
    Delay-Doppler map from M consecutive CFR vectors of length K.

    A Hann window across subcarriers is followed by an inverse DFT taken
    with the subcarrier axis centered on the carrier, so the map phase of a
    path follows exp(-j 2 pi f_c tau). A Hann window across slow time is then
    followed by a zero-centered DFT. Both transforms are divided by their
    window sums: a unit on-bin static path peaks at magnitude 1.
    """
    lengths = {len(s) for s in snapshots}
    if len(lengths) > 1:
        raise SizeError(f"ragged CPI: subcarrier counts {sorted(lengths)}")
    x = np.asarray(snapshots, dtype=complex)
    if x.ndim != 2 or x.shape[0] == 0:
        raise SizeError(f"CPI must be a non-empty (M, K) array, got shape {x.shape}")
    m, k = x.shape

    w_delay = _window(k)
    profiles = np.fft.ifft(np.fft.ifftshift(x * w_delay, axes=1), axis=1) * (k / w_delay.sum())

    w_doppler = _window(m)
    spectrum = np.fft.fftshift(np.fft.fft(profiles * w_doppler[:, None], axis=0), axes=0) / w_doppler.sum()

    return DelayDopplerMap(
        link=link,
        cpi_start_s=float(cpi_start_s),
        delay_bin_s=1.0 / bandwidth_hz,
        doppler_bin_hz=snapshot_rate_hz / m,
        data=spectrum.T,
    )


def background_step(state: np.ndarray, z: DelayDopplerMap, beta: float = DspDefaults.BETA_BG
                    ) -> Tuple[np.ndarray, DelayDopplerMap]:
    """
    One exponential background update.

    residual = z - state_prev, state_new = beta * state_prev + (1 - beta) * z.
    """
    state = np.asarray(state)
    if state.shape != z.data.shape:
        raise SizeError(f"background state {state.shape} does not match map {z.data.shape}")
    residual = z.data - state
    new_state = beta * state + (1.0 - beta) * z.data
    return new_state, z.with_data(residual)


class BackgroundSubtractor:
    """Per-link background state; the first map initializes the state."""

    def __init__(self, beta: float = DspDefaults.BETA_BG, initial_state: Optional[np.ndarray] = None):
        self.beta = beta
        self.state = initial_state

    def __call__(self, z: DelayDopplerMap) -> DelayDopplerMap:
        if self.state is None:
            self.state = np.array(z.data)
        self.state, residual = background_step(self.state, z, self.beta)
        return residual


def notch_columns(n_doppler: int, halfwidth: int) -> np.ndarray:
    """Boolean mask of Doppler columns within halfwidth of the zero bin."""
    offsets = np.abs(np.arange(n_doppler) - n_doppler // 2)
    return offsets <= halfwidth


def notch_zero_doppler(z: DelayDopplerMap, halfwidth: int = DspDefaults.NOTCH_HALFWIDTH_BINS) -> DelayDopplerMap:
    """Zero the Doppler columns with |m - M/2| <= halfwidth."""
    data = np.array(z.data)
    data[:, notch_columns(data.shape[1], halfwidth)] = 0.0
    return z.with_data(data)
