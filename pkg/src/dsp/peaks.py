"""
Off-grid peak refinement by three-point parabolic interpolation.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .cfar import CfarHit
from .maps import DelayDopplerMap

# Floor for log-magnitude samples of empty cells
_TINY = 1e-300


@dataclass(frozen=True)
class Detection:
    """Off-grid (delay, Doppler) measurement on one link at one CPI."""

    link: int
    cpi_start_s: float
    delay_s: float
    doppler_hz: float
    snr_db: float
    delay_refined: bool = True
    doppler_refined: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cpi_start_s': self.cpi_start_s,
            'link': self.link,
            'delay_s': self.delay_s,
            'doppler_hz': self.doppler_hz,
            'snr_db': self.snr_db,
        }


def parabolic_offset(y_minus: float, y_zero: float, y_plus: float) -> float:
    """
    Vertex offset of the parabola through (-1, y_minus), (0, y_zero), (1, y_plus).

    Clamped to [-0.5, 0.5]; a zero curvature gives 0.
    """
    denominator = y_minus - 2.0 * y_zero + y_plus
    if denominator == 0:
        return 0.0
    return float(np.clip((y_minus - y_plus) / (2.0 * denominator), -0.5, 0.5))


def _refine_axis(samples: np.ndarray, index: int) -> Tuple[float, float, bool]:
    """Offset, vertex height increment and whether the axis was refined."""
    if index <= 0 or index >= samples.size - 1:
        return 0.0, 0.0, False
    y_minus, y_zero, y_plus = samples[index - 1], samples[index], samples[index + 1]
    delta = parabolic_offset(y_minus, y_zero, y_plus)
    return delta, -0.25 * (y_minus - y_plus) * delta, True


def refine_peak(z: DelayDopplerMap, peak: CfarHit, noise_mean: Optional[float] = None) -> Detection:
    """
    Off-grid delay and Doppler of a peak cell.

    Each axis is refined on natural-log magnitudes of the cell and its two
    neighbours. Peaks on a map edge keep the on-grid value of that axis and
    are flagged as unrefined. SNR is the interpolated peak power over the
    local CFAR noise mean.
    """
    n, m = peak.delay_idx, peak.doppler_idx
    log_mag = np.log(np.maximum(np.abs(z.data), _TINY))

    delta_d, lift_d, ok_d = _refine_axis(log_mag[:, m], n)
    delta_v, lift_v, ok_v = _refine_axis(log_mag[n, :], m)

    peak_power = np.exp(2.0 * (log_mag[n, m] + lift_d + lift_v))
    noise = peak.noise_mean if noise_mean is None else noise_mean
    snr_db = 10.0 * np.log10(peak_power / noise) if noise > 0 else np.inf

    return Detection(
        link=z.link,
        cpi_start_s=z.cpi_start_s,
        delay_s=(n + delta_d) * z.delay_bin_s,
        doppler_hz=(m - z.zero_doppler_index + delta_v) * z.doppler_bin_hz,
        snr_db=float(snr_db),
        delay_refined=ok_d,
        doppler_refined=ok_v,
    )
