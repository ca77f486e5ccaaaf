"""
Two-dimensional cell-averaging CFAR and hit clustering.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, signal

from config.isac_config import DspDefaults
from ..core.errors import ConfigurationError

# Cells whose clipped training window holds fewer cells are not tested
MIN_TRAINING_CELLS = 4


@dataclass(frozen=True)
class CfarConfig:
    """Guard and training half-widths per axis (delay, Doppler)."""

    guard: Tuple[int, int] = DspDefaults.GUARD
    train: Tuple[int, int] = DspDefaults.TRAIN
    pfa: float = DspDefaults.PFA

    def __post_init__(self):
        if not 0.0 < self.pfa < 0.5:
            raise ConfigurationError("pfa must lie in (0, 0.5)", "$.cfar.pfa")
        if min(self.guard) < 0 or min(self.train) < 0:
            raise ConfigurationError("guard and train sizes must be >= 0", "$.cfar")
        if self.ring_kernel().sum() < MIN_TRAINING_CELLS:
            raise ConfigurationError(
                f"training ring must hold at least {MIN_TRAINING_CELLS} cells", "$.cfar.train")

    def ring_kernel(self) -> np.ndarray:
        """Boolean training ring; guard cells and the cell under test are False."""
        (g_d, g_v), (t_d, t_v) = self.guard, self.train
        kernel = np.ones((2 * (g_d + t_d) + 1, 2 * (g_v + t_v) + 1), dtype=bool)
        kernel[t_d:t_d + 2 * g_d + 1, t_v:t_v + 2 * g_v + 1] = False
        return kernel

    def to_dict(self):
        return {'guard': list(self.guard), 'train': list(self.train), 'pfa': self.pfa}


@dataclass(frozen=True)
class CfarHit:
    """A cell above its CFAR threshold."""

    delay_idx: int
    doppler_idx: int
    power: float
    threshold: float
    noise_mean: float


def cfar_alpha(n_cells, pfa: float):
    """Threshold multiplier N * (pfa^(-1/N) - 1) for exponentially distributed cells."""
    n_cells = np.asarray(n_cells, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        return n_cells * (pfa ** (-1.0 / n_cells) - 1.0)


def cfar_threshold_map(power: np.ndarray, config: CfarConfig = CfarConfig(),
                       mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-cell threshold and training-cell mean.

    Windows are clipped at the map edges and the training count N is taken
    per cell; cells excluded by mask neither train nor get tested. Untested
    cells get an infinite threshold.
    """
    kernel = config.ring_kernel().astype(float)
    valid = np.ones(power.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    weights = valid.astype(float)

    n_cells = np.rint(signal.convolve2d(weights, kernel, mode='same'))
    sums = signal.convolve2d(power * weights, kernel, mode='same')

    testable = valid & (n_cells >= MIN_TRAINING_CELLS)
    safe_n = np.where(testable, n_cells, 1.0)
    noise_mean = np.where(testable, sums / safe_n, 0.0)
    threshold = np.where(testable, cfar_alpha(safe_n, config.pfa) * noise_mean, np.inf)
    return threshold, noise_mean


def cfar_detect(power: np.ndarray, config: CfarConfig = CfarConfig(),
                mask: Optional[np.ndarray] = None) -> List[CfarHit]:
    """Cells whose power exceeds alpha times their training mean, in row-major order."""
    power = np.asarray(power, dtype=float)
    threshold, noise_mean = cfar_threshold_map(power, config, mask)
    rows, cols = np.nonzero(power > threshold)
    return [CfarHit(int(r), int(c), float(power[r, c]), float(threshold[r, c]), float(noise_mean[r, c]))
            for r, c in zip(rows, cols)]


def cluster_hits(hits: Sequence[CfarHit], shape: Optional[Tuple[int, int]] = None) -> List[CfarHit]:
    """
    One peak per 8-connected group of hit cells: the group's strongest cell.

    Peaks come back sorted by (delay, Doppler) index.
    """
    if not hits:
        return []
    if shape is None:
        shape = (max(h.delay_idx for h in hits) + 1, max(h.doppler_idx for h in hits) + 1)

    occupied = np.zeros(shape, dtype=bool)
    power = np.full(shape, -np.inf)
    lookup = {}
    for hit in hits:
        occupied[hit.delay_idx, hit.doppler_idx] = True
        power[hit.delay_idx, hit.doppler_idx] = hit.power
        lookup[(hit.delay_idx, hit.doppler_idx)] = hit

    labels, n_groups = ndimage.label(occupied, structure=np.ones((3, 3), dtype=int))
    positions = ndimage.maximum_position(power, labels, index=np.arange(1, n_groups + 1))
    return sorted((lookup[tuple(int(v) for v in pos)] for pos in positions),
                  key=lambda h: (h.delay_idx, h.doppler_idx))
