"""
Pilot-based channel estimation by point-wise spectral division.
"""

from typing import Tuple

import numpy as np

from config.isac_config import DspDefaults
from ..core.errors import DataError, SizeError


def estimate_channel(rx_spectrum, tx_spectrum, eps: float = DspDefaults.PILOT_EPS
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Channel estimate rx / tx on subcarriers where |tx| >= eps * max|tx|.

    rx_spectrum may hold several snapshots stacked along leading axes; the
    pilot applies along the last axis. Masked subcarriers are set to 0.

    Returns:
        (estimate, valid): complex estimate and the boolean validity mask
    """
    rx = np.asarray(rx_spectrum)
    tx = np.asarray(tx_spectrum)
    if tx.ndim != 1 or rx.shape[-1] != tx.size:
        raise SizeError(f"rx length {rx.shape[-1]} does not match pilot length {tx.size}")

    magnitude = np.abs(tx)
    peak = magnitude.max() if magnitude.size else 0.0
    if peak == 0:
        raise DataError("pilot spectrum is all zero; channel cannot be estimated")

    valid = magnitude >= eps * peak
    safe_tx = np.where(valid, tx, 1.0)
    estimate = np.where(valid, rx / safe_tx, 0.0)
    return estimate, valid
