"""
Matplotlib figures of delay-Doppler maps, spectrograms, tracks and fixes.
"""

from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import matplotlib.pyplot as plt
import numpy as np

from config.isac_config import PlotConfig
from ..dsp.maps import DelayDopplerMap
from ..signature.spectrogram import Spectrogram
from ..tracking.localization import PositionFix
from ..tracking.tracker import TrackSnapshot
from .export import map_db


def plot_map(z: DelayDopplerMap, title: Optional[str] = None,
             dynamic_range_db: float = PlotConfig.DYNAMIC_RANGE_DB,
             truth: Optional[Tuple[float, float]] = None,
             track: Sequence[Tuple[float, float]] = (),
             figsize: Optional[Tuple[int, int]] = None) -> plt.Figure:
    """
    Delay-Doppler map in dB, Doppler on x and delay on y.

    Args:
        z: The map to draw
        title: Custom title for the plot
        dynamic_range_db: Range of the color scale below the map peak
        truth: Optional (delay_s, doppler_hz) drawn as a red circle
        track: Optional (delay_s, doppler_hz) history drawn as a line

    Returns:
        matplotlib Figure object
    """
    fig, ax = plt.subplots(1, 1, figsize=figsize or PlotConfig.FIGURE_SIZE, dpi=PlotConfig.DPI)
    power_db = map_db(z)
    top = float(np.max(power_db))
    half_v = z.doppler_bin_hz / 2
    extent = (z.doppler_axis_hz[0] - half_v, z.doppler_axis_hz[-1] + half_v,
              (z.delay_axis_s[-1] + z.delay_bin_s / 2) * 1e9, -z.delay_bin_s / 2 * 1e9)
    image = ax.imshow(power_db, aspect='auto', extent=extent, cmap=PlotConfig.CMAP,
                      vmin=top - dynamic_range_db, vmax=top)
    fig.colorbar(image, ax=ax, label='power (dB)')

    if track:
        delays, dopplers = zip(*track)
        ax.plot(dopplers, np.asarray(delays) * 1e9, color='orange', linewidth=1.5, label='track')
    if truth is not None:
        ax.scatter([truth[1]], [truth[0] * 1e9], s=120, facecolors='none', edgecolors='red',
                   linewidths=2, label='ground truth')
    if track or truth is not None:
        ax.legend(loc='upper right')

    ax.set_xlabel('Doppler (Hz)')
    ax.set_ylabel('delay (ns)')
    ax.set_title(title or f"link {z.link}, CPI at {z.cpi_start_s:.3f} s")
    plt.tight_layout()
    return fig


def plot_spectrogram(spec: Spectrogram, title: Optional[str] = None,
                     dynamic_range_db: float = PlotConfig.DYNAMIC_RANGE_DB) -> plt.Figure:
    """Spectrogram in dB with the peak Doppler trace overlaid."""
    fig, ax = plt.subplots(1, 1, figsize=PlotConfig.FIGURE_SIZE, dpi=PlotConfig.DPI)
    power_db = 10.0 * np.log10(np.maximum(spec.power, 1e-30))
    top = float(np.max(power_db))
    mesh = ax.pcolormesh(spec.time_axis, spec.doppler_axis, power_db.T, shading='nearest',
                         cmap=PlotConfig.CMAP, vmin=top - dynamic_range_db, vmax=top)
    fig.colorbar(mesh, ax=ax, label='power (dB)')
    ax.plot(spec.time_axis, spec.peak_trace(), color='white', linewidth=0.8, alpha=0.7)
    ax.set_xlabel('time (s)')
    ax.set_ylabel('Doppler (Hz)')
    ax.set_title(title or 'micro-Doppler spectrogram')
    plt.tight_layout()
    return fig


def plot_tracks(snapshots: Sequence[TrackSnapshot], title: Optional[str] = None) -> plt.Figure:
    """Delay and Doppler of every track over time, one row per quantity."""
    fig, (ax_delay, ax_doppler) = plt.subplots(2, 1, figsize=PlotConfig.FIGURE_SIZE,
                                               dpi=PlotConfig.DPI, sharex=True)
    by_track = {}
    for snap in snapshots:
        by_track.setdefault((snap.link, snap.track_id), []).append(snap)
    for (link, track_id), snaps in sorted(by_track.items()):
        t = [s.t_s for s in snaps]
        label = f"link {link} / {track_id}"
        ax_delay.plot(t, [s.delay_s * 1e9 for s in snaps], marker='.', label=label)
        ax_doppler.plot(t, [s.doppler_hz for s in snaps], marker='.', label=label)

    ax_delay.set_ylabel('delay (ns)')
    ax_doppler.set_ylabel('Doppler (Hz)')
    ax_doppler.set_xlabel('time (s)')
    for ax in (ax_delay, ax_doppler):
        ax.grid(True, alpha=0.3)
    if by_track:
        ax_delay.legend(loc='best', fontsize=8)
    fig.suptitle(title or f"{len(by_track)} confirmed tracks")
    plt.tight_layout()
    return fig


def plot_fixes(fixes: Sequence[PositionFix], truth: Optional[np.ndarray] = None,
               nodes: Sequence[Tuple[str, Sequence[float]]] = ()) -> plt.Figure:
    """Top view (x, y) of position fixes, optional truth path and node positions."""
    fig, ax = plt.subplots(1, 1, figsize=PlotConfig.FIGURE_SIZE, dpi=PlotConfig.DPI)
    if truth is not None and len(truth):
        ax.plot(truth[:, 0], truth[:, 1], color='red', linewidth=1, label='ground truth')
    if fixes:
        positions = np.array([fix.position for fix in fixes])
        ax.scatter(positions[:, 0], positions[:, 1], s=8, color='orange', label='fixes')
    for node_id, position in nodes:
        ax.scatter([position[0]], [position[1]], marker='^', color='black')
        ax.annotate(node_id, (position[0], position[1]), textcoords='offset points', xytext=(4, 4))
    ax.set_xlabel('x (m)')
    ax.set_ylabel('y (m)')
    ax.set_aspect('equal')
    ax.grid(True, alpha=0.3)
    ax.legend(loc='best')
    ax.set_title(f"{len(fixes)} position fixes")
    plt.tight_layout()
    return fig


def save_figure(fig: plt.Figure, filename: Union[str, Path], dpi: int = PlotConfig.DPI):
    """Save a figure and release it."""
    fig.savefig(filename, dpi=dpi, bbox_inches='tight')
    plt.close(fig)
