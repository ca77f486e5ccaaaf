"""
Per-link CPI processing: estimate -> map -> background -> notch -> CFAR -> refine.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np

from config.isac_config import DspDefaults
from ..core.errors import ConfigurationError
from ..core.streams import CfrStream
from ..utils.runtime import parallel_map, resolve_threads, timeit
from ..utils.validation import as_float, as_int, as_list
from .cfar import CfarConfig, cfar_detect, cluster_hits
from .estimation import estimate_channel
from .maps import BackgroundSubtractor, DelayDopplerMap, form_map, notch_columns, notch_zero_doppler
from .peaks import Detection, refine_peak

LOGGER = logging.getLogger(__name__)

MIN_CPI_LEN = 8

# Callback receiving (map before background removal, residual after notch)
MapSink = Callable[[DelayDopplerMap, DelayDopplerMap], None]


@dataclass(frozen=True)
class DspConfig:
    """Processing-chain parameters; the window is a fixed Hann on both axes."""

    cpi_len: int = DspDefaults.CPI_LEN
    beta_bg: float = DspDefaults.BETA_BG
    notch_halfwidth_bins: int = DspDefaults.NOTCH_HALFWIDTH_BINS
    cfar: CfarConfig = field(default_factory=CfarConfig)
    pilot_eps: float = DspDefaults.PILOT_EPS
    export_every: int = DspDefaults.EXPORT_EVERY

    def __post_init__(self):
        """Validate parameters."""
        if self.cpi_len < MIN_CPI_LEN:
            raise ConfigurationError(f"must be >= {MIN_CPI_LEN}", "$.cpi_len")
        if not 0.0 <= self.beta_bg < 1.0:
            raise ConfigurationError("must lie in [0, 1)", "$.beta_bg")
        if self.notch_halfwidth_bins < 0:
            raise ConfigurationError("must be >= 0", "$.notch_halfwidth_bins")
        if self.export_every < 1:
            raise ConfigurationError("must be >= 1", "$.export_every")

    def cpi_center_offset_s(self, snapshot_rate_hz: float) -> float:
        """Time from the first snapshot of a CPI to its center."""
        return (self.cpi_len - 1) / (2.0 * snapshot_rate_hz)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'cpi_len': self.cpi_len,
            'window': 'hann',
            'beta_bg': self.beta_bg,
            'notch_halfwidth_bins': self.notch_halfwidth_bins,
            'cfar': self.cfar.to_dict(),
            'pilot_eps': self.pilot_eps,
            'export_every': self.export_every,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DspConfig":
        if data.get('window', 'hann') != 'hann':
            raise ConfigurationError("only the Hann window is supported", "$.window")
        cfar = data.get('cfar', {})
        if not isinstance(cfar, Mapping):
            raise ConfigurationError("expected an object", "$.cfar")

        def pair(key: str, default) -> tuple:
            path = f"$.cfar.{key}"
            return tuple(as_int(v, f"{path}[{i}]") for i, v in enumerate(as_list(cfar.get(key, default), path, 2)))

        return cls(
            cpi_len=as_int(data.get('cpi_len', DspDefaults.CPI_LEN), "$.cpi_len"),
            beta_bg=as_float(data.get('beta_bg', DspDefaults.BETA_BG), "$.beta_bg"),
            notch_halfwidth_bins=as_int(data.get('notch_halfwidth_bins', DspDefaults.NOTCH_HALFWIDTH_BINS),
                                        "$.notch_halfwidth_bins"),
            cfar=CfarConfig(
                guard=pair('guard', DspDefaults.GUARD),
                train=pair('train', DspDefaults.TRAIN),
                pfa=as_float(cfar.get('pfa', DspDefaults.PFA), "$.cfar.pfa"),
            ),
            pilot_eps=as_float(data.get('pilot_eps', DspDefaults.PILOT_EPS), "$.pilot_eps"),
            export_every=as_int(data.get('export_every', DspDefaults.EXPORT_EVERY), "$.export_every"),
        )


def detect_in_map(residual: DelayDopplerMap, config: DspConfig) -> List[Detection]:
    """CFAR, clustering and refinement on one notched residual map."""
    mask = np.ones(residual.shape, dtype=bool)
    mask[:, notch_columns(residual.shape[1], config.notch_halfwidth_bins)] = False
    hits = cfar_detect(residual.power, config.cfar, mask)
    return [refine_peak(residual, peak) for peak in cluster_hits(hits, residual.shape)]


class LinkProcessor:
    """Sequential CPI processing for one link of a stream."""

    def __init__(self, stream: CfrStream, link_index: int, config: DspConfig,
                 pilot: Optional[np.ndarray] = None):
        self.stream = stream
        self.link_index = link_index
        self.config = config
        self.pilot = pilot
        self.background = BackgroundSubtractor(config.beta_bg)

    @property
    def n_cpis(self) -> int:
        return self.stream.n_snapshots // self.config.cpi_len

    def cpi_start_s(self, cpi: int) -> float:
        return (self.stream.first_index + cpi * self.config.cpi_len) / self.stream.snapshot_rate_hz

    def form(self, cpi: int) -> DelayDopplerMap:
        m = self.config.cpi_len
        block = self.stream.block(cpi * m, (cpi + 1) * m, self.link_index)
        if self.pilot is not None:
            block, _ = estimate_channel(block, self.pilot, self.config.pilot_eps)
        return form_map(block, self.stream.bandwidth_hz, self.stream.snapshot_rate_hz,
                        link=self.link_index, cpi_start_s=self.cpi_start_s(cpi))


@timeit
def process_stream(stream: CfrStream, config: DspConfig = DspConfig(), pilot: Optional[np.ndarray] = None,
                   threads: Optional[int] = None, map_sink: Optional[MapSink] = None,
                   progress: bool = False) -> List[Detection]:
    """
    Run the detection chain over every link of a stream.

    Trailing snapshots that do not fill a CPI are dropped. The first CPI of
    each link only initializes the background and yields no detections.
    Map formation and detection run in parallel; the background fold is
    sequential per link. Detections are ordered by (CPI start, link, delay,
    Doppler).
    """
    workers = resolve_threads(threads)
    batch = max(1, 4 * workers)
    detections: List[Detection] = []

    for link_index in range(stream.n_links):
        processor = LinkProcessor(stream, link_index, config, pilot)
        for first in range(0, processor.n_cpis, batch):
            cpis = range(first, min(first + batch, processor.n_cpis))
            maps = parallel_map(processor.form, cpis, threads=workers, progress=progress,
                                desc=f"link {link_index} maps")
            residuals = []
            for cpi, z in zip(cpis, maps):
                residual = notch_zero_doppler(processor.background(z), config.notch_halfwidth_bins)
                if map_sink is not None and cpi % config.export_every == 0:
                    map_sink(z, residual)
                if cpi > 0:
                    residuals.append(residual)
            for found in parallel_map(lambda r: detect_in_map(r, config), residuals, threads=workers):
                detections.extend(found)
        LOGGER.info("link %d: %d CPIs processed", link_index, processor.n_cpis)

    detections.sort(key=lambda d: (d.cpi_start_s, d.link, d.delay_s, d.doppler_hz))
    return detections
