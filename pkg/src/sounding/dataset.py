"""
On-disk CFR container: meta.json + cfr.bin + gt.csv.

cfr.bin holds little-endian float32 (re, im) pairs laid out as
[snapshot][link][subcarrier], row-major, without padding.
"""

import json
import logging
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import DatasetError, FormatVersionError, MissingFileError, PayloadLengthError
from ..core.streams import CFR_DTYPE, FORMAT_VERSION, CfrStream, DatasetMeta, GroundTruthRecord
from .ground_truth import read_ground_truth_csv, write_ground_truth_csv

LOGGER = logging.getLogger(__name__)

META_FILE = "meta.json"
CFR_FILE = "cfr.bin"
GT_FILE = "gt.csv"

# Snapshots per write call
WRITE_BLOCK = 1024


def write_dataset(stream: CfrStream, gt: Sequence[GroundTruthRecord], directory: Union[str, Path],
                  node_positions: Optional[Mapping] = None, pilot: Optional[Mapping] = None) -> DatasetMeta:
    """Write a stream and its ground truth as a container directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = stream.metadata(node_positions=node_positions, pilot=pilot)

    cfr_path = directory / CFR_FILE
    with open(cfr_path, 'wb') as f:
        for start in range(0, stream.n_snapshots, WRITE_BLOCK):
            block = stream.block(start, min(start + WRITE_BLOCK, stream.n_snapshots))
            np.ascontiguousarray(block, dtype=CFR_DTYPE).tofile(f)

    written = cfr_path.stat().st_size
    if written != meta.payload_bytes:
        raise PayloadLengthError(meta.payload_bytes, written, CFR_FILE)

    with open(directory / META_FILE, 'w') as f:
        json.dump(meta.to_dict(), f, indent=2)
    write_ground_truth_csv(gt, directory / GT_FILE)

    LOGGER.info("wrote %s (%d snapshots, %d links, %d bytes)",
                directory, meta.n_snapshots, meta.n_links, written)
    return meta


def read_meta(directory: Union[str, Path]) -> DatasetMeta:
    """Read and version-check meta.json."""
    meta_path = Path(directory) / META_FILE
    if not meta_path.exists():
        raise MissingFileError(f"{meta_path} not found")
    with open(meta_path, 'r') as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{meta_path}: invalid JSON ({exc})") from None
    if raw.get('format_version') != FORMAT_VERSION:
        raise FormatVersionError(
            f"{meta_path}: format_version {raw.get('format_version')!r} is not supported "
            f"(expected {FORMAT_VERSION})")
    return DatasetMeta.from_dict(raw)


def read_dataset(directory: Union[str, Path]) -> Tuple[CfrStream, List[GroundTruthRecord]]:
    """
    Open a container directory.

    The payload length is checked against meta.json before anything is
    returned. Snapshots are memory-mapped, not loaded; iterating the stream
    touches one snapshot at a time.
    """
    directory = Path(directory)
    meta = read_meta(directory)

    cfr_path = directory / CFR_FILE
    if not cfr_path.exists():
        raise MissingFileError(f"{cfr_path} not found")
    actual = cfr_path.stat().st_size
    if actual != meta.payload_bytes:
        raise PayloadLengthError(meta.payload_bytes, actual, CFR_FILE)

    shape = (meta.n_snapshots, meta.n_links, meta.n_subcarriers)
    if meta.payload_bytes == 0:
        data = np.zeros(shape, dtype=CFR_DTYPE)
    else:
        data = np.memmap(cfr_path, dtype=CFR_DTYPE, mode='r', shape=shape)

    gt_path = directory / GT_FILE
    if gt_path.exists():
        gt = read_ground_truth_csv(gt_path)
    else:
        LOGGER.warning("%s has no ground truth file", directory)
        gt = []

    stream = CfrStream(data, meta.snapshot_rate_hz, meta.links, meta.carrier_hz, meta.bandwidth_hz)
    return stream, gt
