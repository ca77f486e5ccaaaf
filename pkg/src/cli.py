"""
Command-line surface: synth, process, track, localize and eval.

Every stage reads the previous stage's files and writes its own outputs
plus a <command>_manifest.json next to them, so any stage can be re-run
on its own.
"""

import argparse
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .core.errors import ConfigurationError, IsacError, MissingFileError
from .core.scenario import ScenarioConfig, load_scenario
from .core.streams import DatasetMeta
from .utils.runtime import Stopwatch

LOGGER = logging.getLogger("isac")

MANIFEST_SUFFIX = "_manifest.json"
DETECTIONS_FILE = "detections.csv"
TRACKS_FILE = "tracks.csv"
FIXES_FILE = "fixes.csv"
REPORT_FILE = "eval_report.json"


def manifest_path(directory: Path, command: str) -> Path:
    return Path(directory) / f"{command}{MANIFEST_SUFFIX}"


def write_manifest(directory: Path, command: str, config: Mapping[str, Any], inputs: Mapping[str, str],
                   outputs: Mapping[str, str], seeds: Mapping[str, Any], watch: Stopwatch,
                   extra: Optional[Mapping[str, Any]] = None) -> Path:
    """Record what a command did; re-running with the same inputs and config reproduces the outputs."""
    from .visualization.export import export_json

    manifest = {
        'command': command,
        'tool_version': __version__,
        'python': platform.python_version(),
        'config': dict(config),
        'inputs': {key: str(Path(value).resolve()) for key, value in inputs.items()},
        'outputs': {key: str(value) for key, value in outputs.items()},
        'rng_seeds': dict(seeds),
        'duration_s': watch.elapsed,
    }
    manifest.update(extra or {})
    path = manifest_path(directory, command)
    export_json(manifest, path)
    return path


def read_manifest(directory: Path, command: str) -> Optional[Dict[str, Any]]:
    from .visualization.export import load_json

    path = manifest_path(directory, command)
    return load_json(path) if path.exists() else None


def load_config_json(path: str) -> Dict[str, Any]:
    """A stage config file; an empty object means all defaults."""
    from .visualization.export import load_json

    try:
        data = load_json(path)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in {path}: {exc}", "$") from None
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object", "$")
    return data


def node_positions(scenario: ScenarioConfig) -> Dict[str, Any]:
    """Fixed coordinates of stationary nodes; trajectories of moving ones."""
    return {
        node.id: ([float(v) for v in node.trajectory.positions[0]] if node.trajectory.is_stationary
                  else node.trajectory.to_dict())
        for node in scenario.nodes
    }


def link_geometry(meta: DatasetMeta) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    """Tx and Rx positions per link index; every node must be stationary."""
    return {i: (meta.stationary_position(tx), meta.stationary_position(rx))
            for i, (tx, rx) in enumerate(meta.links)}


def scenario_of_dataset(dataset_dir: Path) -> Optional[ScenarioConfig]:
    """The scenario a synthetic container was built from, if its synth manifest points to it."""
    manifest = read_manifest(dataset_dir, "synth")
    if not manifest:
        return None
    path = Path(manifest['inputs'].get('scenario', ''))
    if not path.is_file():
        LOGGER.warning("scenario %s of %s is gone; continuing without it", path, dataset_dir)
        return None
    return load_scenario(path).with_seed(manifest['rng_seeds']['noise'])


def cmd_synth(args: argparse.Namespace) -> int:
    from .channel.synthesis import synthesize_stream
    from .sounding.dataset import write_dataset
    from .sounding.ground_truth import sample_ground_truth
    from .sounding.pilots import apply_pilot, pilot_entry, pilot_spectrum

    watch = Stopwatch()
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)

    print(f"🔧 Synthesizing {scenario.n_snapshots} snapshots on {len(scenario.links)} links")
    stream = synthesize_stream(scenario, threads=args.threads, progress=args.verbose)
    pilot = pilot_entry(args.pilot)
    if pilot is not None:
        stream = apply_pilot(stream, pilot_spectrum(pilot, scenario.n_subcarriers))
    gt = sample_ground_truth(scenario)

    out = Path(args.out_dir)
    meta = write_dataset(stream, gt, out, node_positions=node_positions(scenario), pilot=pilot)
    write_manifest(out, "synth", scenario.to_dict(), {'scenario': args.scenario},
                   {'meta': 'meta.json', 'cfr': 'cfr.bin', 'gt': 'gt.csv'},
                   {'noise': scenario.rng_seed, 'clutter': scenario.clutter.rng_seed}, watch,
                   {'pilot': args.pilot})
    print(f"✅ Wrote {meta.payload_bytes} bytes to {out}/")
    return 0


def cmd_process(args: argparse.Namespace) -> int:
    from .dsp.pipeline import DspConfig, process_stream
    from .sounding.dataset import read_dataset, read_meta
    from .sounding.pilots import pilot_spectrum
    from .sounding.records import write_detections

    watch = Stopwatch()
    config = DspConfig.from_dict(load_config_json(args.config))
    meta = read_meta(args.in_dir)
    stream, _ = read_dataset(args.in_dir)
    pilot = pilot_spectrum(meta.pilot, meta.n_subcarriers) if meta.pilot else None

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sink = None
    if args.export_maps:
        if args.plot:
            import matplotlib
            matplotlib.use("Agg")
        from .visualization.export import MapExporter
        sink = MapExporter(out / "maps", plot=args.plot)

    print(f"🔧 Processing {stream.n_snapshots} snapshots x {stream.n_links} links "
          f"in CPIs of {config.cpi_len}")
    detections = process_stream(stream, config, pilot=pilot, threads=args.threads,
                                map_sink=sink, progress=args.verbose)
    write_detections(detections, out / DETECTIONS_FILE)

    n_cpis = stream.n_snapshots // config.cpi_len
    # CPI 0 only seeds the background, so detection starts at CPI 1
    cpi_starts = [(stream.first_index + c * config.cpi_len) / stream.snapshot_rate_hz
                  for c in range(1, n_cpis)]
    write_manifest(out, "process", config.to_dict(), {'dataset': args.in_dir},
                   {'detections': DETECTIONS_FILE}, {}, watch, {
                       'dataset': str(Path(args.in_dir).resolve()),
                       'carrier_hz': meta.carrier_hz,
                       'bandwidth_hz': meta.bandwidth_hz,
                       'n_subcarriers': meta.n_subcarriers,
                       'snapshot_rate_hz': meta.snapshot_rate_hz,
                       'n_links': meta.n_links,
                       'delay_bin_s': 1.0 / meta.bandwidth_hz,
                       'doppler_bin_hz': meta.snapshot_rate_hz / config.cpi_len,
                       'cpi_center_offset_s': config.cpi_center_offset_s(meta.snapshot_rate_hz),
                       'cpi_starts_s': cpi_starts,
                   })
    print(f"✅ {len(detections)} detections written to {out / DETECTIONS_FILE}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    from .sounding.records import read_detections, write_tracks
    from .tracking.kalman import TrackerConfig
    from .tracking.tracker import run_tracker

    watch = Stopwatch()
    config = TrackerConfig.from_dict(load_config_json(args.config))
    detections_path = Path(args.detections)
    detections = read_detections(detections_path)
    upstream = read_manifest(detections_path.parent, "process") or {}
    if not upstream:
        LOGGER.warning("no process manifest next to %s; only CPIs with detections are stepped",
                       detections_path)
    elif config.resolution is None and 'delay_bin_s' in upstream:
        config = replace(config, resolution=(upstream['delay_bin_s'], upstream['doppler_bin_hz']))

    snapshots = run_tracker(detections, config,
                            carrier_hz=upstream.get('carrier_hz'),
                            cpi_starts_s=upstream.get('cpi_starts_s'),
                            n_links=upstream.get('n_links'),
                            time_offset_s=upstream.get('cpi_center_offset_s', 0.0),
                            threads=args.threads)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tracks(snapshots, out / TRACKS_FILE)
    write_manifest(out, "track", config.to_dict(), {'detections': args.detections},
                   {'tracks': TRACKS_FILE}, {}, watch)
    n_tracks = len({s.track_id for s in snapshots})
    print(f"✅ {n_tracks} confirmed tracks, {len(snapshots)} snapshots written to {out / TRACKS_FILE}")
    return 0


def _geometry_source(path: Path) -> Tuple[DatasetMeta, Optional[Tuple[np.ndarray, np.ndarray]]]:
    """Link geometry and search bounds from a container directory or a geometry JSON file."""
    from .sounding.dataset import read_meta

    if path.is_dir():
        meta = read_meta(path)
        scenario = scenario_of_dataset(path)
        bounds = scenario.bounding_box() if scenario is not None and scenario.search_bounds else None
        return meta, bounds

    data = load_config_json(str(path))
    links = data.get('links')
    positions = data.get('node_positions')
    if not links or not positions:
        raise ConfigurationError("geometry needs 'links' and 'node_positions'", "$")
    meta = DatasetMeta(carrier_hz=0.0, bandwidth_hz=0.0, n_subcarriers=0, n_snapshots=0,
                       n_links=len(links), snapshot_rate_hz=0.0, links=links, node_positions=positions)
    bounds = None
    if data.get('search_bounds'):
        bounds = (np.asarray(data['search_bounds']['min'], dtype=float),
                  np.asarray(data['search_bounds']['max'], dtype=float))
    return meta, bounds


def cmd_localize(args: argparse.Namespace) -> int:
    from .sounding.records import read_tracks, write_fixes
    from .tracking.localization import fuse_tracks

    watch = Stopwatch()
    tracks_path = Path(args.tracks)
    snapshots = read_tracks(tracks_path)
    meta, bounds = _geometry_source(Path(args.geometry))
    track_manifest = read_manifest(tracks_path.parent, "track") or {}
    offsets = track_manifest.get('config', {}).get('delay_offsets_s', [])

    fixes = fuse_tracks(snapshots, link_geometry(meta), bounds=bounds, delay_offsets_s=offsets)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_fixes(fixes, out / FIXES_FILE)
    config = {'delay_offsets_s': list(offsets),
              'search_bounds': None if bounds is None else [list(map(float, b)) for b in bounds]}
    write_manifest(out, "localize", config, {'tracks': args.tracks, 'geometry': args.geometry},
                   {'fixes': FIXES_FILE}, {}, watch)
    print(f"✅ {len(fixes)} position fixes written to {out / FIXES_FILE}")
    return 0


def _optional(path: Path, reader):
    return reader(path) if path.exists() else []


def cmd_eval(args: argparse.Namespace) -> int:
    from config.isac_config import EvalDefaults
    from .channel.synthesis import expected_map_snr_db
    from .evaluation.metrics import match_detections, summarize, truth_points
    from .sounding.dataset import read_dataset, read_meta
    from .sounding.records import read_detections, read_fixes, read_tracks

    watch = Stopwatch()
    run_dir = Path(args.run_dir)
    process = read_manifest(run_dir, "process")
    if process is None:
        raise MissingFileError(f"{manifest_path(run_dir, 'process')} not found")
    dataset_dir = Path(args.dataset)
    meta = read_meta(dataset_dir)
    _, gt = read_dataset(dataset_dir)

    detections = read_detections(run_dir / DETECTIONS_FILE)
    tracks = _optional(run_dir / TRACKS_FILE, read_tracks)
    fixes = _optional(run_dir / FIXES_FILE, read_fixes)

    cpi_starts = process['cpi_starts_s']
    offset = process['cpi_center_offset_s']
    cpi_len = process['config']['cpi_len']
    doppler_bin = process['doppler_bin_hz']
    notch_hz = (process['config']['notch_halfwidth_bins'] + 0.5) * doppler_bin

    snr = None
    scenario = scenario_of_dataset(dataset_dir)
    if scenario is not None:
        snr = {(link, target.id): np.array([expected_map_snr_db(scenario, link, t + offset, cpi_len, k)
                                            for t in cpi_starts])
               for link in range(len(scenario.links)) for k, target in enumerate(scenario.targets)}

    gate_bins = tuple(args.gate_bins) if args.gate_bins else EvalDefaults.GATE_BINS
    truths = truth_points(gt, link_geometry(meta), meta.carrier_hz, cpi_starts, offset, notch_hz, snr)
    result = match_detections(detections, truths, process['delay_bin_s'], doppler_bin, gate_bins)
    report = summarize(result, fixes, gt, tracks, truths, n_links=meta.n_links, n_cpis=len(cpi_starts),
                       cells_per_map=meta.n_subcarriers * cpi_len, delay_bin_s=process['delay_bin_s'],
                       doppler_bin_hz=doppler_bin, gate_bins=gate_bins, time_offset_s=offset)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / REPORT_FILE)
    print(report.to_table())
    write_manifest(out, "eval", {'gate_bins': list(gate_bins)},
                   {'run': args.run_dir, 'dataset': str(dataset_dir)}, {'report': REPORT_FILE}, {}, watch)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Noise seed overriding the scenario')
    common.add_argument('--threads', type=int, default=None, help='Worker threads (default: all cores)')
    common.add_argument('--verbose', '-v', action='store_true', help='Debug logging and progress bars')

    parser = argparse.ArgumentParser(prog='isac', description='Multi-static ISAC radar simulator and toolkit')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[common], help='Synthesize a CFR container from a scenario')
    p.add_argument('scenario', help='Scenario JSON file')
    p.add_argument('out_dir', help='Container directory to write')
    p.add_argument('--pilot', choices=('unit', 'zadoff-chu'), default='unit',
                   help='Store rx = pilot x H instead of the channel itself')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('process', parents=[common], help='Detect targets in a container')
    p.add_argument('in_dir', help='Container directory')
    p.add_argument('config', help='DSP config JSON')
    p.add_argument('out_dir', help='Output directory')
    p.add_argument('--export-maps', action='store_true', help='Write per-CPI map CSV and PGM files')
    p.add_argument('--plot', action='store_true', help='Also write PNG figures of exported maps')
    p.set_defaults(func=cmd_process)

    p = sub.add_parser('track', parents=[common], help='Track detections per link')
    p.add_argument('detections', help='detections.csv from process')
    p.add_argument('config', help='Tracker config JSON')
    p.add_argument('out_dir', help='Output directory')
    p.set_defaults(func=cmd_track)

    p = sub.add_parser('localize', parents=[common], help='Fuse tracks into position fixes')
    p.add_argument('tracks', help='tracks.csv from track')
    p.add_argument('geometry', help='Container directory or geometry JSON')
    p.add_argument('out_dir', help='Output directory')
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser('eval', parents=[common], help='Score a run against ground truth')
    p.add_argument('run_dir', help='Directory holding the process (and track, localize) outputs')
    p.add_argument('dataset', help='Container directory with gt.csv')
    p.add_argument('out_dir', help='Output directory')
    p.add_argument('--gate-bins', type=float, nargs=2, metavar=('DELAY', 'DOPPLER'),
                   help='Match gate in bins')
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return args.func(args)
    except IsacError as exc:
        LOGGER.error("❌ %s", exc)
        return exc.exit_code
    except Exception as exc:
        LOGGER.exception("❌ unexpected failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
