"""
Default parameters for the channel simulator and the radar processing chain.
"""

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact


class ChannelConfig:
    """Defaults for scene synthesis."""

    # Snapshots synthesized per vectorized block
    BLOCK_SIZE = 256

    # Ground truth sampling of synthetic containers
    GROUND_TRUTH_RATE_HZ = 100.0

    # Default noise seed when the scenario does not carry one
    RNG_SEED = 0


class SignatureDefaults:
    """Defaults for micro-Doppler analysis."""

    # Occupancy threshold above the per-column median
    OCCUPANCY_THRESHOLD_DB = 10.0

    # "extent": zero Doppler up to the highest occupied positive bin; "count": occupied bins
    OCCUPANCY_MODE = "extent"

    # Minimum normalized autocorrelation for a flash period to count
    MIN_PERIODICITY = 0.3

    # Number of periods the spectrogram must span
    MIN_PERIODS = 3


class DspDefaults:
    """Defaults for map formation, background removal and detection."""

    CPI_LEN = 128
    BETA_BG = 0.9
    NOTCH_HALFWIDTH_BINS = 1
    GUARD = (1, 1)  # (delay, doppler)
    TRAIN = (4, 4)  # (delay, doppler)
    PFA = 1e-3

    # Pilot bins below EPS * max|pilot| are masked
    PILOT_EPS = 1e-6

    # Export every n-th CPI map when map export is enabled
    EXPORT_EVERY = 1


class TrackerDefaults:
    """Defaults for per-link tracking and localization."""

    # White-noise acceleration density on delay, (s/s^2)^2 / Hz
    Q_PROCESS = 1e-17

    # Measurement standard deviations (delay s, Doppler Hz)
    SIGMA_DELAY_S = 2e-9
    SIGMA_DOPPLER_HZ = 1.0

    GATE_PROBABILITY = 0.99
    CONFIRM_M = 3
    CONFIRM_N = 5
    DELETE_AFTER_MISSES = 5

    # "hungarian" (scipy) or "ilp" (OR-Tools)
    ASSIGNER = "hungarian"

    # Detections this many map cells from a live track do not start a new one
    SPAWN_EXCLUSION_CELLS = 1.5

    # Gauss-Newton stopping rule
    LOCALIZE_TOLERANCE_M = 1e-6
    LOCALIZE_MAX_ITERATIONS = 50
    GRID_POINTS_PER_AXIS = 21


class EvalDefaults:
    """Defaults for performance evaluation."""

    GATE_BINS = (1.0, 1.0)  # (delay bins, doppler bins)

    # Targets with a lower expected map SNR do not count as misses
    MIN_VISIBLE_SNR_DB = 13.0


class PlotConfig:
    """Figure settings for exported maps and spectrograms."""

    FIGURE_SIZE = (10, 6)
    DPI = 100
    CMAP = "viridis"
    DYNAMIC_RANGE_DB = 60.0
