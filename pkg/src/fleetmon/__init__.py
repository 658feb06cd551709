"""Fleet-based condition monitoring by pairwise dissimilarity, hierarchical
clustering with cophenetic-correlation partitioning, and majority-based
anomaly scoring."""

from .clustering import (
    Dendrogram,
    Merge,
    Partition,
    agglomerate,
    cophenetic_correlation,
    cut_at_highest_level,
    dendrogrammic_distance,
    partition,
)
from .config import SIGMA_GRID, THR_CC_GRID, VariantConfig
from .detection import (
    ConfusionCounts,
    Metrics,
    WindowVerdict,
    classify,
    confusion,
    debounce,
    f1_score,
    metrics,
    score,
    sigma_band_baseline,
    sweep,
)
from .dissimilarity import (
    DissimilarityMatrix,
    WarpingPath,
    build_matrix,
    dtw,
    euclidean,
    feature_euclidean,
    harmonic_diff,
    pointwise_cost,
    warping_amount,
)
from .fleetsim import (
    RunUp,
    ScenarioConfig,
    Stationary,
    export_csv,
    generate_current,
    generate_vibration,
    speed_to_fundamental,
    write_scenario,
)
from .ingest import ingest_csv, load_data_dir
from .pipeline import (
    RunResult,
    run_baseline,
    run_thr_cc_sweep,
    run_variant,
)
from .signals import (
    FleetWindow,
    Series,
    Spectrum,
    downsample_per_period,
    estimate_fundamental,
    fft_magnitude,
    harmonic_amplitude,
    log_scale,
    lowpass_truncate,
    normalize,
    spectrogram,
    split_windows,
)
from .streams import FleetData, GroundTruth, fleet_windows

__version__ = "0.1.0"
