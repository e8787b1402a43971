"""Sign retrieval for real band-limited signals from magnitude-only samples of
semi-discrete frame coefficients."""
from .blcore import (
    BandLimitedSignal,
    FrequencySupport,
    Grid,
    LatticeInterpolator,
    SamplingLattice,
    convolve,
    interpolate_from_lattice,
    minkowski_sum,
    sample_on_lattice,
    signal_distance,
)
from .errors import *  # noqa: F401,F403
from .experiments import (
    counterexample_pair,
    random_decaying_signal,
    redundancy_report,
    single_band_instability,
    stability_probe,
    tensor_counterexample,
)
from .frames import (
    SemiDiscreteFrame,
    analyze,
    curvelet_windows,
    dual_frame,
    frame_bounds,
    meyer_frame,
    overlap_graph,
    synthesize,
    working_support,
)
from .recovery import MeasurementSet, RecoveryConfig, measure, recover_band, recover_band_oracle
from .sampling import (
    SignBlindSpec,
    axis_aligned_lattices,
    make_sign_blind_lattice,
    meyer_alpha_check,
    meyer_lattices,
    sign_blind_generator,
)
from .stitching import PipelineConfig, full_pipeline, match_pair, propagate_signs

__version__ = "0.1.0"
