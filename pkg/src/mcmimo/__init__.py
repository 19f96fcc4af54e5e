"""Multi-cell massive MIMO uplink simulator with large-system SINR predictions.

Monte-Carlo spectral efficiency of multi-cell MMSE detection (plus
single-cell MMSE, multi-cell ZF, and matched-filter baselines) on a 19-cell
wrap-around network, cross-validated against a deterministic equivalent of
the SINR computed from large-scale statistics alone.
"""

from .config import NetworkConfig, apply_overrides, config_from_mapping, load_config_file
from .detectors import (
    SCHEMES,
    DetectorBank,
    DetectorState,
    build_detector_bank,
    detector_state,
    m_mmse,
    m_zf,
    mf,
    s_mmse,
)
from .detequiv import DetEquivReport, det_equiv_se, det_equiv_sinr
from .errors import (
    DetectorRankError,
    EstimationConsistencyError,
    FixedPointDivergenceError,
    GeometryError,
    PilotReuseError,
    PowerControlError,
    SimulationError,
    SingularSystemError,
)
from .estimation import (
    ChannelTensor,
    EstimateSet,
    EstimatorState,
    build_estimate_set,
    estimate_directions,
    estimator_coefficients,
    pilot_observation,
    sample_channels,
)
from .geometry import (
    CellLayout,
    UserDrop,
    build_layout,
    drop_users,
    large_scale_fading,
    wrap_distance,
)
from .performance import (
    ScenarioArrays,
    SeReport,
    SinrSample,
    instantaneous_sinr,
    monte_carlo_se,
    prepare_scenario,
    simulate_schemes,
    sinr_sample,
)
from .pilots import (
    PilotAllocation,
    PilotBook,
    PowerAllocation,
    allocate_pilots,
    channel_inversion_power,
    dft_pilot_book,
)
from .results import (
    ResultRow,
    ResultTable,
    emit_results,
    read_results,
    run_experiment,
)
from .rmt import (
    FixedPointSolution,
    ResolventModel,
    normalized_trace,
    resolvent_trace_mc,
    solve_resolvent,
    solve_second_order,
)

__version__ = "0.1.0"
