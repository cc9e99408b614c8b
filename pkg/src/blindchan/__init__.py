"""Blind multipath radio-channel parameter estimation.

Estimates per-path azimuth/elevation of arrival, relative delays and
polarimetric weights from receiver-array data when the transmitter signal
is unknown, using two transmitter-independent cost functions (a
constrained-likelihood projection residual and a channel cross-relation
quotient) minimized with a damped least-squares solver, plus a Monte-Carlo
harness comparing both over an SNR sweep.
"""

from .antenna import (
    ArrayModel,
    DipoleElement,
    Direction,
    PatternDomainError,
    PatternGrid,
    build_steering_matrix,
    default_array,
    evaluate_pattern,
    load_pattern_grid,
    pattern_from_grid,
    sample_pattern_grid,
    save_pattern_grid,
    wrap_azimuth,
)
from .ccr import (
    CcrEvaluation,
    DstBlocks,
    IllPosedWeightsError,
    ccr_evaluate,
    ccr_jacobian,
    ccr_matrices,
    ccr_residual,
    dst_apply,
    solve_gamma,
)
from .channel import (
    FrequencyGrid,
    Observation,
    ObservationFormatError,
    PathParameterSet,
    TransmitterSignal,
    build_channel_matrix,
    build_exponential_matrix,
    canonicalize,
    khatri_rao_channel_matrix,
    make_signal,
    read_observation,
    read_truth_sidecar,
    synthesize,
    vec_channel,
    write_observation,
    write_truth_sidecar,
)
from .cml import (
    CmlEvaluation,
    SingularChannelError,
    WhitenedObservation,
    blue_estimate,
    cml_evaluate,
    cml_jacobian,
    whiten_observation,
)
from .estimate import (
    FitResult,
    InitPolicy,
    coarse_grid_init,
    delay_rescan,
    estimate_paths,
    fit_ccr,
    fit_cml,
    perturbed_truth_init,
)
from .gauge import ParameterPacking, reflect_elevation
from .lm import LmOptions, LmResult, LmStallError, minimize
from .montecarlo import (
    ScenarioConfig,
    SweepRecord,
    SweepResult,
    TrialRecord,
    match_paths,
    normalized_power,
    path_errors,
    run_sweep,
    run_trial,
    table1_scenario,
    table1_truth,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayModel",
    "CcrEvaluation",
    "CmlEvaluation",
    "DipoleElement",
    "Direction",
    "DstBlocks",
    "FitResult",
    "FrequencyGrid",
    "IllPosedWeightsError",
    "InitPolicy",
    "LmOptions",
    "LmResult",
    "LmStallError",
    "Observation",
    "ObservationFormatError",
    "ParameterPacking",
    "PatternDomainError",
    "PatternGrid",
    "PathParameterSet",
    "ScenarioConfig",
    "SingularChannelError",
    "SweepRecord",
    "SweepResult",
    "TransmitterSignal",
    "TrialRecord",
    "WhitenedObservation",
    "blue_estimate",
    "build_channel_matrix",
    "build_exponential_matrix",
    "build_steering_matrix",
    "canonicalize",
    "ccr_evaluate",
    "ccr_jacobian",
    "ccr_matrices",
    "ccr_residual",
    "cml_evaluate",
    "cml_jacobian",
    "coarse_grid_init",
    "default_array",
    "delay_rescan",
    "dst_apply",
    "estimate_paths",
    "evaluate_pattern",
    "fit_ccr",
    "fit_cml",
    "khatri_rao_channel_matrix",
    "load_pattern_grid",
    "make_signal",
    "match_paths",
    "minimize",
    "normalized_power",
    "path_errors",
    "pattern_from_grid",
    "perturbed_truth_init",
    "read_observation",
    "read_truth_sidecar",
    "reflect_elevation",
    "run_sweep",
    "run_trial",
    "sample_pattern_grid",
    "save_pattern_grid",
    "solve_gamma",
    "synthesize",
    "table1_scenario",
    "table1_truth",
    "vec_channel",
    "whiten_observation",
    "wrap_azimuth",
    "write_observation",
    "write_truth_sidecar",
]
