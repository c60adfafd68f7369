"""Random mappings of a finite set: structure, exact counts, branching, experiments."""

from .asymptotics import (
    AlphaInputs,
    FitError,
    FitResult,
    OutOfRangeError,
    alpha_bounds_check,
    fit_sqrt_law,
    lambda_pmf_asym,
    rho_paper_constant,
    rho_series_constant,
    total_progeny_asym,
)
from .branching import (
    AEventParams,
    GWTrace,
    borel_tanner_pmf,
    classify_event,
    conditioned_profile_sample,
    conditioned_sample,
    extinction_prob_exact,
    founders_generation_check,
    simulate,
)
from .exact import (
    ExactCount,
    GuardError,
    count_height_le_exact,
    enumerate_all,
    enumerate_range,
    forest_profile_law,
    grusho_rho_approx,
    lambda_pmf_exact,
    lambda_tail_mass,
    merge_counts,
    rho_root,
    sachkov_count,
)
from .experiments import (
    ConfigError,
    EstimateRow,
    EventSpec,
    ExperimentConfig,
    run_constants,
    run_exact,
    run_fit,
    run_simulate,
)
from .mappings import (
    ClassificationFlags,
    CrownReport,
    Decomposition,
    Mapping,
    classify,
    crown_report,
    decompose,
    format_mapping,
    parse_mapping,
    sample_uniform,
)
from .rng import substream

__version__ = "0.1.0"
