"""Multilevel Monte Carlo ensemble forecasts and calibration verification.

Builds hierarchies of coupled coarse/fine SDE ensembles, fuses them into
a single consistent ensemble forecast by inverse transform sampling on
per-level order statistics, and checks forecast calibration with PIT
histograms against an observed trajectory.
"""

__version__ = "0.1.0"

from .errors import (
    BudgetTooSmallError,
    ConfigError,
    DomainError,
    EmptyEnsembleError,
    FileFormatError,
    GridAlignmentError,
    InsufficientSamplesError,
    InvalidStepError,
    InvalidToleranceError,
    MlmcForecastError,
    StructureError,
    ToleranceNotMetError,
)
from .streams import NormalStream, StreamKey, StreamPurpose, gaussian_increments, uniform
from .sde import (
    CoupledPath,
    Gaussian,
    LevelGrid,
    OuParams,
    euler_maruyama_step,
    propagate_coupled_pair,
    propagate_single,
)
from .mlmc import (
    AdaptiveConfig,
    AdaptiveResult,
    Hierarchy,
    LevelPair,
    LevelStats,
    build_hierarchy,
    fixed_budget_sizes,
    identity,
    level_difference_mean,
    level_stats,
    mc_mean,
    mlmc_mean,
    needs_new_level,
    optimal_sample_sizes,
    read_hierarchy_csv,
    run_adaptive,
    write_hierarchy_csv,
)
from .forecast import (
    ForecastEnsemble,
    SortedHierarchy,
    empirical_quantile,
    forecast_mean,
    generate_forecast,
    mlmc_quantile,
    quantile_inversions,
    read_forecast_csv,
    write_forecast_csv,
)
from .verification import (
    Calibration,
    CalibrationDiagnostics,
    DiagnosticThresholds,
    ObservationSeries,
    PitHistogram,
    analytic_pit_bin_masses,
    analytic_pit_reference,
    build_histogram,
    diagnose,
    empirical_cdf,
    histogram_l1_distance,
    pit_sample,
)
from .experiment import (
    RunArtifacts,
    ScenarioConfig,
    run_all,
    run_scenario,
    scenario_config,
    verify_files,
)
