"""Grey-box battery modelling: a reduced-order electrochemical cell model plus a
sparse, GA-selected model of its voltage error.

Typical use::

    from gastridge import default_cell_parameters, random_walk, simulate_cycle

    p = default_cell_parameters()
    trace = simulate_cycle(p, random_walk(3600, p.capacity_ah, seed=1))
"""

__version__ = "0.1.0"

from .analysis import (
    HybridEvaluation,
    MetricsReport,
    RankingReport,
    evaluate_hybrid,
    pearson,
    rrr,
    svd_rank,
    svd_rank_matrix,
    timing_report,
)
from .cycles import DriveCycle, concatenate, constant_current, load_cycle_csv, pulse_train, random_walk, save_cycle_csv
from .errors import (
    AlignmentError,
    ConfigError,
    DivergenceError,
    DomainError,
    FeatureEvaluationError,
    GastridgeError,
    GenerationError,
    NormalizationError,
    ParameterError,
    ParseError,
    SaturationError,
)
from .ga import EvaluatedCandidate, GaConfig, GaResult, Genome, evaluate_candidate, run_ga
from .library import (
    BasisDescriptor,
    ErrorSegment,
    FeatureLibrary,
    LibraryConfig,
    Normalization,
    RegressionData,
    SelectedLibrary,
    build_candidate_library,
    fit_normalization,
)
from .lfm import LowFidelityModel, LfmState, VoltageTrace, simulate_cycle, step_lfm
from .params import CellParameters, ElectrodeParameters, OcvCurve, default_cell_parameters, load_cell_parameters
from .reference import (
    ReferenceTrace,
    SurrogateSpec,
    compute_error_series,
    generate_surrogate_trace,
    perturb_parameters,
)
from .stridge import RidgeProblem, SparseErrorModel, ridge_solve, simulate_recursive, stridge_fit

__all__ = [name for name in dir() if not name.startswith("_")]
