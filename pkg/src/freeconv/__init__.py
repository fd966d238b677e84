"""Numerical free probability: free additive convolution and the A + UBU* model.

The package computes the free additive convolution of discrete measures by
solving the subordination fixed-point system, samples the unitarily
invariant matrix model H = A + U B U*, and verifies at desk scale that the
empirical spectral distribution tracks the convolution at the optimal 1/N
rate, including every intermediate Green-function diagnostic the analysis
runs on.
"""

from .measures import (
    DiscreteMeasure,
    GridDensity,
    SpectralParam,
    cdf,
    dump_measure,
    f_prime,
    f_transform,
    invert_density,
    levy_distance,
    load_measure,
    make_measure,
    quantile_atoms,
    stieltjes,
)
from .subordination import (
    BulkWindow,
    StabilityReport,
    SubordinationError,
    SubordinationPair,
    UnstablePointError,
    convolution_density,
    convolution_interval_mass,
    free_conv_stieltjes,
    phi_residual,
    regular_bulk,
    solve_subordination,
    stability_constant,
)
from .ensemble import (
    Decomposition,
    EnsembleSpec,
    HaarUnitary,
    SpectralData,
    build_h,
    eigen_h,
    empirical_interval_mass,
    h_bracket,
    partial_decomposition,
    rng_stream,
    sample_haar,
    sample_haar_with_column,
)
from .diagnostics import (
    DominationStat,
    GreenSnapshot,
    RowDiagnostics,
    all_row_quantities,
    c1_c2_identity,
    domination_test,
    entrywise_error,
    gaussian_ldp_check,
    green,
    local_law_error,
    omega_slots,
    rank_one_check,
    row_quantities,
    weighted_average,
)
from .experiments import (
    ExperimentResult,
    LocalLawScanSpec,
    NumericalBudgetError,
    RateExperimentSpec,
    TwoAtomSpec,
    run_fluctuation_averaging,
    run_local_law_scan,
    run_rate_experiment,
    run_two_atom_case,
    slope_fit,
    two_atom_measures,
)

__version__ = "0.1.0"
