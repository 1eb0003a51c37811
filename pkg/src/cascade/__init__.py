from .cascade import CascadeParams, GenerationRecord, CascadeRecord, simulate_cascade
from .statistics import FragmentStats, fragment_statistics
from .replicates import (
    ReplicateSet,
    ReplicateSummary,
    simulate_replicates,
    run_replicates,
    laplace_mean,
    weighted_moment,
    weighted_discrepancy,
    normalised_errors,
    point_estimate_errors,
    summary_table,
    laplace_table,
)
