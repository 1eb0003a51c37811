from .laplace import (
    LaplaceArgs,
    FixedPointResult,
    MomentCoeffs,
    tilted_excursion_functional,
    H,
    solve_fixed_point,
    conditional_laplace,
    h_beta,
    tagged_mass_mean,
    moment_denominator,
    moment_coefficients,
    second_moment,
    first_moment,
    unconditional_second_moment,
    second_moment_rate_bound,
)
from .r_law import RLawRoot, r_law_equation, r_law_bisection, r_law_composition, solve_R_law_root, r_law_laplace
from .bertoin import (
    BertoinClosedForms,
    BertoinEstimates,
    bertoin_closed_forms,
    bertoin_mc,
    stable_fractional_moment,
    stable_draws,
    fractional_moment_mc,
    dislocation_constant,
    c_alpha,
    g_ratio_limit,
)
