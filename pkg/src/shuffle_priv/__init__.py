"""Shuffle-model privacy curves and chi-square-budget mechanism design.

The library is organized around one invariant: for a pair of inputs, the
shuffled-histogram experiment depends on the channel only through the law of
the pairwise likelihood ratio under the null row.  Channels construct laws;
laws produce exact privacy curves; the same pairwise divergence prices
mechanisms on the estimation side, where the budget-signal frontier and its
optimal (thinned randomized-response) mechanisms live.
"""

from .channel import (
    Channel,
    ExtremalityReport,
    Histogram,
    LRLaw,
    chi2_matrix,
    chi_star,
    chi_star_pair,
    exact_lr,
    is_extremal,
    law_from_atoms,
    ldp_parameter,
    lr_law,
    pairwise_chi2,
    universal_bound,
    validate_channel,
)
from .mechanisms import (
    EquivariantChannel,
    MixtureSpec,
    OrbitTemplate,
    augmented_grr,
    build_channel,
    grr,
    grr_mixture,
    grr_template,
    half_block,
    interpolated,
    materialize_orbit_channel,
    orbit_channel,
    subset_inclusion_probs,
    subset_selection,
    two_level_template,
)
from .privacy import (
    BE_CONSTANT,
    FamilyDiagnostic,
    PrivacyCurve,
    be_certificate,
    default_eps_grid,
    dilution_bounds,
    family_diagnostic,
    gdp_curve,
    gdp_scale,
    privacy_curve_exact,
    privacy_curve_two_atom,
)
from .bounds import (
    AssouadReport,
    CrBoundReport,
    FisherInfo,
    SymmetrizedFisherReport,
    assouad_bound,
    assouad_cube,
    cr_bound,
    fisher_info,
    near_vertex_point,
    symmetrized_chi2,
    symmetrized_fisher_uniform,
    tangent_basis,
)
from .frontier import (
    ConcavityReport,
    FrontierPoint,
    OptRiskResult,
    SOptResult,
    SubsetTableRow,
    TwoLevelReport,
    c_star,
    concavity_certificate,
    eta,
    frontier_table,
    grr_budget,
    lambda_of_budget,
    mixture_budget,
    mixture_risk,
    mixture_signal,
    opt_risk,
    orbit_slope,
    orbit_slope_bound,
    projected_risk,
    s_opt,
    ss_budget,
    ss_matched_risk,
    ss_risk,
    thinned_ss_ratio,
    two_level_slope,
)
from .simulate import (
    AssouadSimResult,
    Composition,
    EstimatorSpec,
    ScoreSimResult,
    SimResult,
    SufficiencyReport,
    assouad_decoder_sim,
    empirical_privacy_curve,
    empirical_risk,
    empirical_score,
    estimate,
    mixture_estimator,
    orbit_estimator,
    replication_rng,
    sample_histogram,
    ss_estimator,
    sufficiency_oracle,
    uniformish_composition,
)

__version__ = "0.1.0"
