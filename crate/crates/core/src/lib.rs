pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod mellin;
pub mod noise;
pub mod processes;
mod quadrature;
pub mod special;
pub mod truth;

pub use error::{Error, Result};
pub use mellin::{
    empirical_mellin, inverse_mellin_cutoff, plancherel_norm_sq, weighted_l2_norm_sq_xspace, CutoffRect,
    DevelopmentPoint, FrequencyGrid, ObservationSet, XDomain,
};
pub use noise::{lambda_g, lambda_g_quadrature, mellin_g, mellin_g_abs2_inv, NoiseKind, NoiseModel};
pub use special::{gamma_half_line_abs2, log_gamma_complex, ComplexValue};
pub use truth::{TailConfig, TruthSpec};
pub use estimator::{
    build_estimate, candidate_grid, moment_estimate, penalty, select_cutoff, truth_approximation, CandidateScore,
    EstimateHandle, PenaltyMode, RatioTable, Selection, SelectionConfig, SelectionDiagnostics,
};
pub use processes::{
    generate_observations, integrated_volatility, lyapunov_residual, observations_from_multipliers, simulate_cir,
    simulate_exp_cir, simulate_exp_ou, stationary_cov_ou, CIRParams, OUParams, PathBundle, PathConfig, ProcessKind,
};
pub use evaluation::{
    aggregate, ise_against_truth, ise_parts, median, median_surface, quartiles, replication_seed, run_monte_carlo,
    run_replication, section_trace, theorem_rate_delta, truth_surface, FitRecord, MCConfig, MCResult, ProbeGrid,
    ProcessSpec, Quartiles, ReplicationRecord, SectionTrace, SurfaceSummary, DEFAULT_SECTION,
};
