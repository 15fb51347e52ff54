//! Monotone finite-difference Dirichlet solver on box domains, plus the
//! comparison, envelope and maximum-principle harnesses built on it.

pub mod grid;
pub mod harness;
pub mod io;
pub mod scheme;

pub use grid::{discrete_jet, discrete_spectrum, directional_second_difference, Grid, GridFunction};
pub use harness::{
    check_subharmonic, check_superharmonic, comparison_experiment, perron_envelope, quasiconvexity_defect,
    strict_approximator, sup_convolution, uniform_translation_probe, zmp_experiment, BadTestJet, ComparisonVerdict,
    NodeFiber, NodeVerdict, StrictApproximator, SubharmonicReport, TranslationReport, ZmpReport,
};
pub use scheme::{
    apply_operator, discrete_comparison, interior_ordering, monotonicity_probe, solve_dirichlet, solve_from, stable_step,
    MonotonicityReport, OrderingVerdict, SchemeOp, SolveOptions, SolveReport,
};
pub use io::{run_config, write_grid_csv, write_outcome, GridHeader, SolveOutcome, SolverConfig};
