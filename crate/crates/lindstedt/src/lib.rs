//! Arbitrary-order Lindstedt expansions of quasi-periodic invariant tori for
//! dissipative standard-like maps, together with numerical certification of
//! the structural facts the construction relies on: cohomology-solve bounds,
//! degree growth, normalizations, residual scaling, and Gevrey-type growth
//! of the coefficient norms.
//!
//! The crate is generic over the working scalar so every pipeline runs both
//! in hardware binary64 and in arbitrary-precision arithmetic.

pub mod cli;
pub mod cohomology;
pub mod diagnostics;
pub mod error;
pub mod exprec;
pub mod fourier;
pub mod lower;
pub mod maximal;
pub mod scalar;
pub mod tolerances;

pub use cli::{execute, parse_config, parse_dump, serialize_dump, Cli, DumpRecord, RunConfig};
pub use cohomology::{
    apply_l, apply_multiplier, diophantine_profile, solve_zero_average, DiophantineProfile,
    Frequency, FrequencyKind, SolveReport,
};
pub use diagnostics::{
    check_inductive_conditions, degree_audit, fit_domination_failures, gamma_sigma, gevrey_fit,
    product_bound_check, residual_order_fit, scale_series_lower, scale_series_maximal,
    ConditionKind, DegreeAudit, DegreeRow, GammaSigma, GevreyFit, InductiveReport,
    InequalityCheck, ProductBoundReport, ResidualFit, ScaleReport,
};
pub use error::{Error, Result};
pub use exprec::ExpCache;
pub use fourier::{mode_abs, Mode, NormParams, Potential, PotentialTerm, TrigPoly};
pub use lower::{
    expand_lower, find_beta0, nondegeneracy_constant, resonant_average, residual_lower,
    LowerExpansion, LowerModel, LowerTopology,
};
pub use maximal::{
    expand, residual, MaximalExpansion, MaximalModel, ResidualPoint, SolveStats,
};
pub use scalar::{precision_bits, set_precision_bits, Cplx, MpReal, Scalar};
