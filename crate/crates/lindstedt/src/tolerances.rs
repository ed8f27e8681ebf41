//! Central tolerance registry.
//!
//! Every inexact comparison in the crate draws its threshold from here.
//! The base values are calibrated for binary64; [`scaled`] rescales them by
//! the working-precision roundoff so the same checks stay meaningful in
//! multiprecision runs.

use crate::scalar::{eps_ratio, Scalar};

/// Solver precondition: `|average(B)| <= ZERO_AVG_FACTOR * norm(B)`.
pub const ZERO_AVG_FACTOR: f64 = 1e-10;

/// Warn (do not fail) when a multiplier magnitude drops below this.
pub const RESONANCE_WARN_TOL: f64 = 1e-8;

/// Nondegeneracy floor as a fraction of the potential size measure.
pub const NONDEG_FACTOR: f64 = 1e-10;

/// Imaginary contamination allowed on quantities that must be real,
/// relative to their magnitude.
pub const REALITY_REL_TOL: f64 = 1e-12;

/// Conservative lower runs: `|k-average of R_n|` relative to the series scale.
pub const K_AVERAGE_REL_TOL: f64 = 1e-10;

/// Bisection width for beta0 roots (absolute, in radians).
pub const BETA0_ROOT_TOL: f64 = 1e-13;

/// Rescale a binary64-calibrated tolerance to the working precision.
pub fn scaled<T: Scalar>(base: f64) -> f64 {
    base * eps_ratio::<T>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary64_tolerances_are_unscaled() {
        assert_eq!(scaled::<f64>(ZERO_AVG_FACTOR), ZERO_AVG_FACTOR);
        assert_eq!(scaled::<f64>(RESONANCE_WARN_TOL), RESONANCE_WARN_TOL);
    }
}
