//! Growth diagnostics and bound certification for computed expansions.
//!
//! Everything in this module is a pure function of its inputs: reports are
//! bit-reproducible across runs and carry enough detail (windows, skipped
//! orders, per-inequality values) to be dumped verbatim into run artifacts.
//!
//! The exponent extracted by [`gevrey_fit`] is called `sigma` throughout,
//! and that name is reserved for the factorial-growth exponent; the gauge
//! freedom in the conjugacy is called "shift" elsewhere and never sigma.

use crate::error::{Error, Result};
use crate::fourier::TrigPoly;
use crate::lower::{LowerExpansion, LowerModel};
use crate::maximal::{MaximalExpansion, MaximalModel};
use crate::scalar::Scalar;

/// Cumulative table of ln(n!) for n = 0..=n_max.
///
/// Built by summing ln(k), which agrees with the log-gamma function at
/// integer arguments to within accumulated rounding (well below any
/// tolerance used here) and needs no special-function dependency.
fn ln_factorial_table(n_max: usize) -> Vec<f64> {
    let mut lf = Vec::with_capacity(n_max + 1);
    lf.push(0.0);
    let mut acc = 0.0f64;
    for k in 1..=n_max {
        acc += (k as f64).ln();
        lf.push(acc);
    }
    lf
}

/// Stirling's approximation to ln(n!), used only as an independent
/// cross-check regressor in [`gevrey_fit`]. Exact at n = 0 by convention.
fn ln_factorial_stirling(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let x = n as f64;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
}

/// Result of the three-parameter growth fit
/// `ln ||u_n|| ~ ln a + n ln r + sigma ln(n!)`.
#[derive(Clone, Debug)]
pub struct GevreyFit {
    /// Fitted prefactor (linear scale).
    pub a: f64,
    /// Fitted geometric ratio (linear scale).
    pub r: f64,
    /// Fitted factorial exponent.
    pub sigma: f64,
    /// Inclusive window of orders requested for the fit.
    pub fit_window: (usize, usize),
    /// Number of points actually used.
    pub used: usize,
    /// Orders inside the window excluded because their norm was zero.
    pub skipped: Vec<usize>,
    /// Root-mean-square of the log-space fit residuals.
    pub residual_rms: f64,
    /// Exponent refit with Stirling's approximation in place of the exact
    /// log-factorial regressor.
    pub sigma_stirling: f64,
    /// |sigma - sigma_stirling|: a large value flags an ill-conditioned
    /// window rather than a property of the data.
    pub stirling_delta: f64,
}

/// Solves the 3x3 normal equations for the design (1, n, L(n)) against y.
/// Returns (c0, c1, c2) with y ~ c0 + c1 n + c2 L(n).
fn solve_growth_lsq(ns: &[f64], ls: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let m = ns.len() as f64;
    let mut a = [[0.0f64; 4]; 3];
    // Normal matrix and right-hand side.
    let (mut sn, mut sl, mut snn, mut snl, mut sll) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sny, mut sly) = (0.0, 0.0, 0.0);
    for i in 0..ns.len() {
        let (n, l, y) = (ns[i], ls[i], ys[i]);
        sn += n;
        sl += l;
        snn += n * n;
        snl += n * l;
        sll += l * l;
        sy += y;
        sny += n * y;
        sly += l * y;
    }
    a[0] = [m, sn, sl, sy];
    a[1] = [sn, snn, snl, sny];
    a[2] = [sl, snl, sll, sly];

    // Gaussian elimination with partial pivoting; a tiny pivot relative to
    // the largest matrix entry means the regressors are collinear on this
    // window (e.g. too few distinct orders).
    let scale = a
        .iter()
        .flat_map(|row| row[..3].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-12 * scale {
            return Err(Error::FitUnderdetermined(format!(
                "growth-fit normal equations are singular (pivot {:.3e} vs scale {:.3e})",
                a[piv][col].abs(),
                scale
            )));
        }
        a.swap(col, piv);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let c2 = a[2][3] / a[2][2];
    let c1 = (a[1][3] - a[1][2] * c2) / a[1][1];
    let c0 = (a[0][3] - a[0][1] * c1 - a[0][2] * c2) / a[0][0];
    Ok((c0, c1, c2))
}

/// Fits `||u_n|| ~ a r^n (n!)^sigma` on the inclusive window
/// `[n_lo, n_hi]` by least squares in log space.
///
/// Zero norms inside the window are excluded from the fit and recorded in
/// the report. At least four usable points are required; the window must
/// start at n >= 3 so that the constant, linear, and log-factorial
/// regressors are independent.
pub fn gevrey_fit(points: &[(usize, f64)], n_lo: usize, n_hi: usize) -> Result<GevreyFit> {
    if n_lo < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit window must start at order >= 3, got {n_lo}"
        )));
    }
    if n_hi < n_lo {
        return Err(Error::InvalidArgument(format!(
            "fit window [{n_lo}, {n_hi}] is empty"
        )));
    }
    let mut in_window = 0usize;
    let mut skipped = Vec::new();
    let mut ns = Vec::new();
    let mut ys = Vec::new();
    for &(n, norm) in points {
        if n < n_lo || n > n_hi {
            continue;
        }
        if !norm.is_finite() || norm < 0.0 {
            return Err(Error::NormOverflow(format!(
                "norm at order {n} is not a finite non-negative value: {norm}"
            )));
        }
        in_window += 1;
        if norm == 0.0 {
            skipped.push(n);
        } else {
            ns.push(n);
            ys.push(norm.ln());
        }
    }
    if ns.len() < 4 {
        if in_window >= 4 {
            return Err(Error::ZeroNorm(format!(
                "only {} positive norms in window [{n_lo}, {n_hi}] ({} zero orders skipped)",
                ns.len(),
                skipped.len()
            )));
        }
        return Err(Error::InsufficientData(format!(
            "growth fit needs >= 4 points in window [{n_lo}, {n_hi}], got {}",
            ns.len()
        )));
    }

    let lf = ln_factorial_table(n_hi);
    let nsf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ls: Vec<f64> = ns.iter().map(|&n| lf[n]).collect();
    let (c0, c1, c2) = solve_growth_lsq(&nsf, &ls, &ys)?;

    let mut ss = 0.0f64;
    for i in 0..ns.len() {
        let resid = ys[i] - (c0 + c1 * nsf[i] + c2 * ls[i]);
        ss += resid * resid;
    }
    let residual_rms = (ss / ns.len() as f64).sqrt();

    let ls_st: Vec<f64> = ns.iter().map(|&n| ln_factorial_stirling(n)).collect();
    let (_, _, c2_st) = solve_growth_lsq(&nsf, &ls_st, &ys)?;

    Ok(GevreyFit {
        a: c0.exp(),
        r: c1.exp(),
        sigma: c2,
        fit_window: (n_lo, n_hi),
        used: ns.len(),
        skipped,
        residual_rms,
        sigma_stirling: c2_st,
        stirling_delta: (c2 - c2_st).abs(),
    })
}

/// Orders inside `[n_lo, n_hi]` whose norm exceeds the fitted envelope
/// `inflate * a * r^n * (n!)^sigma`. Comparison is done in log space so
/// large orders cannot overflow. Zero norms trivially satisfy any bound.
pub fn fit_domination_failures(
    fit: &GevreyFit,
    points: &[(usize, f64)],
    n_lo: usize,
    n_hi: usize,
    inflate: f64,
) -> Result<Vec<usize>> {
    if !(inflate > 0.0) || !fit.a.is_finite() || fit.a <= 0.0 {
        return Err(Error::InvalidArgument(
            "domination check needs a positive inflation factor and a positive fitted prefactor"
                .to_string(),
        ));
    }
    let lf = ln_factorial_table(n_hi);
    let ln_a = fit.a.ln() + inflate.ln();
    let ln_r = fit.r.ln();
    let mut failures = Vec::new();
    for &(n, norm) in points {
        if n < n_lo || n > n_hi || norm == 0.0 {
            continue;
        }
        if !norm.is_finite() || norm < 0.0 {
            return Err(Error::NormOverflow(format!(
                "norm at order {n} is not a finite non-negative value: {norm}"
            )));
        }
        let bound_log = ln_a + ln_r * n as f64 + fit.sigma * lf[n];
        if norm.ln() > bound_log {
            failures.push(n);
        }
    }
    Ok(failures)
}

/// Value of the binomial sum `S_n = sum_j C(n, j)^(-sigma)` maximized over
/// `0 <= n <= n_max`, with the orders attaining the maximum (up to a
/// relative tie tolerance of 1e-12).
#[derive(Clone, Debug)]
pub struct GammaSigma {
    pub value: f64,
    pub attained: Vec<usize>,
    pub sigma: f64,
    pub n_max: usize,
}

/// Computes `Gamma_sigma = max_{0 <= n <= n_max} sum_j C(n,j)^(-sigma)`.
///
/// Binomials are evaluated in log space from a cumulative log-factorial
/// table; the inner sum runs over the symmetric half and stops early once
/// terms fall below 1e-22, which bounds the discarded tail by n * 1e-22,
/// far below the tie tolerance. The scan is sequential, so the result is
/// deterministic.
pub fn gamma_sigma(sigma: f64, n_max: usize) -> Result<GammaSigma> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument(
            "n_max must be at least 1".to_string(),
        ));
    }
    let lf = ln_factorial_table(n_max);
    let mut best = f64::NEG_INFINITY;
    let mut attained: Vec<usize> = Vec::new();
    for n in 0..=n_max {
        let mut s = 0.0f64;
        for j in 0..=(n / 2) {
            let ln_c = lf[n] - lf[j] - lf[n - j];
            let term = (-sigma * ln_c).exp();
            if 2 * j < n {
                s += 2.0 * term;
            } else {
                s += term;
            }
            if term < 1e-22 {
                break;
            }
        }
        if s > best * (1.0 + 1e-12) {
            best = s;
            attained.clear();
            attained.push(n);
        } else if s >= best * (1.0 - 1e-12) {
            if s > best {
                best = s;
            }
            attained.push(n);
        }
    }
    Ok(GammaSigma {
        value: best,
        attained,
        sigma,
        n_max,
    })
}

/// Outcome of [`product_bound_check`].
#[derive(Clone, Debug)]
pub struct ProductBoundReport {
    /// True when every order satisfies the product bound.
    pub ok: bool,
    /// Orders n where the Cauchy-product norm exceeded the bound.
    pub violations: Vec<usize>,
    /// Indices j where `||u_j||` exceeds `A (j!)^sigma` (hypothesis breach).
    pub u_envelope_violations: Vec<usize>,
    /// Indices j where `||v_j||` exceeds `B (j!)^sigma`.
    pub v_envelope_violations: Vec<usize>,
    /// The constant used on the right-hand side.
    pub gamma_sigma: f64,
    /// Largest ratio (product norm) / (bound) over all checked orders.
    pub max_ratio: f64,
    /// Number of orders checked.
    pub orders: usize,
}

/// Verifies the Banach-algebra product bound: for norm sequences with
/// `||u_j|| <= A (j!)^sigma` and `||v_j|| <= B (j!)^sigma`, every
/// Cauchy-product norm `sum_j ||u_j|| ||v_{n-j}||` is at most
/// `Gamma_sigma * A * B * (n!)^sigma`.
///
/// When the envelope hypotheses hold the conclusion is a theorem, so
/// `ok = false` can only arise from data that also breaches an envelope;
/// both kinds of breach are reported (with a 1e-12 relative slack for
/// rounding) rather than raised, so the check is usable as a detector.
pub fn product_bound_check(
    u_norms: &[f64],
    v_norms: &[f64],
    a: f64,
    b: f64,
    sigma: f64,
) -> Result<ProductBoundReport> {
    if u_norms.is_empty() || v_norms.is_empty() {
        return Err(Error::InsufficientData(
            "product bound check needs non-empty norm sequences".to_string(),
        ));
    }
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidArgument(
            "envelope constants A and B must be positive".to_string(),
        ));
    }
    let n_orders = u_norms.len().min(v_norms.len());
    let lf = ln_factorial_table(n_orders.max(1));
    let mut u_envelope_violations = Vec::new();
    let mut v_envelope_violations = Vec::new();
    for (series, bound, out) in [
        (u_norms, a, &mut u_envelope_violations),
        (v_norms, b, &mut v_envelope_violations),
    ] {
        for (j, &x) in series.iter().enumerate().take(n_orders) {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "norm at index {j} is not a finite non-negative value: {x}"
                )));
            }
            if x > 0.0 && x.ln() > bound.ln() + sigma * lf[j] + 1e-12 {
                out.push(j);
            }
        }
    }
    // The sup over n stabilizes by small n for the exponents in use; 512
    // comfortably covers it while staying cheap, and never undershoots the
    // constant on the orders actually checked.
    let gs = gamma_sigma(sigma, n_orders.max(512))?;
    let mut violations = Vec::new();
    let mut max_ratio = 0.0f64;
    for n in 0..n_orders {
        let mut p = 0.0f64;
        for j in 0..=n {
            p += u_norms[j] * v_norms[n - j];
        }
        let bound_log = gs.value.ln() + a.ln() + b.ln() + sigma * lf[n];
        let ratio = if p == 0.0 {
            0.0
        } else {
            (p.ln() - bound_log).exp()
        };
        max_ratio = max_ratio.max(ratio);
        if ratio > 1.0 + 1e-12 {
            violations.push(n);
        }
    }
    Ok(ProductBoundReport {
        ok: violations.is_empty(),
        violations,
        u_envelope_violations,
        v_envelope_violations,
        gamma_sigma: gs.value,
        max_ratio,
        orders: n_orders,
    })
}

/// Which set of inductive inequalities to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    Maximal,
    LowerDissipative,
    LowerConservative,
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConditionKind::Maximal => write!(f, "maximal"),
            ConditionKind::LowerDissipative => write!(f, "lower-dissipative"),
            ConditionKind::LowerConservative => write!(f, "lower-conservative"),
        }
    }
}

/// One inequality in an inductive-condition report.
#[derive(Clone, Debug)]
pub struct InequalityCheck {
    pub label: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Per-inequality outcome of [`check_inductive_conditions`].
#[derive(Clone, Debug)]
pub struct InductiveReport {
    pub kind: ConditionKind,
    pub gamma_sigma: f64,
    pub checks: Vec<InequalityCheck>,
    pub all_pass: bool,
}

/// Evaluates the three inductive smallness conditions for envelope
/// constants (A, B), Gevrey exponent sigma, and frequency/potential data
/// (tau, nu, J, Upsilon, gamma):
///
/// 1. `2 tau < sigma`
/// 2. `J * Gamma_sigma * A * B <= A`
/// 3. `4 nu^-2 J^(2 tau) (Upsilon A + 2 gamma B) <= B`, with the
///    `2 gamma B` term dropped in the conservative lower case (where gamma
///    must be zero).
///
/// All three are evaluated regardless of individual failures so the report
/// shows every margin.
#[allow(clippy::too_many_arguments)]
pub fn check_inductive_conditions(
    kind: ConditionKind,
    a: f64,
    b: f64,
    sigma: f64,
    tau: f64,
    nu: f64,
    j: f64,
    upsilon: f64,
    gamma: f64,
) -> Result<InductiveReport> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidArgument(
            "envelope constants A and B must be positive".to_string(),
        ));
    }
    if !(sigma > 0.0) || !(tau > 0.0) || !(nu > 0.0) || !(j >= 1.0) {
        return Err(Error::InvalidArgument(
            "need sigma > 0, tau > 0, nu > 0, J >= 1".to_string(),
        ));
    }
    if !(upsilon >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(
            "Upsilon and gamma must be non-negative".to_string(),
        ));
    }
    if kind == ConditionKind::LowerConservative && gamma != 0.0 {
        return Err(Error::InvalidArgument(
            "conservative conditions require gamma = 0".to_string(),
        ));
    }
    let gs = gamma_sigma(sigma, 512)?;
    let mut checks = Vec::with_capacity(3);
    checks.push(InequalityCheck {
        label: "2*tau < sigma",
        lhs: 2.0 * tau,
        rhs: sigma,
        pass: 2.0 * tau < sigma,
    });
    let lhs2 = j * gs.value * a * b;
    checks.push(InequalityCheck {
        label: "J*Gamma_sigma*A*B <= A",
        lhs: lhs2,
        rhs: a,
        pass: lhs2 <= a,
    });
    let prefac = 4.0 / (nu * nu) * j.powf(2.0 * tau);
    let (label3, lhs3) = match kind {
        ConditionKind::LowerConservative => (
            "4*nu^-2*J^(2*tau)*Upsilon*A <= B",
            prefac * upsilon * a,
        ),
        _ => (
            "4*nu^-2*J^(2*tau)*(Upsilon*A + 2*gamma*B) <= B",
            prefac * (upsilon * a + 2.0 * gamma * b),
        ),
    };
    checks.push(InequalityCheck {
        label: label3,
        lhs: lhs3,
        rhs: b,
        pass: lhs3 <= b,
    });
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(InductiveReport {
        kind,
        gamma_sigma: gs.value,
        checks,
        all_pass,
    })
}

/// How the model parameters transform under the order-n rescaling by
/// eta^n: the potential amplitude scales by eta and the dissipation
/// coefficient by eta^3.
#[derive(Clone, Debug)]
pub struct ScaleReport<T: Scalar> {
    pub eta: T,
    pub upsilon_scaled: T,
    pub gamma_scaled: T,
}

/// Rescales a maximal expansion by eta^n per order and reports the
/// parameters (Upsilon-tilde, gamma-tilde) of the equivalent rescaled
/// model. The returned expansion equals, order by order, what a fresh run
/// on the rescaled model would produce.
pub fn scale_series_maximal<T: Scalar>(
    ex: &MaximalExpansion<T>,
    model: &MaximalModel<T>,
    eta: &T,
) -> (MaximalExpansion<T>, ScaleReport<T>) {
    let scaled = ex.scaled(eta);
    let report = ScaleReport {
        eta: eta.clone(),
        upsilon_scaled: eta.clone() * model.potential.upsilon(),
        gamma_scaled: eta.clone() * eta.clone() * eta.clone() * model.gamma.clone(),
    };
    (scaled, report)
}

/// Rescales a lower-tori expansion by eta^n per order; see
/// [`scale_series_maximal`].
pub fn scale_series_lower<T: Scalar>(
    ex: &LowerExpansion<T>,
    model: &LowerModel<T>,
    eta: &T,
) -> (LowerExpansion<T>, ScaleReport<T>) {
    let scaled = ex.scaled(eta);
    let report = ScaleReport {
        eta: eta.clone(),
        upsilon_scaled: eta.clone() * model.potential.upsilon(),
        gamma_scaled: eta.clone() * eta.clone() * eta.clone() * model.gamma.clone(),
    };
    (scaled, report)
}

/// Least-squares fit of `ln(residual) ~ intercept + slope * ln(eps)`.
#[derive(Clone, Debug)]
pub struct ResidualFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub points: usize,
}

/// Fits the order of contact of a truncated residual: the slope of
/// log-residual against log-eps. Requires at least three points whose eps
/// values span at least one decade.
pub fn residual_order_fit(points: &[(f64, f64)]) -> Result<ResidualFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "residual order fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let mut eps_min = f64::INFINITY;
    let mut eps_max = 0.0f64;
    for &(eps, r) in points {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "eps values must be positive and finite, got {eps}"
            )));
        }
        if !r.is_finite() || r < 0.0 {
            return Err(Error::NormOverflow(format!(
                "residual at eps = {eps} is not a finite non-negative value: {r}"
            )));
        }
        if r == 0.0 {
            return Err(Error::ZeroNorm(format!(
                "residual at eps = {eps} is zero; log-log fit is undefined"
            )));
        }
        eps_min = eps_min.min(eps);
        eps_max = eps_max.max(eps);
    }
    if eps_max / eps_min < 10.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "eps grid spans a factor of {:.3}, need at least one decade",
            eps_max / eps_min
        )));
    }
    let m = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(eps, r) in points {
        let (x, y) = (eps.ln(), r.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = m * sxx - sx * sx;
    if det.abs() < 1e-12 * m * sxx.abs().max(1.0) {
        return Err(Error::FitUnderdetermined(
            "eps values are too clustered for a slope fit".to_string(),
        ));
    }
    let slope = (m * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / m;
    let mut ss = 0.0f64;
    for &(eps, r) in points {
        let resid = r.ln() - (intercept + slope * eps.ln());
        ss += resid * resid;
    }
    Ok(ResidualFit {
        slope,
        intercept,
        residual_rms: (ss / m).sqrt(),
        points: points.len(),
    })
}

/// One order's row in a degree audit.
#[derive(Clone, Debug)]
pub struct DegreeRow {
    pub order: usize,
    /// Largest mode 1-norm with a nonzero coefficient (0 when empty).
    pub attained: i64,
    /// The bound n * J for this order.
    pub bound: i64,
    pub ok: bool,
}

/// Outcome of [`degree_audit`].
#[derive(Clone, Debug)]
pub struct DegreeAudit {
    pub rows: Vec<DegreeRow>,
    pub ok: bool,
    /// Orders whose attained degree exceeded the bound.
    pub failures: Vec<usize>,
}

/// Audits the support-degree law: the order-n coefficient of the series
/// must live on modes of 1-norm at most n * J, where J is the degree of
/// the forcing. Violations are reported, not raised as errors, so the
/// audit is usable on series that fail it.
pub fn degree_audit<T: Scalar>(series: &[TrigPoly<T>], j: i64) -> DegreeAudit {
    let mut rows = Vec::with_capacity(series.len());
    let mut failures = Vec::new();
    for (n, poly) in series.iter().enumerate() {
        let attained = poly.degree();
        let bound = (n as i64) * j.max(0);
        let ok = attained <= bound;
        if !ok {
            failures.push(n);
        }
        rows.push(DegreeRow {
            order: n,
            attained,
            bound,
            ok,
        });
    }
    DegreeAudit {
        ok: failures.is_empty(),
        rows,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::Frequency;
    use crate::fourier::{Potential, PotentialTerm};
    use crate::maximal::expand;

    fn factorial_norms(n_hi: usize, sigma: f64, a: f64, r: f64) -> Vec<(usize, f64)> {
        let lf = ln_factorial_table(n_hi);
        (0..=n_hi)
            .map(|n| (n, (a.ln() + r.ln() * n as f64 + sigma * lf[n]).exp()))
            .collect()
    }

    #[test]
    fn fit_recovers_own_model_exactly() {
        let pts = factorial_norms(20, 1.0, 1.0, 1.0);
        let fit = gevrey_fit(&pts, 3, 20).unwrap();
        assert!((fit.sigma - 1.0).abs() < 1e-9, "sigma = {}", fit.sigma);
        assert!((fit.r - 1.0).abs() < 1e-9, "r = {}", fit.r);
        assert!((fit.a - 1.0).abs() < 1e-9, "a = {}", fit.a);
        assert!(fit.residual_rms < 1e-10);
        assert!(fit.skipped.is_empty());
        assert_eq!(fit.used, 18);
    }

    #[test]
    fn fit_recovers_mixed_model() {
        // ||u_n|| = 0.3 * 2.5^n * (n!)^(3/2)
        let pts = factorial_norms(25, 1.5, 0.3, 2.5);
        let fit = gevrey_fit(&pts, 4, 25).unwrap();
        assert!((fit.sigma - 1.5).abs() < 1e-9);
        assert!((fit.r - 2.5).abs() < 1e-8);
        assert!((fit.a - 0.3).abs() < 1e-8);
    }

    #[test]
    fn geometric_data_has_zero_sigma() {
        let pts: Vec<(usize, f64)> = (0..=20).map(|n| (n, 2.0f64.powi(n as i32))).collect();
        let fit = gevrey_fit(&pts, 3, 20).unwrap();
        assert!(fit.sigma.abs() < 1e-6, "sigma = {}", fit.sigma);
        assert!((fit.r - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_norms_are_skipped_and_recorded() {
        let mut pts = factorial_norms(20, 1.0, 1.0, 1.0);
        for &n in &[5usize, 9, 13] {
            pts[n].1 = 0.0;
        }
        let fit = gevrey_fit(&pts, 3, 20).unwrap();
        assert_eq!(fit.skipped, vec![5, 9, 13]);
        assert_eq!(fit.used, 15);
        assert!((fit.sigma - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_many_zeros_is_zero_norm_error() {
        let mut pts = factorial_norms(10, 1.0, 1.0, 1.0);
        for p in pts.iter_mut() {
            if p.0 >= 5 {
                p.1 = 0.0;
            }
        }
        match gevrey_fit(&pts, 3, 10) {
            Err(Error::ZeroNorm(_)) => {}
            other => panic!("expected ZeroNorm, got {other:?}"),
        }
    }

    #[test]
    fn short_window_is_insufficient_data() {
        let pts = factorial_norms(20, 1.0, 1.0, 1.0);
        match gevrey_fit(&pts, 3, 5) {
            Err(Error::InsufficientData(_)) => {}
            other => panic!("expected InsufficientData, got {other:?}"),
        }
    }

    #[test]
    fn window_below_three_rejected() {
        let pts = factorial_norms(20, 1.0, 1.0, 1.0);
        assert!(matches!(
            gevrey_fit(&pts, 1, 20),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn stirling_cross_check_is_close_on_wide_window() {
        let pts = factorial_norms(40, 1.0, 1.0, 1.0);
        let fit = gevrey_fit(&pts, 15, 40).unwrap();
        // Stirling's approximation differs from ln n! by O(1/n); on a wide
        // high-order window the refit exponent agrees to a few percent.
        assert!(
            fit.stirling_delta < 0.05,
            "stirling_delta = {}",
            fit.stirling_delta
        );
    }

    #[test]
    fn domination_check_flags_envelope_breaches() {
        let pts = factorial_norms(30, 1.0, 1.0, 1.0);
        let fit = gevrey_fit(&pts, 3, 20).unwrap();
        // With a 10% inflation the fitted envelope dominates its own data.
        let failures = fit_domination_failures(&fit, &pts, 21, 30, 1.1).unwrap();
        assert!(failures.is_empty());
        // A spiked point must be flagged.
        let mut spiked = pts.clone();
        spiked[25].1 *= 10.0;
        let failures = fit_domination_failures(&fit, &spiked, 21, 30, 1.1).unwrap();
        assert_eq!(failures, vec![25]);
    }

    #[test]
    fn gamma_one_is_eight_thirds_at_three_and_four() {
        let gs = gamma_sigma(1.0, 100).unwrap();
        assert!((gs.value - 8.0 / 3.0).abs() < 1e-12, "value = {}", gs.value);
        assert_eq!(gs.attained, vec![3, 4]);
    }

    #[test]
    fn gamma_stabilizes_early() {
        let small = gamma_sigma(1.0, 10).unwrap();
        let large = gamma_sigma(1.0, 2000).unwrap();
        assert_eq!(small.value, large.value);
        assert_eq!(small.attained, large.attained);
    }

    #[test]
    fn gamma_decreases_in_sigma_and_is_at_least_two() {
        let mut prev = f64::INFINITY;
        for sigma in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0] {
            let gs = gamma_sigma(sigma, 200).unwrap();
            assert!(gs.value >= 2.0 - 1e-15, "sigma={sigma}: {}", gs.value);
            assert!(gs.value < prev, "not decreasing at sigma={sigma}");
            prev = gs.value;
        }
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        assert!(gamma_sigma(0.0, 10).is_err());
        assert!(gamma_sigma(-1.0, 10).is_err());
        assert!(gamma_sigma(1.0, 0).is_err());
    }

    #[test]
    fn product_bound_holds_for_constant_ones() {
        // All-ones norms with A = B = 1, sigma = 1: the Cauchy-product norm
        // at order n is exactly n + 1, and n + 1 <= (8/3) n! for every n.
        let ones = vec![1.0; 50];
        let rep = product_bound_check(&ones, &ones, 1.0, 1.0, 1.0).unwrap();
        assert!(rep.ok, "violations at {:?}", rep.violations);
        assert!((rep.gamma_sigma - 8.0 / 3.0).abs() < 1e-12);
        // The tightest order is n = 1: ratio (n+1)/(Gamma * n!) = 2/(8/3).
        assert!((rep.max_ratio - 0.75).abs() < 1e-12, "{}", rep.max_ratio);
    }

    #[test]
    fn product_bound_holds_for_random_admissible_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_d1a6);
        let lf = ln_factorial_table(24);
        for _ in 0..100 {
            let a = rng.gen_range(0.1..4.0);
            let b = rng.gen_range(0.1..4.0);
            let u: Vec<f64> = (0..=24)
                .map(|n| rng.gen_range(0.0..1.0) * (a.ln() + lf[n]).exp())
                .collect();
            let v: Vec<f64> = (0..=24)
                .map(|n| rng.gen_range(0.0..1.0) * (b.ln() + lf[n]).exp())
                .collect();
            let rep = product_bound_check(&u, &v, a, b, 1.0).unwrap();
            assert!(rep.ok, "violations {:?} ratio {}", rep.violations, rep.max_ratio);
        }
    }

    #[test]
    fn product_bound_saturating_data_attains_ratio_one() {
        // ||u_j|| = (j!)^1 exactly saturates the envelope; the Cauchy sum
        // is (n!) * S_n with S_n the binomial sum, so the ratio peaks at
        // exactly 1 where Gamma_1 is attained, and no order violates.
        let lf = ln_factorial_table(30);
        let u: Vec<f64> = (0..=30).map(|n| lf[n].exp()).collect();
        let rep = product_bound_check(&u, &u, 1.0, 1.0, 1.0).unwrap();
        assert!(rep.ok);
        assert!(rep.u_envelope_violations.is_empty());
        assert!((rep.max_ratio - 1.0).abs() < 1e-12, "{}", rep.max_ratio);
    }

    #[test]
    fn product_bound_flags_breach_and_its_cause() {
        // A spiked mid-order norm breaches its envelope, and the Cauchy
        // sums that contain it overshoot the conclusion: both sides of the
        // implication are reported.
        let lf = ln_factorial_table(10);
        let mut u: Vec<f64> = (0..=10).map(|n| lf[n].exp()).collect();
        let v = u.clone();
        u[3] *= 100.0;
        let rep = product_bound_check(&u, &v, 1.0, 1.0, 1.0).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.u_envelope_violations, vec![3]);
        assert!(rep.v_envelope_violations.is_empty());
        assert!(rep.violations.contains(&3), "{:?}", rep.violations);
        assert!(rep.max_ratio > 1.0);
    }

    #[test]
    fn inductive_conditions_pass_for_small_forcing() {
        let rep = check_inductive_conditions(
            ConditionKind::Maximal,
            1.0,
            0.3,
            2.5,
            1.0,
            2.65,
            1.0,
            1e-3,
            1e-3,
        )
        .unwrap();
        assert!(rep.all_pass, "{:#?}", rep.checks);
        assert_eq!(rep.checks.len(), 3);
    }

    #[test]
    fn inductive_conditions_fail_when_sigma_too_small() {
        let rep = check_inductive_conditions(
            ConditionKind::Maximal,
            1.0,
            0.3,
            1.5,
            1.0,
            2.65,
            1.0,
            1e-3,
            1e-3,
        )
        .unwrap();
        assert!(!rep.checks[0].pass);
        assert!(!rep.all_pass);
    }

    #[test]
    fn conservative_kind_drops_gamma_term_and_requires_zero_gamma() {
        let diss = check_inductive_conditions(
            ConditionKind::LowerDissipative,
            1.0,
            0.3,
            2.5,
            1.0,
            2.65,
            2.0,
            1e-3,
            0.0,
        )
        .unwrap();
        let cons = check_inductive_conditions(
            ConditionKind::LowerConservative,
            1.0,
            0.3,
            2.5,
            1.0,
            2.65,
            2.0,
            1e-3,
            0.0,
        )
        .unwrap();
        // With gamma = 0 the dissipative and conservative third conditions
        // coincide numerically.
        assert_eq!(diss.checks[2].lhs, cons.checks[2].lhs);
        assert!(matches!(
            check_inductive_conditions(
                ConditionKind::LowerConservative,
                1.0,
                0.3,
                2.5,
                1.0,
                2.65,
                2.0,
                1e-3,
                0.1,
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn scaling_matches_rescaled_model_run() {
        let pot = Potential::from_terms(
            1,
            &[PotentialTerm {
                mode: vec![1],
                cos_amp: 0.8,
                sin_amp: 0.0,
            }],
        )
        .unwrap();
        let freq = Frequency::<f64>::golden();
        let order = 6;
        let gamma = 0.3;
        let model = MaximalModel::new(pot.clone(), freq.clone(), gamma, order).unwrap();
        let ex = expand(&model).unwrap();

        let eta = 0.5f64;
        let (scaled, report) = scale_series_maximal(&ex, &model, &eta);
        assert_eq!(report.gamma_scaled, gamma * 0.125);
        assert_eq!(report.upsilon_scaled, 0.5 * pot.upsilon());

        let model2 = MaximalModel::new(pot.scaled(&eta), freq, gamma * eta * eta * eta, order)
            .unwrap();
        let ex2 = expand(&model2).unwrap();
        for n in 0..=order {
            for (mode, vals) in ex2.u[n].iter() {
                let got = scaled.u[n].coeff(mode);
                for (gv, ev) in got.iter().zip(vals) {
                    let scale = ev.re.abs().max(ev.im.abs()).max(1e-30);
                    assert!(
                        (gv.re - ev.re).abs() / scale < 1e-11
                            && (gv.im - ev.im).abs() / scale < 1e-11,
                        "order {n} mode {mode:?}: {gv:?} vs {ev:?}"
                    );
                }
            }
            for (a, b) in scaled.mu[n].iter().zip(&ex2.mu[n]) {
                assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-30));
            }
        }
    }

    #[test]
    fn eta_one_scaling_is_identity() {
        let pot = Potential::from_terms(
            1,
            &[PotentialTerm {
                mode: vec![1],
                cos_amp: 0.5,
                sin_amp: 0.2,
            }],
        )
        .unwrap();
        let model =
            MaximalModel::new(pot, Frequency::<f64>::golden(), 0.1, 4).unwrap();
        let ex = expand(&model).unwrap();
        let (scaled, report) = scale_series_maximal(&ex, &model, &1.0);
        assert_eq!(report.gamma_scaled, 0.1);
        for n in 0..=4usize {
            for (mode, vals) in ex.u[n].iter() {
                let got = scaled.u[n].coeff(mode);
                for (gv, ev) in got.iter().zip(vals) {
                    assert_eq!(gv.re, ev.re);
                    assert_eq!(gv.im, ev.im);
                }
            }
        }
    }

    #[test]
    fn residual_fit_recovers_synthetic_slope() {
        let pts: Vec<(f64, f64)> = [1e-2, 3e-3, 1e-3, 3e-4]
            .iter()
            .map(|&e| (e, 0.7 * e * e * e * e))
            .collect();
        let fit = residual_order_fit(&pts).unwrap();
        assert!((fit.slope - 4.0).abs() < 1e-6, "slope = {}", fit.slope);
        assert!((fit.intercept.exp() - 0.7).abs() < 1e-6);
        assert!(fit.residual_rms < 1e-10);
    }

    #[test]
    fn residual_fit_rejects_thin_data() {
        let two = vec![(1e-2, 1e-6), (1e-3, 1e-9)];
        assert!(matches!(
            residual_order_fit(&two),
            Err(Error::InsufficientData(_))
        ));
        let narrow = vec![(1e-2, 1e-6), (8e-3, 5e-7), (6e-3, 2e-7)];
        assert!(matches!(
            residual_order_fit(&narrow),
            Err(Error::InsufficientData(_))
        ));
        let zero = vec![(1e-2, 0.0), (1e-3, 1e-9), (1e-4, 1e-12)];
        assert!(matches!(residual_order_fit(&zero), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn degree_audit_passes_on_computed_series_and_flags_breaches() {
        let pot = Potential::from_terms(
            1,
            &[
                PotentialTerm {
                    mode: vec![1],
                    cos_amp: 0.8,
                    sin_amp: 0.0,
                },
                PotentialTerm {
                    mode: vec![2],
                    cos_amp: 0.3,
                    sin_amp: 0.1,
                },
            ],
        )
        .unwrap();
        let model =
            MaximalModel::new(pot.clone(), Frequency::<f64>::golden(), 0.2, 8).unwrap();
        let ex = expand(&model).unwrap();
        let audit = degree_audit(&ex.u, pot.degree_j());
        assert!(audit.ok, "failures at {:?}", audit.failures);
        assert_eq!(audit.rows.len(), 9);
        for row in &audit.rows {
            assert_eq!(row.bound, 2 * row.order as i64);
        }
        // Tampering with the series must be caught.
        let mut tampered = ex.u.clone();
        tampered[1].insert_term(vec![7], vec![crate::scalar::Cplx::new(1e-3, 0.0)]);
        let audit = degree_audit(&tampered, pot.degree_j());
        assert!(!audit.ok);
        assert_eq!(audit.failures, vec![1]);
    }
}
