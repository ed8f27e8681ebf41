//! Rotation frequencies with Diophantine certificates, the discrete
//! second-difference operator along the rotation, and the zero-average
//! cohomology solve that inverts it mode by mode.
//!
//! For a frequency vector omega the operator acts on a series u as
//! u(theta + omega) + u(theta - omega) - 2 u(theta); on the coefficient at
//! mode l it multiplies by m_l = 2 (cos(l . omega) - 1). The solver divides
//! by m_l away from the mean mode and reports how close it came to a
//! resonance, together with a per-mode check of the certified lower bound
//! |m_l|^{-1} <= nu^2 |l|^{2 tau} / 16 implied by the Diophantine condition
//! 2 pi / dist(l . omega, 2 pi Z) <= nu |l|^tau.

use crate::error::{Error, Result};
use crate::fourier::{mode_abs, Mode, TrigPoly};
use crate::scalar::Scalar;
use crate::tolerances;

/// How a frequency was specified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrequencyKind {
    /// 2 pi times the golden mean (sqrt(5) - 1)/2.
    GoldenMean,
    /// Radians given directly.
    Explicit,
    /// 2 pi times the value of a finite continued fraction [0; a1, a2, ...].
    ContinuedFraction,
}

impl std::fmt::Display for FrequencyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrequencyKind::GoldenMean => write!(f, "golden-mean"),
            FrequencyKind::Explicit => write!(f, "explicit"),
            FrequencyKind::ContinuedFraction => write!(f, "continued-fraction"),
        }
    }
}

/// Declared Diophantine certificate for the golden mean with a comfortable
/// margin over the measured profile (the fitted constant stays below 2.62
/// out to |l| = 10^6).
pub const GOLDEN_NU: f64 = 2.65;
pub const GOLDEN_TAU: f64 = 1.0;

/// A rotation vector in radians together with its Diophantine certificate
/// (nu, tau).
#[derive(Clone, Debug)]
pub struct Frequency<T: Scalar> {
    omega: Vec<T>,
    nu: f64,
    tau: f64,
    kind: FrequencyKind,
}

impl<T: Scalar> Frequency<T> {
    /// One-dimensional golden-mean rotation 2 pi (sqrt(5) - 1)/2.
    pub fn golden() -> Self {
        let five = T::from_i64(5);
        let half = T::one() / T::from_i64(2);
        let omega = T::two_pi() * (five.sqrt() - T::one()) * half;
        Frequency {
            omega: vec![omega],
            nu: GOLDEN_NU,
            tau: GOLDEN_TAU,
            kind: FrequencyKind::GoldenMean,
        }
    }

    /// Frequency from radians with a caller-supplied certificate.
    pub fn explicit(omega: Vec<T>, nu: f64, tau: f64) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidArgument("empty frequency vector".into()));
        }
        if !(nu > 0.0) || !(tau > 0.0) {
            return Err(Error::InvalidArgument(
                "certificate requires nu > 0 and tau > 0".into(),
            ));
        }
        Ok(Frequency {
            omega,
            nu,
            tau,
            kind: FrequencyKind::Explicit,
        })
    }

    /// omega = 2 pi [0; a1, a2, ...] evaluated back to front at working
    /// precision.
    pub fn continued_fraction(coeffs: &[u64], nu: f64, tau: f64) -> Result<Self> {
        if coeffs.is_empty() || coeffs.contains(&0) {
            return Err(Error::InvalidArgument(
                "continued fraction needs positive partial quotients".into(),
            ));
        }
        let mut x = T::zero();
        for &a in coeffs.iter().rev() {
            x = T::one() / (T::from_i64(a as i64) + x);
        }
        let mut f = Frequency::explicit(vec![T::two_pi() * x], nu, tau)?;
        f.kind = FrequencyKind::ContinuedFraction;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }
    pub fn omega(&self) -> &[T] {
        &self.omega
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn kind(&self) -> &FrequencyKind {
        &self.kind
    }

    /// l . omega as a scalar.
    pub fn dot(&self, ell: &[i64]) -> T {
        let mut acc = T::zero();
        for (&m, w) in ell.iter().zip(&self.omega) {
            if m != 0 {
                acc = acc + T::from_i64(m) * w.clone();
            }
        }
        acc
    }

    /// Distance from l . omega to the lattice 2 pi Z.
    pub fn dist(&self, ell: &[i64]) -> T {
        let tp = T::two_pi();
        let x = self.dot(ell);
        let k = (x.clone() / tp.clone()).round();
        (x - k * tp).abs()
    }

    /// Cohomology multiplier m_l = 2 (cos(l . omega) - 1).
    pub fn multiplier(&self, ell: &[i64]) -> T {
        let two = T::from_i64(2);
        two * (self.dot(ell).cos() - T::one())
    }

    /// The negated omega, for backward shifts.
    pub fn neg_omega(&self) -> Vec<T> {
        self.omega.iter().map(|w| -w.clone()).collect()
    }
}

/// Result of one zero-average cohomology solve, with resonance telemetry.
#[derive(Clone, Debug)]
pub struct SolveReport<T: Scalar> {
    /// The zero-average solution A with A_l = B_l / m_l.
    pub solution: TrigPoly<T>,
    /// Largest |m_l|^{-1} met during the solve.
    pub max_inv_multiplier: f64,
    /// Modes whose multiplier magnitude fell below the warning tolerance.
    pub near_resonant: Vec<(Mode, f64)>,
    /// Modes violating the certified bound |m_l|^{-1} <= nu^2 |l|^{2tau}/16.
    pub lemma_violations: Vec<Mode>,
    /// Modes violating the certificate 2 pi / dist <= nu |l|^tau itself.
    pub certificate_violations: Vec<Mode>,
    /// Number of non-mean modes divided.
    pub modes_solved: usize,
}

/// Solves L_omega[A] = B for the zero-average A, requiring B to have
/// (numerically) zero mean. `zero_tol` defaults to the working-precision
/// multiple of the coefficient l2 norm of B.
pub fn solve_zero_average<T: Scalar>(
    b: &TrigPoly<T>,
    freq: &Frequency<T>,
    zero_tol: Option<f64>,
) -> Result<SolveReport<T>> {
    if b.dom() != freq.dim() {
        return Err(Error::DimensionMismatch(format!(
            "series domain {} vs frequency dimension {}",
            b.dom(),
            freq.dim()
        )));
    }
    let flat = crate::fourier::NormParams::<T>::flat();
    let bnorm = b.norm(&flat)?.to_f64();
    let tol = zero_tol
        .unwrap_or_else(|| tolerances::scaled::<T>(tolerances::ZERO_AVG_FACTOR) * bnorm);
    let avg = b.average();
    let avg_mag = avg.iter().map(|v| v.abs_sq().to_f64()).sum::<f64>().sqrt();
    if avg_mag > tol {
        return Err(Error::NonZeroAverage {
            avg: avg_mag,
            tol,
        });
    }

    let warn = tolerances::scaled::<T>(tolerances::RESONANCE_WARN_TOL);
    let zero_mode = vec![0i64; b.dom()];
    let mut out = TrigPoly::zero(b.dom(), b.range());
    let mut report_max = 0.0f64;
    let mut near = Vec::new();
    let mut lemma_bad = Vec::new();
    let mut cert_bad = Vec::new();
    let mut solved = 0usize;
    let two_pi = 2.0 * std::f64::consts::PI;

    for (mode, vals) in b.iter() {
        if *mode == zero_mode {
            continue;
        }
        let m = freq.multiplier(mode);
        if m.is_zero() {
            return Err(Error::ExactResonance {
                mode: canonical_mode(mode),
            });
        }
        let m_abs = m.clone().abs().to_f64();
        let inv = 1.0 / m_abs;
        report_max = report_max.max(inv);
        if m_abs < warn {
            near.push((mode.clone(), m_abs));
        }
        let ell_abs = mode_abs(mode) as f64;
        let lemma_bound = freq.nu() * freq.nu() * ell_abs.powf(2.0 * freq.tau()) / 16.0;
        if inv > lemma_bound {
            lemma_bad.push(mode.clone());
        }
        let d = freq.dist(mode).to_f64();
        if d == 0.0 || two_pi / d > freq.nu() * ell_abs.powf(freq.tau()) {
            cert_bad.push(mode.clone());
        }
        let sol: Vec<_> = vals.iter().map(|v| v.div_re(&m)).collect();
        out.insert_term(mode.clone(), sol);
        solved += 1;
    }
    // Dividing conjugate-symmetric data by the even real multiplier keeps
    // exact conjugate pairs, so the flag transfers without re-averaging.
    if b.is_real() {
        out = out.symmetrized();
    }
    Ok(SolveReport {
        solution: out,
        max_inv_multiplier: report_max,
        near_resonant: near,
        lemma_violations: lemma_bad,
        certificate_violations: cert_bad,
        modes_solved: solved,
    })
}

/// Applies the operator in shift form:
/// u(theta + omega) + u(theta - omega) - 2 u(theta).
pub fn apply_l<T: Scalar>(u: &TrigPoly<T>, freq: &Frequency<T>) -> Result<TrigPoly<T>> {
    use crate::scalar::Cplx;
    let fwd = u.shift(freq.omega())?;
    let bwd = u.shift(&freq.neg_omega())?;
    TrigPoly::linear_combine(&[
        (Cplx::one(), &fwd),
        (Cplx::one(), &bwd),
        (Cplx::from_re(T::from_i64(-2)), u),
    ])
}

/// Applies the operator in multiplier form: coefficient at l times m_l.
pub fn apply_multiplier<T: Scalar>(u: &TrigPoly<T>, freq: &Frequency<T>) -> Result<TrigPoly<T>> {
    if u.dom() != freq.dim() {
        return Err(Error::DimensionMismatch(format!(
            "series domain {} vs frequency dimension {}",
            u.dom(),
            freq.dim()
        )));
    }
    let mut out = TrigPoly::zero(u.dom(), u.range());
    for (mode, vals) in u.iter() {
        let m = freq.multiplier(mode);
        let vals: Vec<_> = vals.iter().map(|v| v.scale(&m)).collect();
        out.insert_term(mode.clone(), vals);
    }
    if u.is_real() {
        out = out.symmetrized();
    }
    Ok(out)
}

/// One row of a small-divisor survey.
#[derive(Clone, Debug)]
pub struct ProfileEntry {
    pub mode: Mode,
    pub ell_abs: i64,
    /// dist(l . omega, 2 pi Z).
    pub dist: f64,
    /// 2 pi / dist -- the quantity the certificate bounds by nu |l|^tau.
    pub ratio: f64,
    pub inv_multiplier: f64,
    /// True when this mode sets a new record for ratio / closest approach.
    pub is_record: bool,
}

/// Small-divisor survey over 0 < |l| <= ell_max (one representative per
/// conjugate pair) with a fitted certificate and a check of the declared one.
#[derive(Clone, Debug)]
pub struct DiophantineProfile {
    pub entries: Vec<ProfileEntry>,
    /// Least-squares exponent of the record ratios against |l|.
    pub tau_fit: f64,
    /// Smallest constant making 2 pi / dist <= nu |l|^tau_fit hold for every
    /// surveyed mode.
    pub nu_fit: f64,
    /// Modes where the declared (nu, tau) certificate fails.
    pub declared_violations: Vec<Mode>,
}

/// Positive representative of the +-l pair (first non-zero component > 0).
fn canonical_mode(mode: &[i64]) -> Mode {
    match mode.iter().find(|&&x| x != 0) {
        Some(&x) if x < 0 => mode.iter().map(|&v| -v).collect(),
        _ => mode.to_vec(),
    }
}

/// Enumerates modes with 0 < |l|_1 <= ell_max, keeping one representative
/// per +-l pair (first non-zero component positive), in lexicographic order.
pub fn modes_up_to(dim: usize, ell_max: i64) -> Vec<Mode> {
    let mut out = Vec::new();
    let mut current = vec![0i64; dim];
    fill_modes(&mut out, &mut current, 0, ell_max);
    out.retain(|m| {
        let first = m.iter().find(|&&x| x != 0);
        matches!(first, Some(&x) if x > 0)
    });
    out.sort();
    out
}

fn fill_modes(out: &mut Vec<Mode>, current: &mut Vec<i64>, pos: usize, budget: i64) {
    if pos == current.len() {
        if current.iter().any(|&x| x != 0) {
            out.push(current.clone());
        }
        return;
    }
    for v in -budget..=budget {
        current[pos] = v;
        fill_modes(out, current, pos + 1, budget - v.abs());
        current[pos] = 0;
    }
}

pub fn diophantine_profile<T: Scalar>(
    freq: &Frequency<T>,
    ell_max: i64,
) -> Result<DiophantineProfile> {
    if ell_max < 1 {
        return Err(Error::InvalidArgument("ell_max must be at least 1".into()));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut entries = Vec::new();
    let mut best_dist = f64::INFINITY;
    let mut declared_violations = Vec::new();
    for mode in modes_up_to(freq.dim(), ell_max) {
        let d = freq.dist(&mode).to_f64();
        if d == 0.0 {
            return Err(Error::ExactResonance { mode });
        }
        let ratio = two_pi / d;
        let ell_abs = mode_abs(&mode);
        let m = freq.multiplier(&mode).abs().to_f64();
        let is_record = d < best_dist;
        if is_record {
            best_dist = d;
        }
        if ratio > freq.nu() * (ell_abs as f64).powf(freq.tau()) {
            declared_violations.push(mode.clone());
        }
        entries.push(ProfileEntry {
            mode,
            ell_abs,
            dist: d,
            ratio,
            inv_multiplier: if m > 0.0 { 1.0 / m } else { f64::INFINITY },
            is_record,
        });
    }

    // Fit log ratio = log nu + tau log |l| on the record modes.
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.is_record)
        .map(|e| ((e.ell_abs as f64).ln(), e.ratio.ln()))
        .collect();
    let tau_fit = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let det = n * sxx - sx * sx;
        if det.abs() > 0.0 {
            (n * sxy - sx * sy) / det
        } else {
            1.0
        }
    } else {
        1.0
    };
    let nu_fit = entries
        .iter()
        .map(|e| e.ratio / (e.ell_abs as f64).powf(tau_fit))
        .fold(0.0f64, f64::max);

    Ok(DiophantineProfile {
        entries,
        tau_fit,
        nu_fit,
        declared_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::NormParams;
    use crate::scalar::Cplx;

    #[test]
    fn golden_frequency_value() {
        let f = Frequency::<f64>::golden();
        let expected = std::f64::consts::PI * ((5.0f64).sqrt() - 1.0);
        assert!((f.omega()[0] - expected).abs() < 1e-15);
        assert_eq!(*f.kind(), FrequencyKind::GoldenMean);
    }

    #[test]
    fn continued_fraction_ones_approach_golden() {
        let f = Frequency::<f64>::continued_fraction(&[1; 60], 2.65, 1.0).unwrap();
        let g = Frequency::<f64>::golden();
        assert!((f.omega()[0] - g.omega()[0]).abs() < 1e-12);
    }

    #[test]
    fn multiplier_matches_closed_form() {
        let f = Frequency::<f64>::golden();
        let m = f.multiplier(&[3]);
        let expected = 2.0 * ((3.0 * f.omega()[0]).cos() - 1.0);
        assert!((m - expected).abs() < 1e-15);
    }

    #[test]
    fn solve_round_trip_on_sin() {
        let f = Frequency::<f64>::golden();
        let b = TrigPoly::<f64>::sin_mode(1, &[1]);
        let report = solve_zero_average(&b, &f, None).unwrap();
        let a = &report.solution;
        assert!(a.is_real());
        assert_eq!(report.modes_solved, 2);
        assert!(report.lemma_violations.is_empty());
        assert!(report.certificate_violations.is_empty());
        // A = sin(theta) / m_1.
        let m1 = f.multiplier(&[1]);
        let expect = b.coeff(&[1])[0].clone().div_re(&m1);
        assert_eq!(a.coeff(&[1]), vec![expect]);
        // Applying the operator in shift form recovers B.
        let back = apply_l(a, &f).unwrap();
        let err = TrigPoly::linear_combine(&[
            (Cplx::one(), &back),
            (Cplx::from_re(-1.0), &b),
        ])
        .unwrap();
        assert!(err.norm(&NormParams::flat()).unwrap() < 1e-14);
    }

    #[test]
    fn shift_and_multiplier_forms_agree() {
        let f = Frequency::<f64>::golden();
        let mut u = TrigPoly::<f64>::zero(1, 2);
        u.insert_term(vec![1], vec![Cplx::new(0.3, -0.2), Cplx::new(1.0, 0.0)]);
        u.insert_term(vec![-4], vec![Cplx::new(-0.1, 0.7), Cplx::new(0.0, 2.0)]);
        u.insert_term(vec![0], vec![Cplx::new(5.0, 0.0), Cplx::new(0.0, 0.0)]);
        let a = apply_l(&u, &f).unwrap();
        let b = apply_multiplier(&u, &f).unwrap();
        let diff = TrigPoly::linear_combine(&[
            (Cplx::one(), &a),
            (Cplx::from_re(-1.0), &b),
        ])
        .unwrap();
        assert!(diff.norm(&NormParams::flat()).unwrap() < 1e-13);
    }

    #[test]
    fn nonzero_average_is_rejected() {
        let f = Frequency::<f64>::golden();
        let mut b = TrigPoly::<f64>::sin_mode(1, &[1]);
        b.add_constant(&[Cplx::from_re(0.5)]);
        match solve_zero_average(&b, &f, None) {
            Err(crate::Error::NonZeroAverage { avg, .. }) => {
                assert!((avg - 0.5).abs() < 1e-15)
            }
            other => panic!("expected NonZeroAverage, got {other:?}"),
        }
    }

    #[test]
    fn exact_resonance_detected() {
        // omega = pi exactly: mode l = 2 lands on the lattice.
        let f = Frequency::<f64>::explicit(vec![std::f64::consts::PI], 3.0, 1.0).unwrap();
        let b = TrigPoly::<f64>::sin_mode(1, &[2]);
        match solve_zero_average(&b, &f, None) {
            Err(crate::Error::ExactResonance { mode }) => assert_eq!(mode, vec![2]),
            other => panic!("expected ExactResonance, got {other:?}"),
        }
        match diophantine_profile(&f, 4) {
            Err(crate::Error::ExactResonance { mode }) => assert_eq!(mode, vec![2]),
            other => panic!("expected ExactResonance, got {other:?}"),
        }
    }

    #[test]
    fn near_resonance_is_flagged() {
        // l = 3 approaches the lattice to ~2 pi * 3e-6, so the multiplier
        // drops to ~3.6e-10, under the warning tolerance but not zero.
        let omega = 2.0 * std::f64::consts::PI * (1.0 / 3.0 + 1e-6);
        let f = Frequency::<f64>::explicit(vec![omega], 1e14, 1.0).unwrap();
        let b = TrigPoly::<f64>::sin_mode(1, &[3]);
        let report = solve_zero_average(&b, &f, None).unwrap();
        assert_eq!(report.near_resonant.len(), 2);
        assert!(report.max_inv_multiplier > 1e9);
    }

    #[test]
    fn golden_profile_respects_declared_certificate() {
        let f = Frequency::<f64>::golden();
        let profile = diophantine_profile(&f, 2000).unwrap();
        assert!(profile.declared_violations.is_empty());
        assert!(profile.nu_fit <= GOLDEN_NU);
        assert!((profile.tau_fit - 1.0).abs() < 0.25);
        // The certified multiplier bound holds on the whole survey.
        for e in &profile.entries {
            let bound = GOLDEN_NU * GOLDEN_NU * (e.ell_abs as f64).powf(2.0) / 16.0;
            assert!(
                e.inv_multiplier <= bound,
                "lemma bound fails at {:?}",
                e.mode
            );
        }
    }

    #[test]
    fn mode_enumeration_counts() {
        // dim 1: 1..=5.
        assert_eq!(modes_up_to(1, 5).len(), 5);
        // dim 2, |l|_1 <= 2: half of the 12 non-zero lattice points.
        let modes = modes_up_to(2, 2);
        assert_eq!(modes.len(), 6);
        assert!(modes.contains(&vec![0, 1]));
        assert!(modes.contains(&vec![1, -1]));
        assert!(!modes.contains(&vec![-1, 1]));
    }
}
