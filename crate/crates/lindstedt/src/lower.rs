//! Lower-dimensional (one-frequency) invariant tori in two angle
//! dimensions: hull h(theta) = theta k + g(theta) winding along an integer
//! vector k, with the correction series g and drift mu fixed order by order.
//!
//! The invariance equation reads
//!
//!   L[g] - eps V'(theta k + g) - mu
//!        + gamma eps^3 (g(theta) - g(theta - omega) + omega k) = 0.
//!
//! Solvability splits along k and its integer normal k_perp:
//! * the k_perp component of each order's average is cancelled by the free
//!   constant beta_{n-1} k_perp of the previous correction -- an exactly
//!   affine dependence whose slope is the nondegeneracy constant divided by
//!   2 pi, independent of the order;
//! * the k component is absorbed by the drift mu_n (parallel to k) in the
//!   dissipative case, and must vanish on its own in the conservative case,
//!   where it is checked and the drift stays identically zero.
//!
//! The leading constant beta_0 must be a root of the resonant average
//! phi(beta) = integral of k_perp . V'(theta k + beta k_perp) d theta.

use crate::cohomology::{apply_multiplier, solve_zero_average, Frequency};
use crate::error::{Error, Result};
use crate::exprec::ExpCache;
use crate::fourier::{dft_project_1d, outer, uniform_grid_1d, NormParams, Potential, TrigPoly};
use crate::maximal::{residual_grid_size, ResidualPoint, SolveStats};
use crate::scalar::{Cplx, Scalar};
use crate::tolerances;

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Winding data of a lower-dimensional torus: a primitive integer vector k
/// and the integer normal k_perp with k . k_perp = 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowerTopology {
    k: Vec<i64>,
    k_perp: Vec<i64>,
    /// True when the supplied winding vector had a common factor removed.
    reduced: bool,
}

impl LowerTopology {
    /// Builds the topology from a winding vector in Z^2, reducing it to a
    /// primitive vector. The normal defaults to (-k_2, k_1); a caller-
    /// supplied normal must be one of the two primitive orthogonal choices.
    pub fn new(k: Vec<i64>, k_perp: Option<Vec<i64>>) -> Result<Self> {
        if k.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "winding vector must live in Z^2, got length {}",
                k.len()
            )));
        }
        if k[0] == 0 && k[1] == 0 {
            return Err(Error::InvalidArgument("winding vector must be non-zero".into()));
        }
        let g = gcd(k[0], k[1]);
        let reduced = g != 1;
        let k = vec![k[0] / g, k[1] / g];
        let default_perp = vec![-k[1], k[0]];
        let k_perp = match k_perp {
            None => default_perp,
            Some(p) => {
                if p.len() != 2 || (p[0] != default_perp[0] || p[1] != default_perp[1])
                    && (p[0] != -default_perp[0] || p[1] != -default_perp[1])
                {
                    return Err(Error::InvalidArgument(format!(
                        "normal {:?} is not a primitive integer vector orthogonal to {:?}",
                        p, k
                    )));
                }
                p
            }
        };
        Ok(LowerTopology {
            k,
            k_perp,
            reduced,
        })
    }

    pub fn k(&self) -> &[i64] {
        &self.k
    }
    pub fn k_perp(&self) -> &[i64] {
        &self.k_perp
    }
    pub fn was_reduced(&self) -> bool {
        self.reduced
    }
    pub fn k_dot_k(&self) -> i64 {
        self.k[0] * self.k[0] + self.k[1] * self.k[1]
    }

    /// l . k: zero exactly on the resonant modes.
    pub fn freq_along(&self, ell: &[i64]) -> i64 {
        ell[0] * self.k[0] + ell[1] * self.k[1]
    }
    pub fn freq_across(&self, ell: &[i64]) -> i64 {
        ell[0] * self.k_perp[0] + ell[1] * self.k_perp[1]
    }

    /// Effective one-dimensional degree of the potential along the torus.
    pub fn effective_degree<T: Scalar>(&self, potential: &Potential<T>) -> i64 {
        potential
            .vhat()
            .keys()
            .map(|m| self.freq_along(m).abs())
            .max()
            .unwrap_or(0)
    }

    /// Constant vector beta * k_perp.
    fn perp_const<T: Scalar>(&self, beta: &T) -> Vec<T> {
        self.k_perp
            .iter()
            .map(|&c| T::from_i64(c) * beta.clone())
            .collect()
    }
}

/// The resonant average phi(beta) = 2 pi sum over l . k = 0 of
/// (k_perp . alpha_l) e^{i beta (l . k_perp)}, which is real for a real
/// potential, together with its derivative.
fn phi_and_derivative<T: Scalar>(
    potential: &Potential<T>,
    topology: &LowerTopology,
    beta: &T,
) -> Result<(T, T)> {
    let two_pi = T::two_pi();
    let mut acc = Cplx::<T>::zero();
    let mut dacc = Cplx::<T>::zero();
    let mut any = false;
    for (ell, alpha) in potential.alpha_modes() {
        if topology.freq_along(ell) != 0 {
            continue;
        }
        any = true;
        let lkp = topology.freq_across(ell);
        let mut ka = Cplx::<T>::zero();
        for (&c, a) in topology.k_perp().iter().zip(&alpha) {
            if c != 0 {
                ka = ka + a.scale(&T::from_i64(c));
            }
        }
        let phase = Cplx::expi(T::from_i64(lkp) * beta.clone());
        let term = ka * phase;
        dacc = dacc + term.clone().mul_i().scale(&T::from_i64(lkp));
        acc = acc + term;
    }
    if !any {
        return Err(Error::DegenerateAverage(
            "no resonant potential modes: the transversal average vanishes identically".into(),
        ));
    }
    let scale_check = acc.abs().to_f64().max(potential.upsilon().to_f64());
    let tol = tolerances::scaled::<T>(tolerances::REALITY_REL_TOL) * scale_check.max(1.0);
    if acc.im.clone().abs().to_f64() > tol || dacc.im.clone().abs().to_f64() > tol * 10.0 {
        return Err(Error::InvalidArgument(
            "resonant average developed a non-real value".into(),
        ));
    }
    Ok((two_pi.clone() * acc.re, two_pi * dacc.re))
}

/// phi(beta) alone.
pub fn resonant_average<T: Scalar>(
    potential: &Potential<T>,
    topology: &LowerTopology,
    beta: &T,
) -> Result<T> {
    phi_and_derivative(potential, topology, beta).map(|(p, _)| p)
}

/// All roots of phi on [0, 2 pi), sorted, refined by bisection to the
/// absolute tolerance used for leading constants. `scan_points` is raised
/// to the internal floor 4 J_phi + 4 where J_phi is the trigonometric
/// degree of phi in beta.
pub fn find_beta0<T: Scalar>(
    potential: &Potential<T>,
    topology: &LowerTopology,
    scan_points: usize,
) -> Result<Vec<T>> {
    let j_phi = potential
        .vhat()
        .keys()
        .filter(|m| topology.freq_along(m) == 0)
        .map(|m| topology.freq_across(m).abs())
        .max()
        .unwrap_or(0);
    if j_phi == 0 {
        return Err(Error::DegenerateAverage(
            "no resonant potential modes: the transversal average vanishes identically".into(),
        ));
    }
    let m = scan_points.max((4 * j_phi + 4) as usize);
    let two_pi = T::two_pi();
    let phi = |b: &T| -> Result<T> { resonant_average(potential, topology, b) };

    let grid: Vec<T> = (0..=m)
        .map(|j| two_pi.clone() * T::from_i64(j as i64) / T::from_i64(m as i64))
        .collect();
    let vals: Vec<T> = grid.iter().map(&phi).collect::<Result<_>>()?;

    let mut roots: Vec<T> = Vec::new();
    let tol = tolerances::BETA0_ROOT_TOL;
    for j in 0..m {
        let (a, fa) = (grid[j].clone(), vals[j].clone());
        let (b, fb) = (grid[j + 1].clone(), vals[j + 1].clone());
        if fa.is_zero() {
            push_root(&mut roots, a, &two_pi);
            continue;
        }
        if (fa.clone() < T::zero()) == (fb.clone() < T::zero()) || fb.is_zero() {
            // No sign change in the open interval (b's zero is claimed by
            // the next interval's left endpoint).
            continue;
        }
        let (mut lo, mut hi, mut flo) = (a, b, fa);
        while (hi.clone() - lo.clone()).abs().to_f64() > tol {
            let mid = (lo.clone() + hi.clone()) / T::from_i64(2);
            let fm = phi(&mid)?;
            if fm.is_zero() {
                lo = mid.clone();
                hi = mid;
                break;
            }
            if (fm.clone() < T::zero()) == (flo.clone() < T::zero()) {
                lo = mid.clone();
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let root = (lo + hi) / T::from_i64(2);
        push_root(&mut roots, root, &two_pi);
    }
    if roots.is_empty() {
        return Err(Error::DegenerateAverage(
            "the transversal average has no roots on the scan grid".into(),
        ));
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(roots)
}

fn push_root<T: Scalar>(roots: &mut Vec<T>, root: T, two_pi: &T) {
    // Fold to [0, 2 pi) and drop duplicates within twice the bisection
    // tolerance (including across the wrap).
    let mut r = root;
    if r.clone() >= two_pi.clone() {
        r = r - two_pi.clone();
    }
    if r.clone() < T::zero() {
        r = r + two_pi.clone();
    }
    let dup_tol = 4.0 * tolerances::BETA0_ROOT_TOL;
    for existing in roots.iter() {
        let d = (existing.clone() - r.clone()).abs().to_f64();
        let wrapped = two_pi.clone().to_f64() - d;
        if d < dup_tol || wrapped < dup_tol {
            return;
        }
    }
    roots.push(r);
}

/// phi'(beta0); errors when the torus is degenerate at this leading
/// constant.
pub fn nondegeneracy_constant<T: Scalar>(
    potential: &Potential<T>,
    topology: &LowerTopology,
    beta0: &T,
) -> Result<T> {
    let (_, c) = phi_and_derivative(potential, topology, beta0)?;
    let tol = tolerances::scaled::<T>(tolerances::NONDEG_FACTOR) * potential.upsilon().to_f64();
    if c.clone().abs().to_f64() < tol {
        return Err(Error::NondegeneracyFailure(format!(
            "|phi'(beta0)| = {:.3e} below tolerance {:.3e}",
            c.to_f64(),
            tol
        )));
    }
    Ok(c)
}

/// Problem data for one lower-dimensional torus.
#[derive(Clone, Debug)]
pub struct LowerModel<T: Scalar> {
    pub potential: Potential<T>,
    pub freq: Frequency<T>,
    pub topology: LowerTopology,
    pub gamma: T,
    pub beta0: T,
    pub order: usize,
}

impl<T: Scalar> LowerModel<T> {
    pub fn new(
        potential: Potential<T>,
        freq: Frequency<T>,
        topology: LowerTopology,
        gamma: T,
        beta0: T,
        order: usize,
    ) -> Result<Self> {
        if potential.dim() != 2 {
            return Err(Error::DimensionMismatch(
                "lower-dimensional tori require a two-dimensional potential".into(),
            ));
        }
        if freq.dim() != 1 {
            return Err(Error::DimensionMismatch(
                "lower-dimensional tori rotate with a single frequency".into(),
            ));
        }
        Ok(LowerModel {
            potential,
            freq,
            topology,
            gamma,
            beta0,
            order,
        })
    }
}

/// The computed series: corrections g_n, drifts mu_n, leading constants
/// beta_n, and per-order telemetry.
#[derive(Clone, Debug)]
pub struct LowerExpansion<T: Scalar> {
    pub g: Vec<TrigPoly<T>>,
    pub mu: Vec<Vec<T>>,
    /// beta_n for n = 0..=N; the last one is left free at zero.
    pub beta: Vec<T>,
    pub chosen_beta0: T,
    pub nondeg_constant: T,
    pub solves: Vec<SolveStats>,
    /// |k . average(R_n)| relative to the flat norm of R_n, per order
    /// (before the drift absorbs it); the conservative case requires these
    /// to be negligible.
    pub k_average_rel: Vec<f64>,
    pub warnings: Vec<String>,
    caches: Vec<ExpCache<T>>,
}

impl<T: Scalar> LowerExpansion<T> {
    pub fn order(&self) -> usize {
        self.g.len() - 1
    }

    /// Truncated series G_eps = sum_{n <= n_trunc} eps^n g_n.
    pub fn g_partial(&self, n_trunc: usize, eps: &T) -> Result<TrigPoly<T>> {
        if n_trunc >= self.g.len() {
            return Err(Error::MissingOrder(n_trunc));
        }
        let mut pow = T::one();
        let mut terms: Vec<(Cplx<T>, &TrigPoly<T>)> = Vec::new();
        for gn in self.g.iter().take(n_trunc + 1) {
            terms.push((Cplx::from_re(pow.clone()), gn));
            pow = pow * eps.clone();
        }
        TrigPoly::linear_combine(&terms)
    }

    pub fn mu_partial(&self, n_trunc: usize, eps: &T) -> Result<Vec<T>> {
        if n_trunc >= self.mu.len() {
            return Err(Error::MissingOrder(n_trunc));
        }
        let mut acc = vec![T::zero(); 2];
        let mut pow = T::one();
        for mun in self.mu.iter().take(n_trunc + 1) {
            for (a, m) in acc.iter_mut().zip(mun) {
                *a = a.clone() + pow.clone() * m.clone();
            }
            pow = pow * eps.clone();
        }
        Ok(acc)
    }

    /// Expansion for the rescaled problem: order-n coefficients, drift,
    /// free constants, and layer caches are multiplied by eta^n. The
    /// nondegeneracy constant is linear in the potential, so it picks up
    /// one factor of eta; the chosen root is order zero and is unchanged.
    /// Relative telemetry (solve stats, k-average ratios) carries over:
    /// both sides of those ratios rescale identically.
    pub fn scaled(&self, eta: &T) -> Self {
        let mut pow = T::one();
        let mut g = Vec::with_capacity(self.g.len());
        let mut mu = Vec::with_capacity(self.mu.len());
        let mut beta = Vec::with_capacity(self.beta.len());
        for n in 0..self.g.len() {
            if n > 0 {
                pow = pow.clone() * eta.clone();
            }
            g.push(self.g[n].scale(&pow));
            mu.push(
                self.mu[n]
                    .iter()
                    .map(|m| m.clone() * pow.clone())
                    .collect(),
            );
            beta.push(self.beta[n].clone() * pow.clone());
        }
        LowerExpansion {
            g,
            mu,
            beta,
            chosen_beta0: self.chosen_beta0.clone(),
            nondeg_constant: self.nondeg_constant.clone() * eta.clone(),
            solves: self.solves.clone(),
            k_average_rel: self.k_average_rel.clone(),
            warnings: self.warnings.clone(),
            caches: self.caches.iter().map(|c| c.scaled(eta)).collect(),
        }
    }
}

/// Runs the lower-tori expansion to the model's order.
pub fn expand_lower<T: Scalar>(model: &LowerModel<T>) -> Result<LowerExpansion<T>> {
    let c = nondegeneracy_constant(&model.potential, &model.topology, &model.beta0)?;
    let slope = c.clone() / T::two_pi();

    let g0_vec = model.topology.perp_const(&model.beta0);
    let g0_coeffs: Vec<Cplx<T>> = g0_vec.iter().map(|v| Cplx::from_re(v.clone())).collect();
    let caches: Vec<ExpCache<T>> = model
        .potential
        .vhat()
        .keys()
        .map(|ell| ExpCache::init_lower(ell.clone(), model.topology.k(), &g0_vec))
        .collect::<Result<_>>()?;

    let mut ex = LowerExpansion {
        g: vec![TrigPoly::constant(1, g0_coeffs)],
        mu: vec![vec![T::zero(); 2]],
        beta: vec![model.beta0.clone()],
        chosen_beta0: model.beta0.clone(),
        nondeg_constant: c,
        solves: Vec::new(),
        k_average_rel: Vec::new(),
        warnings: Vec::new(),
        caches,
    };
    if model.topology.was_reduced() {
        ex.warnings
            .push("winding vector had a common factor removed".into());
    }

    for n in 1..=model.order {
        step_lower(model, &mut ex, n, &slope)?;
    }
    // The top-order constant is never determined by solvability; it is left
    // at zero, which also pins the exact normalization k . mean(g_N) = 0.
    ex.beta.push(T::zero());
    Ok(ex)
}

fn step_lower<T: Scalar>(
    model: &LowerModel<T>,
    ex: &mut LowerExpansion<T>,
    n: usize,
    slope: &T,
) -> Result<()> {
    let kperp = model.topology.k_perp();

    if n >= 2 {
        // Fix beta_{n-1}: the transversal average of this order's equation
        // is exactly affine in the constant part of g_{n-1}, with slope
        // phi'(beta_0)/(2 pi) for every order.
        let g_prev = ex.g[n - 1].clone();
        let mut a0 = Cplx::<T>::zero();
        for cache in &ex.caches {
            let layer = cache.peek(&g_prev)?;
            let avg = layer.average()[0].clone();
            if avg.is_zero() {
                continue;
            }
            let alpha = model.potential.alpha(cache.mode());
            for (&c, a) in kperp.iter().zip(&alpha) {
                if c != 0 {
                    a0 = a0 + (a.clone() * avg.clone()).scale(&T::from_i64(c));
                }
            }
        }
        let beta = -(a0.re.clone() / slope.clone());
        let correction: Vec<Cplx<T>> = model
            .topology
            .perp_const(&beta)
            .into_iter()
            .map(Cplx::from_re)
            .collect();
        ex.g[n - 1].add_constant(&correction);
        ex.beta.push(beta);

        let committed = ex.g[n - 1].clone();
        for cache in &mut ex.caches {
            cache.advance(&committed)?;
        }
    }

    // Assemble R_n = [V'(h)]_{n-1} - gamma (g_{n-3} - g_{n-3}(. - omega))
    //              - gamma omega k [n = 3].
    let mut rhs = TrigPoly::zero(1, 2);
    for cache in &ex.caches {
        let alpha = model.potential.alpha(cache.mode());
        let term = outer(cache.layer(n - 1)?, &alpha)?;
        for (mode, vals) in term.iter() {
            rhs.insert_term(mode.clone(), vals.clone());
        }
    }
    let mut rhs = rhs.into_real_checked(tolerances::scaled::<T>(tolerances::REALITY_REL_TOL))?;

    if !model.gamma.is_zero() {
        if n >= 4 {
            let gn3 = &ex.g[n - 3];
            let shifted = gn3.shift(&model.freq.neg_omega())?;
            rhs = TrigPoly::linear_combine(&[
                (Cplx::one(), &rhs),
                (Cplx::from_re(-model.gamma.clone()), gn3),
                (Cplx::from_re(model.gamma.clone()), &shifted),
            ])?;
        }
        if n == 3 {
            let w = model.freq.omega()[0].clone();
            let gw: Vec<Cplx<T>> = model
                .topology
                .k()
                .iter()
                .map(|&c| Cplx::from_re(-(model.gamma.clone() * w.clone() * T::from_i64(c))))
                .collect();
            rhs.add_constant(&gw);
        }
    }

    // Split the average along k and k_perp.
    let avg = rhs.average();
    let mut k_avg = T::zero();
    for (&c, a) in model.topology.k().iter().zip(&avg) {
        if c != 0 {
            k_avg = k_avg + T::from_i64(c) * a.re.clone();
        }
    }
    let flat = NormParams::<T>::flat();
    let scale = rhs.norm(&flat)?.to_f64().max(f64::MIN_POSITIVE);
    ex.k_average_rel.push(k_avg.clone().abs().to_f64() / scale);

    let mu_n: Vec<T> = if model.gamma.is_zero() {
        let tol = tolerances::scaled::<T>(tolerances::K_AVERAGE_REL_TOL);
        if k_avg.clone().abs().to_f64() > tol * scale {
            return Err(Error::NonZeroAverage {
                avg: k_avg.abs().to_f64(),
                tol: tol * scale,
            });
        }
        vec![T::zero(); 2]
    } else {
        let factor = -(k_avg / T::from_i64(model.topology.k_dot_k()));
        model
            .topology
            .k()
            .iter()
            .map(|&c| factor.clone() * T::from_i64(c))
            .collect()
    };
    let mu_c: Vec<Cplx<T>> = mu_n.iter().map(|m| Cplx::from_re(m.clone())).collect();
    rhs.add_constant(&mu_c);

    // What remains of the mean must sit inside the solver's zero tolerance:
    // along k it was just absorbed (or checked), across k it is controlled
    // by the previous order's beta (or by the beta_0 root at n = 1).
    let report = solve_zero_average(&rhs, &model.freq, None)?;
    ex.solves.push(SolveStats {
        order: n,
        modes_solved: report.modes_solved,
        max_inv_multiplier: report.max_inv_multiplier,
        near_resonant: report.near_resonant.len(),
        lemma_violations: report.lemma_violations,
        certificate_violations: report.certificate_violations,
    });
    ex.g.push(report.solution);
    ex.mu.push(mu_n);
    Ok(())
}

/// Residual of the truncated lower-torus series, in the rho = 0 norm with
/// the Sobolev weight from `norm_params`, for each eps.
pub fn residual_lower<T: Scalar>(
    model: &LowerModel<T>,
    expansion: &LowerExpansion<T>,
    n_trunc: usize,
    eps_list: &[T],
    norm_params: &NormParams<T>,
) -> Result<Vec<ResidualPoint<T>>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty eps list".into()));
    }
    let np = NormParams::new(T::zero(), norm_params.r().clone())?;
    let j_eff = model.topology.effective_degree(&model.potential);
    let mpts = residual_grid_size(n_trunc, j_eff);
    let band = (mpts as i64 - 1) / 2;
    let grid = uniform_grid_1d::<T>(mpts);
    let kvec: Vec<T> = model
        .topology
        .k()
        .iter()
        .map(|&c| T::from_i64(c))
        .collect();
    let mut out = Vec::with_capacity(eps_list.len());

    for eps in eps_list {
        let g_eps = expansion.g_partial(n_trunc, eps)?;
        let m_eps = expansion.mu_partial(n_trunc, eps)?;
        let g3 = model.gamma.clone() * eps.clone() * eps.clone() * eps.clone();

        let mut poly = apply_multiplier(&g_eps, &model.freq)?;
        if !model.gamma.is_zero() {
            let shifted = g_eps.shift(&model.freq.neg_omega())?;
            poly = TrigPoly::linear_combine(&[
                (Cplx::one(), &poly),
                (Cplx::from_re(g3.clone()), &g_eps),
                (Cplx::from_re(-g3.clone()), &shifted),
            ])?;
        }
        let w = model.freq.omega()[0].clone();
        let consts: Vec<Cplx<T>> = m_eps
            .iter()
            .zip(&kvec)
            .map(|(m, kc)| {
                let mut v = -m.clone();
                if !model.gamma.is_zero() {
                    v = v + g3.clone() * w.clone() * kc.clone();
                }
                Cplx::from_re(v)
            })
            .collect();
        poly.add_constant(&consts);

        let mut samples = Vec::with_capacity(mpts);
        for theta in &grid {
            let g_val = g_eps.evaluate_real(std::slice::from_ref(theta))?;
            let q: Vec<T> = kvec
                .iter()
                .zip(&g_val)
                .map(|(kc, gv)| kc.clone() * theta.clone() + gv.clone())
                .collect();
            let vp = model.potential.vprime_at(&q)?;
            let p_val = poly.evaluate(std::slice::from_ref(theta))?;
            let row: Vec<Cplx<T>> = p_val
                .into_iter()
                .zip(&vp)
                .map(|(pv, v)| pv - Cplx::from_re(eps.clone() * v.clone()))
                .collect();
            samples.push(row);
        }
        let projected = dft_project_1d(&samples, band);
        out.push(ResidualPoint {
            eps: eps.clone(),
            norm: projected.norm(&np)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::PotentialTerm;

    /// V = cos q1 + cos q2 + a cos(q1 + q2): with k = (1, 0) the resonant
    /// modes are (0, +-1), the coupling mode stays non-resonant.
    fn worked_potential(a: f64) -> Potential<f64> {
        Potential::from_terms(
            2,
            &[
                PotentialTerm {
                    mode: vec![1, 0],
                    cos_amp: 1.0,
                    sin_amp: 0.0,
                },
                PotentialTerm {
                    mode: vec![0, 1],
                    cos_amp: 1.0,
                    sin_amp: 0.0,
                },
                PotentialTerm {
                    mode: vec![1, 1],
                    cos_amp: a,
                    sin_amp: 0.0,
                },
            ],
        )
        .unwrap()
    }

    fn k10() -> LowerTopology {
        LowerTopology::new(vec![1, 0], None).unwrap()
    }

    #[test]
    fn topology_reduces_and_validates() {
        let t = LowerTopology::new(vec![2, 4], None).unwrap();
        assert_eq!(t.k(), &[1, 2]);
        assert_eq!(t.k_perp(), &[-2, 1]);
        assert!(t.was_reduced());
        assert!(LowerTopology::new(vec![1, 1], Some(vec![1, 1])).is_err());
        assert!(LowerTopology::new(vec![1, 1], Some(vec![1, -1])).is_ok());
        assert!(LowerTopology::new(vec![0, 0], None).is_err());
    }

    #[test]
    fn resonant_average_closed_form() {
        // With V as above and k = (1,0): phi(beta) = -2 pi sin(beta).
        let pot = worked_potential(1.0);
        let t = k10();
        for j in 0..8 {
            let beta = 0.7 * j as f64;
            let phi = resonant_average(&pot, &t, &beta).unwrap();
            let expected = -2.0 * std::f64::consts::PI * beta.sin();
            assert!((phi - expected).abs() < 1e-12, "beta = {beta}");
        }
    }

    #[test]
    fn beta0_roots_are_zero_and_pi() {
        let pot = worked_potential(1.0);
        let roots = find_beta0(&pot, &k10(), 16).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots[0].abs() < 1e-12);
        assert!((roots[1] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn nondegeneracy_constants_at_both_branches() {
        let pot = worked_potential(1.0);
        let t = k10();
        let c0 = nondegeneracy_constant(&pot, &t, &0.0).unwrap();
        let cpi = nondegeneracy_constant(&pot, &t, &std::f64::consts::PI).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!((c0 + two_pi).abs() < 1e-12);
        assert!((cpi - two_pi).abs() < 1e-12);
    }

    #[test]
    fn degenerate_average_is_detected() {
        // V = cos q1 has no resonant modes for k = (1, 0).
        let pot = Potential::from_terms(
            2,
            &[PotentialTerm {
                mode: vec![1, 0],
                cos_amp: 1.0,
                sin_amp: 0.0,
            }],
        )
        .unwrap();
        assert!(matches!(
            find_beta0(&pot, &k10(), 16),
            Err(crate::Error::DegenerateAverage(_))
        ));
    }

    #[test]
    fn conservative_expansion_normalizations() {
        let model = LowerModel::new(
            worked_potential(1.0),
            Frequency::golden(),
            k10(),
            0.0,
            0.0,
            8,
        )
        .unwrap();
        let ex = expand_lower(&model).unwrap();
        assert_eq!(ex.order(), 8);
        assert_eq!(ex.beta.len(), 9);
        for n in 0..=8 {
            // Drift stays identically zero.
            assert_eq!(ex.mu[n], vec![0.0, 0.0]);
            // Exact normalization: k . mean(g_n) = 0 bitwise.
            let mean = ex.g[n].average();
            let kdot = mean[0].re; // k = (1, 0)
            assert_eq!(kdot, 0.0, "k-mean at order {n}");
        }
        for rel in &ex.k_average_rel {
            assert!(*rel <= 1e-10);
        }
        // Degree law with the effective degree J_k = max |l . k| = 1.
        for (n, gn) in ex.g.iter().enumerate() {
            assert!(gn.degree() <= n as i64, "degree law at order {n}");
        }
    }

    #[test]
    fn dissipative_drift_is_parallel_to_k() {
        let gamma = 0.1;
        let model = LowerModel::new(
            worked_potential(1.0),
            Frequency::golden(),
            k10(),
            gamma,
            0.0,
            6,
        )
        .unwrap();
        let ex = expand_lower(&model).unwrap();
        let omega = model.freq.omega()[0];
        for n in 0..=6 {
            // k = (1, 0): the second drift component must vanish exactly.
            assert_eq!(ex.mu[n][1], 0.0, "drift not parallel to k at order {n}");
        }
        // The order-three drift is gamma omega k up to the (small)
        // nonlinear average it also absorbs.
        assert!((ex.mu[3][0] - gamma * omega).abs() < 0.5 * (gamma * omega).abs());
    }

    #[test]
    fn branches_differ_with_coupling() {
        // With the coupling mode present the two leading branches give
        // different first-order corrections.
        let pot = worked_potential(1.0);
        let freq = Frequency::golden();
        let mk = |beta0: f64| {
            let model =
                LowerModel::new(pot.clone(), freq.clone(), k10(), 0.0, beta0, 1).unwrap();
            expand_lower(&model).unwrap()
        };
        let e0 = mk(0.0);
        let epi = mk(std::f64::consts::PI);
        let diff = TrigPoly::linear_combine(&[
            (Cplx::one(), &e0.g[1]),
            (Cplx::from_re(-1.0), &epi.g[1]),
        ])
        .unwrap();
        let np = NormParams::flat();
        assert!(diff.norm(&np).unwrap() > 1e-3);
    }

    #[test]
    fn lower_residual_scales_at_truncation_order() {
        let model = LowerModel::new(
            worked_potential(1.0),
            Frequency::golden(),
            k10(),
            0.0,
            0.0,
            4,
        )
        .unwrap();
        let ex = expand_lower(&model).unwrap();
        let np = NormParams::new(0.0, 1.0).unwrap();
        let eps = [1e-2, 3e-3, 1e-3];
        let pts = residual_lower(&model, &ex, 2, &eps, &np).unwrap();
        let slope = (pts[0].norm.ln() - pts[2].norm.ln()) / (eps[0].ln() - eps[2].ln());
        assert!(
            (slope - 3.0).abs() < 0.15,
            "slope {slope} should be close to 3"
        );
    }

    #[test]
    fn beta_series_is_finite_and_committed() {
        let model = LowerModel::new(
            worked_potential(1.0),
            Frequency::golden(),
            k10(),
            0.1,
            0.0,
            5,
        )
        .unwrap();
        let ex = expand_lower(&model).unwrap();
        // beta_0..beta_5 stored, the last left at zero.
        assert_eq!(ex.beta.len(), 6);
        assert_eq!(*ex.beta.last().unwrap(), 0.0);
        for b in &ex.beta {
            assert!(b.is_finite());
        }
    }
}
