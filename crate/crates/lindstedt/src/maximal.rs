//! Order-by-order construction of maximal invariant tori with drift for the
//! dissipative standard-like family, and the a-posteriori residual of the
//! truncated series.
//!
//! The invariance equation for the periodic hull correction u and the drift
//! mu reads, as formal series in eps,
//!
//!   L[u] - eps V'(theta + u) - mu
//!        + gamma eps^3 (u(theta) - u(theta - omega) + omega) = 0,
//!
//! where L is the second difference along the rotation. Order n gives
//!
//!   L[u_n] = [V'(theta + u)]_{n-1} + mu_n
//!            - gamma (u_{n-3}(theta) - u_{n-3}(theta - omega))
//!            - gamma omega [n = 3],
//!
//! and mu_n is fixed by the zero-average solvability condition. Averages of
//! shift differences vanish identically, so the drift picks up exactly
//! gamma omega at order three plus whatever mean the nonlinearity develops.

use crate::cohomology::{apply_multiplier, solve_zero_average, Frequency};
use crate::error::{Error, Result};
use crate::exprec::ExpCache;
use crate::fourier::{dft_project_1d, outer, uniform_grid_1d, NormParams, Potential, TrigPoly};
use crate::scalar::{Cplx, Scalar};
use crate::tolerances;

/// Problem data for a maximal torus with drift.
#[derive(Clone, Debug)]
pub struct MaximalModel<T: Scalar> {
    pub potential: Potential<T>,
    pub freq: Frequency<T>,
    pub gamma: T,
    /// Number of orders to compute (the expansion holds u_0..u_N).
    pub order: usize,
}

impl<T: Scalar> MaximalModel<T> {
    pub fn new(
        potential: Potential<T>,
        freq: Frequency<T>,
        gamma: T,
        order: usize,
    ) -> Result<Self> {
        if potential.dim() != freq.dim() {
            return Err(Error::DimensionMismatch(format!(
                "potential dimension {} vs frequency dimension {}",
                potential.dim(),
                freq.dim()
            )));
        }
        Ok(MaximalModel {
            potential,
            freq,
            gamma,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }
}

/// Telemetry of one cohomology solve inside an expansion.
#[derive(Clone, Debug)]
pub struct SolveStats {
    pub order: usize,
    pub modes_solved: usize,
    pub max_inv_multiplier: f64,
    pub near_resonant: usize,
    pub lemma_violations: Vec<Vec<i64>>,
    pub certificate_violations: Vec<Vec<i64>>,
}

/// The computed series u_n (periodic corrections) and mu_n (drift).
#[derive(Clone, Debug)]
pub struct MaximalExpansion<T: Scalar> {
    pub u: Vec<TrigPoly<T>>,
    pub mu: Vec<Vec<T>>,
    pub solves: Vec<SolveStats>,
    pub warnings: Vec<String>,
    caches: Vec<ExpCache<T>>,
}

impl<T: Scalar> MaximalExpansion<T> {
    /// Order-zero state: u_0 = 0, mu_0 = 0.
    pub fn initial(model: &MaximalModel<T>) -> Self {
        let d = model.dim();
        let caches = model
            .potential
            .vhat()
            .keys()
            .map(|ell| ExpCache::init_maximal(ell.clone()))
            .collect();
        let mut warnings = Vec::new();
        if model.gamma.is_zero() {
            warnings.push(
                "conservative maximal run: gamma = 0, drift stays identically zero".to_string(),
            );
        }
        MaximalExpansion {
            u: vec![TrigPoly::zero(d, d)],
            mu: vec![vec![T::zero(); d]],
            solves: Vec::new(),
            warnings,
            caches,
        }
    }

    /// Highest computed order.
    pub fn order(&self) -> usize {
        self.u.len() - 1
    }

    /// Computes u_n and mu_n for the next order n.
    pub fn step(&mut self, model: &MaximalModel<T>) -> Result<()> {
        let n = self.u.len();
        let d = model.dim();

        // The exponential layers at n-1 need u_{n-1} committed.
        if n >= 2 {
            let last = self.u[n - 1].clone();
            for cache in &mut self.caches {
                cache.advance(&last)?;
            }
        }

        // Nonlinearity [V'(theta + u)]_{n-1} = sum_l alpha_l E^l_{n-1}.
        let mut rhs = TrigPoly::zero(d, d);
        for cache in &self.caches {
            let alpha = model.potential.alpha(cache.mode());
            let term = outer(cache.layer(n - 1)?, &alpha)?;
            for (mode, vals) in term.iter() {
                rhs.insert_term(mode.clone(), vals.clone());
            }
        }
        let mut rhs =
            rhs.into_real_checked(tolerances::scaled::<T>(tolerances::REALITY_REL_TOL))?;

        // Dissipative terms.
        if !model.gamma.is_zero() {
            if n >= 4 {
                let un3 = &self.u[n - 3];
                let shifted = un3.shift(&model.freq.neg_omega())?;
                rhs = TrigPoly::linear_combine(&[
                    (Cplx::one(), &rhs),
                    (Cplx::from_re(-model.gamma.clone()), un3),
                    (Cplx::from_re(model.gamma.clone()), &shifted),
                ])?;
            }
            if n == 3 {
                let gw: Vec<Cplx<T>> = model
                    .freq
                    .omega()
                    .iter()
                    .map(|w| Cplx::from_re(-(model.gamma.clone() * w.clone())))
                    .collect();
                rhs.add_constant(&gw);
            }
        }

        // Solvability: mu_n cancels the mean exactly.
        let avg = rhs.average();
        let mu_n: Vec<T> = avg.iter().map(|a| -a.re.clone()).collect();
        let minus_avg: Vec<Cplx<T>> = avg.iter().map(|a| -a.clone()).collect();
        rhs.add_constant(&minus_avg);

        let report = solve_zero_average(&rhs, &model.freq, None)?;
        self.solves.push(SolveStats {
            order: n,
            modes_solved: report.modes_solved,
            max_inv_multiplier: report.max_inv_multiplier,
            near_resonant: report.near_resonant.len(),
            lemma_violations: report.lemma_violations,
            certificate_violations: report.certificate_violations,
        });
        self.u.push(report.solution);
        self.mu.push(mu_n);
        Ok(())
    }

    /// Truncated series U_eps = sum_{n <= n_trunc} eps^n u_n.
    pub fn u_partial(&self, n_trunc: usize, eps: &T) -> Result<TrigPoly<T>> {
        if n_trunc >= self.u.len() {
            return Err(Error::MissingOrder(n_trunc));
        }
        let mut pow = T::one();
        let mut terms: Vec<(Cplx<T>, &TrigPoly<T>)> = Vec::new();
        for un in self.u.iter().take(n_trunc + 1) {
            terms.push((Cplx::from_re(pow.clone()), un));
            pow = pow * eps.clone();
        }
        TrigPoly::linear_combine(&terms)
    }

    /// Truncated drift M_eps = sum_{n <= n_trunc} eps^n mu_n.
    pub fn mu_partial(&self, n_trunc: usize, eps: &T) -> Result<Vec<T>> {
        if n_trunc >= self.mu.len() {
            return Err(Error::MissingOrder(n_trunc));
        }
        let d = self.mu[0].len();
        let mut acc = vec![T::zero(); d];
        let mut pow = T::one();
        for mun in self.mu.iter().take(n_trunc + 1) {
            for (a, m) in acc.iter_mut().zip(mun) {
                *a = a.clone() + pow.clone() * m.clone();
            }
            pow = pow * eps.clone();
        }
        Ok(acc)
    }

    /// Expansion for the rescaled problem: every order-n object is
    /// multiplied by eta^n (coefficients, drift, and the layer caches,
    /// whose recursion is homogeneous of the same degree). Solve
    /// telemetry is carried over unchanged; it describes the original
    /// run, and rescaling does not touch the small divisors.
    pub fn scaled(&self, eta: &T) -> Self {
        let mut pow = T::one();
        let mut u = Vec::with_capacity(self.u.len());
        let mut mu = Vec::with_capacity(self.mu.len());
        for n in 0..self.u.len() {
            if n > 0 {
                pow = pow.clone() * eta.clone();
            }
            u.push(self.u[n].scale(&pow));
            mu.push(
                self.mu[n]
                    .iter()
                    .map(|m| m.clone() * pow.clone())
                    .collect(),
            );
        }
        MaximalExpansion {
            u,
            mu,
            solves: self.solves.clone(),
            warnings: self.warnings.clone(),
            caches: self.caches.iter().map(|c| c.scaled(eta)).collect(),
        }
    }
}

/// Runs the expansion to the model's order.
pub fn expand<T: Scalar>(model: &MaximalModel<T>) -> Result<MaximalExpansion<T>> {
    let mut ex = MaximalExpansion::initial(model);
    for _ in 0..model.order {
        ex.step(model)?;
    }
    Ok(ex)
}

/// One evaluated residual point.
#[derive(Clone, Debug)]
pub struct ResidualPoint<T: Scalar> {
    pub eps: T,
    pub norm: T,
}

/// Dealiasing grid size: the smallest odd M with
/// M >= 6 (n_trunc + 1) J + 11, so that the surveyed band holds every mode
/// the truncated residual can populate with non-negligible mass.
pub fn residual_grid_size(n_trunc: usize, degree_j: i64) -> usize {
    let base = 6 * (n_trunc as i64 + 1) * degree_j.max(1) + 11;
    let m = base as usize;
    if m % 2 == 0 {
        m + 1
    } else {
        m
    }
}

/// Evaluates the invariance-equation residual of the truncated series at
/// each eps, in the rho = 0 norm with the Sobolev weight from `norm_params`.
///
/// The polynomial part is assembled exactly in coefficient space; the
/// composition V'(theta + U) is sampled pointwise on a dealiased grid and
/// projected back by a direct discrete Fourier transform.
pub fn residual<T: Scalar>(
    model: &MaximalModel<T>,
    expansion: &MaximalExpansion<T>,
    n_trunc: usize,
    eps_list: &[T],
    norm_params: &NormParams<T>,
) -> Result<Vec<ResidualPoint<T>>> {
    if model.dim() != 1 {
        return Err(Error::Unsupported(
            "residual evaluation is implemented for one-dimensional tori".into(),
        ));
    }
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty eps list".into()));
    }
    let np = NormParams::new(T::zero(), norm_params.r().clone())?;
    let mpts = residual_grid_size(n_trunc, model.potential.degree_j());
    let band = (mpts as i64 - 1) / 2;
    let grid = uniform_grid_1d::<T>(mpts);
    let mut out = Vec::with_capacity(eps_list.len());

    for eps in eps_list {
        let u_eps = expansion.u_partial(n_trunc, eps)?;
        let m_eps = expansion.mu_partial(n_trunc, eps)?;
        let g3 = model.gamma.clone() * eps.clone() * eps.clone() * eps.clone();

        // Exact polynomial part: L[U] - M + gamma eps^3 (U - U(.-omega) + omega).
        let mut poly = apply_multiplier(&u_eps, &model.freq)?;
        if !model.gamma.is_zero() {
            let shifted = u_eps.shift(&model.freq.neg_omega())?;
            poly = TrigPoly::linear_combine(&[
                (Cplx::one(), &poly),
                (Cplx::from_re(g3.clone()), &u_eps),
                (Cplx::from_re(-g3.clone()), &shifted),
            ])?;
        }
        let mut consts: Vec<Cplx<T>> = m_eps.iter().map(|m| Cplx::from_re(-m.clone())).collect();
        if !model.gamma.is_zero() {
            for (c, w) in consts.iter_mut().zip(model.freq.omega()) {
                *c = c.clone() + Cplx::from_re(g3.clone() * w.clone());
            }
        }
        poly.add_constant(&consts);

        // Pointwise total residual, then projection onto the surveyed band.
        let mut samples = Vec::with_capacity(mpts);
        for theta in &grid {
            let u_val = u_eps.evaluate_real(std::slice::from_ref(theta))?;
            let q: Vec<T> = vec![theta.clone() + u_val[0].clone()];
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
