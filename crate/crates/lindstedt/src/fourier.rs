//! Vector-valued trigonometric polynomials with sparse coefficient storage,
//! the weighted analytic/Sobolev norms, and the potential type that derives
//! its own gradient.
//!
//! Frequencies live in Z^L and are measured in the 1-norm; coefficients are
//! complex D-vectors. Real-valued polynomials keep both l and -l stored and
//! are re-symmetrized after any operation whose floating-point summation
//! order could break exact conjugacy.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Scalar};
use crate::tolerances;

/// Frequency index into Z^L.
pub type Mode = Vec<i64>;

/// 1-norm of a frequency vector.
pub fn mode_abs(ell: &[i64]) -> i64 {
    ell.iter().map(|x| x.abs()).sum()
}

fn is_zero_mode(ell: &[i64]) -> bool {
    ell.iter().all(|&x| x == 0)
}

fn neg_mode(ell: &[i64]) -> Mode {
    ell.iter().map(|&x| -x).collect()
}

/// Weighted-norm parameters: analyticity width `rho` and Sobolev weight `r`.
#[derive(Clone, Debug)]
pub struct NormParams<T: Scalar> {
    rho: T,
    r: T,
}

impl<T: Scalar> NormParams<T> {
    pub fn new(rho: T, r: T) -> Result<Self> {
        if rho < T::zero() || r < T::zero() {
            return Err(Error::InvalidArgument(
                "norm parameters require rho >= 0 and r >= 0".into(),
            ));
        }
        Ok(NormParams { rho, r })
    }
    pub fn flat() -> Self {
        NormParams {
            rho: T::zero(),
            r: T::zero(),
        }
    }
    pub fn rho(&self) -> &T {
        &self.rho
    }
    pub fn r(&self) -> &T {
        &self.r
    }
    /// Weight e^{2|l| rho} (1+|l|^2)^r applied to |coefficient|^2.
    pub fn weight_sq(&self, ell_abs: i64) -> T {
        let mut w = T::one();
        if !self.rho.is_zero() {
            w = (T::from_i64(2 * ell_abs) * self.rho.clone()).exp();
        }
        if !self.r.is_zero() {
            let base = T::from_i64(1 + ell_abs * ell_abs);
            w = w * base.powf(&self.r);
        }
        w
    }
}

/// Finitely supported Fourier series from the L-torus to complex D-vectors.
#[derive(Clone, Debug)]
pub struct TrigPoly<T: Scalar> {
    dom: usize,
    range: usize,
    real: bool,
    coeffs: BTreeMap<Mode, Vec<Cplx<T>>>,
}

impl<T: Scalar> TrigPoly<T> {
    pub fn zero(dom: usize, range: usize) -> Self {
        assert!(dom >= 1 && range >= 1, "dimensions must be positive");
        TrigPoly {
            dom,
            range,
            real: true,
            coeffs: BTreeMap::new(),
        }
    }

    /// Constant polynomial with the given value vector.
    pub fn constant(dom: usize, values: Vec<Cplx<T>>) -> Self {
        let range = values.len();
        let mut p = TrigPoly::zero(dom, range);
        let real = values.iter().all(|v| v.im.is_zero());
        p.insert_term(vec![0; dom], values);
        p.real = real;
        p
    }

    /// Single-mode polynomial; real flag is down unless the caller upgrades.
    pub fn single_mode(dom: usize, mode: Mode, values: Vec<Cplx<T>>) -> Self {
        assert_eq!(mode.len(), dom);
        let range = values.len();
        let mut p = TrigPoly::zero(dom, range);
        p.insert_term(mode, values);
        p.real = false;
        p
    }

    /// sin(l . theta) and cos(l . theta) as real scalar-valued polynomials.
    pub fn sin_mode(dom: usize, mode: &[i64]) -> Self {
        let half = T::one() / T::from_i64(2);
        let mut p = TrigPoly::zero(dom, 1);
        p.insert_term(
            mode.to_vec(),
            vec![Cplx::new(T::zero(), -half.clone())],
        );
        p.insert_term(neg_mode(mode), vec![Cplx::new(T::zero(), half)]);
        p.real = true;
        p
    }
    pub fn cos_mode(dom: usize, mode: &[i64]) -> Self {
        let half = T::one() / T::from_i64(2);
        let mut p = TrigPoly::zero(dom, 1);
        p.insert_term(mode.to_vec(), vec![Cplx::from_re(half.clone())]);
        p.insert_term(neg_mode(mode), vec![Cplx::from_re(half)]);
        p.real = true;
        p
    }

    pub fn dom(&self) -> usize {
        self.dom
    }
    pub fn range(&self) -> usize {
        self.range
    }
    pub fn is_real(&self) -> bool {
        self.real
    }
    pub fn term_count(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Stored degree: max 1-norm over the support, 0 when empty.
    pub fn degree(&self) -> i64 {
        self.support_degree().unwrap_or(0)
    }
    pub fn support_degree(&self) -> Option<i64> {
        self.coeffs.keys().map(|m| mode_abs(m)).max()
    }

    pub fn coeff(&self, ell: &[i64]) -> Vec<Cplx<T>> {
        self.coeffs
            .get(ell)
            .cloned()
            .unwrap_or_else(|| vec![Cplx::zero(); self.range])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mode, &Vec<Cplx<T>>)> {
        self.coeffs.iter()
    }

    /// Inserts (adding to any existing term); exact zeros are pruned.
    /// Raw insertion may break conjugate symmetry, so it lowers the real
    /// flag; rebuild it with [`Self::symmetrized`] or
    /// [`Self::into_real_checked`] once the coefficients are complete.
    pub fn insert_term(&mut self, mode: Mode, values: Vec<Cplx<T>>) {
        assert_eq!(mode.len(), self.dom);
        assert_eq!(values.len(), self.range);
        self.real = false;
        match self.coeffs.get_mut(&mode) {
            Some(existing) => {
                for (e, v) in existing.iter_mut().zip(values) {
                    *e = e.clone() + v;
                }
                if existing.iter().all(Cplx::is_zero) {
                    self.coeffs.remove(&mode);
                }
            }
            None => {
                if !values.iter().all(Cplx::is_zero) {
                    self.coeffs.insert(mode, values);
                }
            }
        }
    }

    /// Adds a constant vector to the mean mode. A real constant added to a
    /// real polynomial keeps the real flag up.
    pub fn add_constant(&mut self, values: &[Cplx<T>]) {
        let keep = self.real && values.iter().all(|v| v.im.is_zero());
        self.insert_term(vec![0; self.dom], values.to_vec());
        self.real = keep;
    }

    /// Raises the real flag and rewrites the coefficients as exact conjugate
    /// pairs. Use only when symmetry holds by construction; otherwise go
    /// through [`Self::into_real_checked`].
    pub fn symmetrized(mut self) -> Self {
        self.real = true;
        self.resymmetrize();
        self
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dom != other.dom || self.range != other.range {
            return Err(Error::DimensionMismatch(format!(
                "shape ({},{}) vs ({},{})",
                self.dom, self.range, other.dom, other.range
            )));
        }
        Ok(())
    }

    /// Coefficientwise linear combination sum_i scalar_i * poly_i.
    pub fn linear_combine(terms: &[(Cplx<T>, &TrigPoly<T>)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut out = TrigPoly::zero(first.dom, first.range);
        let mut real = true;
        for (s, p) in terms {
            first.check_same_shape(p)?;
            real &= p.real && s.im.is_zero();
            for (mode, vals) in p.coeffs.iter() {
                let scaled: Vec<Cplx<T>> =
                    vals.iter().map(|v| v.clone() * s.clone()).collect();
                out.insert_term(mode.clone(), scaled);
            }
        }
        out.real = real;
        if out.real {
            out.resymmetrize();
        }
        Ok(out)
    }

    pub fn scale(&self, s: &T) -> Self {
        let mut out = self.clone();
        for vals in out.coeffs.values_mut() {
            for v in vals.iter_mut() {
                *v = v.scale(s);
            }
        }
        out.prune_zeros();
        out
    }

    fn prune_zeros(&mut self) {
        self.coeffs.retain(|_, vals| !vals.iter().all(Cplx::is_zero));
    }

    /// Convolution product of a scalar-valued p with a (possibly vector) q.
    ///
    /// Sparse accumulation by default; for one-dimensional inputs that are
    /// both more than half full the kernel switches to a dense array pass.
    pub fn convolve_product(p: &TrigPoly<T>, q: &TrigPoly<T>) -> Result<Self> {
        if p.dom != q.dom {
            return Err(Error::DimensionMismatch(format!(
                "convolution domains {} vs {}",
                p.dom, q.dom
            )));
        }
        if p.range != 1 {
            return Err(Error::DimensionMismatch(
                "convolution multiplier must be scalar-valued".into(),
            ));
        }
        let mut out = if p.dom == 1 && dense_worthwhile(p) && dense_worthwhile(q) {
            convolve_dense_1d(p, q)
        } else {
            let mut out = TrigPoly::zero(q.dom, q.range);
            for (lp, vp) in p.coeffs.iter() {
                let s = &vp[0];
                for (lq, vq) in q.coeffs.iter() {
                    let mode: Mode = lp.iter().zip(lq).map(|(a, b)| a + b).collect();
                    let vals: Vec<Cplx<T>> =
                        vq.iter().map(|v| v.clone() * s.clone()).collect();
                    out.insert_term(mode, vals);
                }
            }
            out
        };
        out.real = p.real && q.real;
        if out.real {
            out.resymmetrize();
        }
        Ok(out)
    }

    /// theta -> p(theta + delta): coefficient at l gains e^{i l . delta}.
    pub fn shift(&self, delta: &[T]) -> Result<Self> {
        if delta.len() != self.dom {
            return Err(Error::DimensionMismatch(format!(
                "shift vector length {} vs domain {}",
                delta.len(),
                self.dom
            )));
        }
        let mut out = TrigPoly::zero(self.dom, self.range);
        for (mode, vals) in self.coeffs.iter() {
            let phase = Cplx::expi(dot_il(mode, delta));
            let vals: Vec<Cplx<T>> =
                vals.iter().map(|v| v.clone() * phase.clone()).collect();
            out.insert_term(mode.clone(), vals);
        }
        out.real = self.real;
        if out.real {
            out.resymmetrize();
        }
        Ok(out)
    }

    /// Directional derivative: coefficient at l gains i (l . direction).
    pub fn derivative(&self, direction: &[i64]) -> Result<Self> {
        if direction.len() != self.dom {
            return Err(Error::DimensionMismatch(format!(
                "derivative direction length {} vs domain {}",
                direction.len(),
                self.dom
            )));
        }
        let mut out = TrigPoly::zero(self.dom, self.range);
        for (mode, vals) in self.coeffs.iter() {
            let ld: i64 = mode.iter().zip(direction).map(|(a, b)| a * b).sum();
            if ld == 0 {
                continue;
            }
            let f = T::from_i64(ld);
            let vals: Vec<Cplx<T>> = vals.iter().map(|v| v.mul_i().scale(&f)).collect();
            out.insert_term(mode.clone(), vals);
        }
        out.real = self.real;
        Ok(out)
    }

    /// Scalar contraction i (l . p) of a vector-valued polynomial.
    pub fn contract_i(&self, ell: &[i64]) -> Result<TrigPoly<T>> {
        if ell.len() != self.range {
            return Err(Error::DimensionMismatch(format!(
                "contraction vector length {} vs range {}",
                ell.len(),
                self.range
            )));
        }
        let mut out = TrigPoly::zero(self.dom, 1);
        for (mode, vals) in self.coeffs.iter() {
            let mut acc = Cplx::zero();
            for (v, &c) in vals.iter().zip(ell) {
                if c != 0 {
                    acc = acc + v.scale(&T::from_i64(c));
                }
            }
            out.insert_term(mode.clone(), vec![acc.mul_i()]);
        }
        out.real = false;
        Ok(out)
    }

    /// Mean over the torus: the coefficient at l = 0.
    pub fn average(&self) -> Vec<Cplx<T>> {
        self.coeff(&vec![0; self.dom])
    }

    pub fn sub_average(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.remove(&vec![0; self.dom]);
        out
    }

    /// Weighted norm of Fourier coefficients; errors on overflow rather than
    /// saturating.
    pub fn norm(&self, np: &NormParams<T>) -> Result<T> {
        let mut acc = T::zero();
        for (mode, vals) in self.coeffs.iter() {
            let mut s2 = T::zero();
            for v in vals {
                s2 = s2 + v.abs_sq();
            }
            let term = s2 * np.weight_sq(mode_abs(mode));
            if !term.is_finite() {
                return Err(Error::NormOverflow(format!(
                    "weight overflow at mode {:?} (|l| = {})",
                    mode,
                    mode_abs(mode)
                )));
            }
            acc = acc + term;
        }
        if !acc.is_finite() {
            return Err(Error::NormOverflow("norm accumulator overflow".into()));
        }
        Ok(acc.sqrt())
    }

    /// Direct Fourier summation at one point.
    pub fn evaluate(&self, point: &[T]) -> Result<Vec<Cplx<T>>> {
        if point.len() != self.dom {
            return Err(Error::DimensionMismatch(format!(
                "evaluation point length {} vs domain {}",
                point.len(),
                self.dom
            )));
        }
        let mut acc = vec![Cplx::zero(); self.range];
        for (mode, vals) in self.coeffs.iter() {
            let phase = Cplx::expi(dot_il(mode, point));
            for (a, v) in acc.iter_mut().zip(vals) {
                *a = a.clone() + v.clone() * phase.clone();
            }
        }
        Ok(acc)
    }

    pub fn evaluate_grid(&self, points: &[Vec<T>]) -> Result<Vec<Vec<Cplx<T>>>> {
        points.iter().map(|p| self.evaluate(p)).collect()
    }

    /// Real part of an evaluation, with contamination check against the
    /// working-precision reality tolerance.
    pub fn evaluate_real(&self, point: &[T]) -> Result<Vec<T>> {
        let vals = self.evaluate(point)?;
        let tol = tolerances::scaled::<T>(tolerances::REALITY_REL_TOL);
        let mut out = Vec::with_capacity(vals.len());
        for v in vals {
            let mag = v.abs().to_f64();
            if v.im.clone().abs().to_f64() > tol * mag.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "evaluation expected real, imaginary part {:.3e} of magnitude {:.3e}",
                    v.im.to_f64(),
                    mag
                )));
            }
            out.push(v.re);
        }
        Ok(out)
    }

    /// Enforces exact conjugate symmetry and raises the real flag. The input
    /// asymmetry must stay below `rel_tol` times the largest coefficient.
    pub fn into_real_checked(mut self, rel_tol: f64) -> Result<Self> {
        let mut scale: f64 = 0.0;
        for vals in self.coeffs.values() {
            for v in vals {
                scale = scale.max(v.abs().to_f64());
            }
        }
        let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
        for (mode, vals) in self.coeffs.iter() {
            let mirror = self.coeff(&neg_mode(mode));
            for (v, w) in vals.iter().zip(&mirror) {
                let diff = v.clone() - w.conj();
                if diff.abs().to_f64() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "conjugate asymmetry {:.3e} at mode {:?} exceeds {:.3e}",
                        diff.abs().to_f64(),
                        mode,
                        tol
                    )));
                }
            }
        }
        self.real = true;
        self.resymmetrize();
        Ok(self)
    }

    /// Rewrites coefficients as exact conjugate pairs:
    /// c(l) <- (c(l) + conj(c(-l)))/2, mirror stored as the exact conjugate.
    fn resymmetrize(&mut self) {
        let half = T::one() / T::from_i64(2);
        let modes: Vec<Mode> = self.coeffs.keys().cloned().collect();
        let mut done: std::collections::BTreeSet<Mode> = std::collections::BTreeSet::new();
        for mode in modes {
            if done.contains(&mode) {
                continue;
            }
            let m_neg = neg_mode(&mode);
            let a = self.coeff(&mode);
            let b = self.coeff(&m_neg);
            let sym: Vec<Cplx<T>> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x.clone() + y.conj()).scale(&half))
                .collect();
            let sym_conj: Vec<Cplx<T>> = sym.iter().map(Cplx::conj).collect();
            self.coeffs.remove(&mode);
            self.coeffs.remove(&m_neg);
            if !sym.iter().all(Cplx::is_zero) {
                if mode == m_neg {
                    // Self-paired zero mode: imaginary part cancels exactly.
                    self.coeffs.insert(mode.clone(), sym);
                } else {
                    self.coeffs.insert(mode.clone(), sym);
                    self.coeffs.insert(m_neg.clone(), sym_conj);
                }
            }
            done.insert(mode);
            done.insert(m_neg);
        }
    }
}

fn dot_il<T: Scalar>(mode: &[i64], x: &[T]) -> T {
    let mut acc = T::zero();
    for (&m, xi) in mode.iter().zip(x) {
        if m != 0 {
            acc = acc + T::from_i64(m) * xi.clone();
        }
    }
    acc
}

fn dense_worthwhile<T: Scalar>(p: &TrigPoly<T>) -> bool {
    let d = p.degree();
    let volume = (2 * d + 1) as usize;
    2 * p.term_count() > volume
}

fn convolve_dense_1d<T: Scalar>(p: &TrigPoly<T>, q: &TrigPoly<T>) -> TrigPoly<T> {
    let dp = p.degree();
    let dq = q.degree();
    let off = dp + dq;
    let width = (2 * off + 1) as usize;
    let range = q.range();
    let mut table: Vec<Vec<Cplx<T>>> = vec![vec![Cplx::zero(); range]; width];
    for (lp, vp) in p.iter() {
        let s = &vp[0];
        for (lq, vq) in q.iter() {
            let idx = (lp[0] + lq[0] + off) as usize;
            for (slot, v) in table[idx].iter_mut().zip(vq) {
                *slot = slot.clone() + v.clone() * s.clone();
            }
        }
    }
    let mut out = TrigPoly::zero(1, range);
    for (i, vals) in table.into_iter().enumerate() {
        out.insert_term(vec![i as i64 - off], vals);
    }
    out
}

/// Vector-valued polynomial from a scalar one: every coefficient c becomes
/// the vector (c * vec_1, ..., c * vec_D).
pub fn outer<T: Scalar>(p: &TrigPoly<T>, vec: &[Cplx<T>]) -> Result<TrigPoly<T>> {
    if p.range() != 1 {
        return Err(Error::DimensionMismatch(
            "outer product expects a scalar-valued polynomial".into(),
        ));
    }
    let mut out = TrigPoly::zero(p.dom(), vec.len());
    for (mode, vals) in p.iter() {
        let c = &vals[0];
        let row: Vec<Cplx<T>> = vec.iter().map(|v| c.clone() * v.clone()).collect();
        out.insert_term(mode.clone(), row);
    }
    Ok(out)
}

/// Uniform 1-D grid theta_j = 2 pi j / m.
pub fn uniform_grid_1d<T: Scalar>(m: usize) -> Vec<T> {
    let tp = T::two_pi();
    (0..m)
        .map(|j| tp.clone() * T::from_i64(j as i64) / T::from_i64(m as i64))
        .collect()
}

/// Projects samples on the uniform grid back to modes |m| <= m_max by a
/// direct discrete Fourier transform. Exact (up to roundoff) for inputs that
/// are band-limited below the Nyquist frequency of the grid.
pub fn dft_project_1d<T: Scalar>(samples: &[Vec<Cplx<T>>], m_max: i64) -> TrigPoly<T> {
    let mpts = samples.len();
    assert!(mpts as i64 > 2 * m_max, "grid too small for requested band");
    let range = samples.first().map_or(1, Vec::len);
    let tp = T::two_pi();
    let minv = T::one() / T::from_i64(mpts as i64);
    let mut out = TrigPoly::zero(1, range);
    for m in -m_max..=m_max {
        let mut acc = vec![Cplx::zero(); range];
        for (j, vals) in samples.iter().enumerate() {
            let k = (m * j as i64).rem_euclid(mpts as i64);
            let phase = Cplx::expi(-(tp.clone() * T::from_i64(k) / T::from_i64(mpts as i64)));
            for (a, v) in acc.iter_mut().zip(vals) {
                *a = a.clone() + v.clone() * phase.clone();
            }
        }
        let acc: Vec<Cplx<T>> = acc.iter().map(|a| a.scale(&minv)).collect();
        out.insert_term(vec![m], acc);
    }
    out.real = false;
    out
}

/// One cosine/sine term of the potential: amplitude pair for mode l.
#[derive(Clone, Debug)]
pub struct PotentialTerm<T: Scalar> {
    pub mode: Mode,
    pub cos_amp: T,
    pub sin_amp: T,
}

/// The forcing V as a real scalar trigonometric polynomial together with the
/// derived gradient data. V is specified through cosine/sine amplitudes, so
/// the gradient coefficients are proportional to their mode by construction.
#[derive(Clone, Debug)]
pub struct Potential<T: Scalar> {
    dim: usize,
    vhat: BTreeMap<Mode, Cplx<T>>,
}

impl<T: Scalar> Potential<T> {
    pub fn from_terms(dim: usize, terms: &[PotentialTerm<T>]) -> Result<Self> {
        let half = T::one() / T::from_i64(2);
        let mut vhat: BTreeMap<Mode, Cplx<T>> = BTreeMap::new();
        for t in terms {
            if t.mode.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "potential mode {:?} has length {}, expected {}",
                    t.mode,
                    t.mode.len(),
                    dim
                )));
            }
            if is_zero_mode(&t.mode) {
                // A constant shift of V does not move the gradient; dropped.
                continue;
            }
            // a cos(l.q) + b sin(l.q) = ((a - i b)/2) e^{i l.q} + c.c.
            let plus = Cplx::new(
                t.cos_amp.clone() * half.clone(),
                -(t.sin_amp.clone() * half.clone()),
            );
            let minus = plus.conj();
            for (mode, v) in [(t.mode.clone(), plus), (neg_mode(&t.mode), minus)] {
                let slot = vhat.entry(mode).or_insert_with(Cplx::zero);
                *slot = slot.clone() + v;
            }
        }
        vhat.retain(|_, v| !v.is_zero());
        Ok(Potential { dim, vhat })
    }

    /// Potential with no modes: V' vanishes identically.
    pub fn empty(dim: usize) -> Self {
        Potential {
            dim,
            vhat: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn is_empty(&self) -> bool {
        self.vhat.is_empty()
    }

    /// Trigonometric degree J of V (and of V').
    pub fn degree_j(&self) -> i64 {
        self.vhat.keys().map(|m| mode_abs(m)).max().unwrap_or(0)
    }

    pub fn vhat(&self) -> &BTreeMap<Mode, Cplx<T>> {
        &self.vhat
    }

    pub fn v_poly(&self) -> TrigPoly<T> {
        let mut p = TrigPoly::zero(self.dim, 1);
        for (mode, v) in &self.vhat {
            p.insert_term(mode.clone(), vec![v.clone()]);
        }
        p.real = true;
        p
    }

    /// Gradient coefficient alpha_l = i l vhat_l.
    pub fn alpha(&self, mode: &[i64]) -> Vec<Cplx<T>> {
        let v = match self.vhat.get(mode) {
            Some(v) => v.clone(),
            None => return vec![Cplx::zero(); self.dim],
        };
        mode.iter()
            .map(|&c| v.mul_i().scale(&T::from_i64(c)))
            .collect()
    }

    /// Modes with a non-vanishing gradient coefficient.
    pub fn alpha_modes(&self) -> impl Iterator<Item = (&Mode, Vec<Cplx<T>>)> {
        self.vhat.keys().map(|m| (m, self.alpha(m)))
    }

    pub fn gradient_poly(&self) -> TrigPoly<T> {
        let mut p = TrigPoly::zero(self.dim, self.dim);
        for mode in self.vhat.keys() {
            p.insert_term(mode.clone(), self.alpha(mode));
        }
        p.real = true;
        p
    }

    /// Size measure Upsilon = sum over modes of |alpha_l|.
    pub fn upsilon(&self) -> T {
        let mut acc = T::zero();
        for mode in self.vhat.keys() {
            let mut s2 = T::zero();
            for a in self.alpha(mode) {
                s2 = s2 + a.abs_sq();
            }
            acc = acc + s2.sqrt();
        }
        acc
    }

    /// V'(q) evaluated directly; the conjugate-symmetric sum is real.
    pub fn vprime_at(&self, q: &[T]) -> Result<Vec<T>> {
        self.gradient_poly().evaluate_real(q)
    }

    /// Potential with every amplitude multiplied by eta.
    pub fn scaled(&self, eta: &T) -> Self {
        let mut vhat = BTreeMap::new();
        for (mode, v) in &self.vhat {
            let s = v.scale(eta);
            if !s.is_zero() {
                vhat.insert(mode.clone(), s);
            }
        }
        Potential {
            dim: self.dim,
            vhat,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_theta() -> TrigPoly<f64> {
        TrigPoly::sin_mode(1, &[1])
    }
    fn cos_theta() -> TrigPoly<f64> {
        TrigPoly::cos_mode(1, &[1])
    }
    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    #[test]
    fn linear_combine_cancellation() {
        let p = sin_theta();
        let out =
            TrigPoly::linear_combine(&[(Cplx::one(), &p), (c(-1.0, 0.0), &p)]).unwrap();
        assert!(out.is_empty());
        assert!(out.is_real());
    }

    #[test]
    fn linear_combine_doubles_single_mode() {
        let e = TrigPoly::<f64>::single_mode(1, vec![1], vec![Cplx::one()]);
        let out = TrigPoly::linear_combine(&[(c(2.0, 0.0), &e)]).unwrap();
        assert_eq!(out.coeff(&[1]), vec![c(2.0, 0.0)]);
    }

    #[test]
    fn linear_combine_sin_plus_cos_coefficients() {
        let out =
            TrigPoly::linear_combine(&[(Cplx::one(), &sin_theta()), (Cplx::one(), &cos_theta())])
                .unwrap();
        // sin + cos has coefficient (1 - i)/2 at l = 1 and (1 + i)/2 at l = -1.
        assert_eq!(out.coeff(&[1]), vec![c(0.5, -0.5)]);
        assert_eq!(out.coeff(&[-1]), vec![c(0.5, 0.5)]);
        assert!(out.is_real());
    }

    #[test]
    fn convolve_inverse_modes_give_constant() {
        let e = TrigPoly::<f64>::single_mode(1, vec![1], vec![Cplx::one()]);
        let f = TrigPoly::<f64>::single_mode(1, vec![-1], vec![Cplx::one()]);
        let out = TrigPoly::convolve_product(&e, &f).unwrap();
        assert_eq!(out.coeff(&[0]), vec![Cplx::one()]);
        assert_eq!(out.term_count(), 1);
    }

    #[test]
    fn convolve_sin_squared() {
        let out = TrigPoly::convolve_product(&sin_theta(), &sin_theta()).unwrap();
        // sin^2 = (1 - cos 2 theta)/2.
        assert_eq!(out.coeff(&[0]), vec![c(0.5, 0.0)]);
        assert_eq!(out.coeff(&[2]), vec![c(-0.25, 0.0)]);
        assert_eq!(out.coeff(&[-2]), vec![c(-0.25, 0.0)]);
        assert!(out.is_real());
    }

    #[test]
    fn convolve_with_zero_annihilates() {
        let z = TrigPoly::<f64>::zero(1, 1);
        let out = TrigPoly::convolve_product(&sin_theta(), &z).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn dense_and_sparse_convolutions_agree() {
        // Full polynomials of degree 3 trigger the dense path; compare
        // against the sparse result computed through a 2-D embedding trick:
        // scale one of them so the fill test fails.
        let mut p = TrigPoly::<f64>::zero(1, 1);
        let mut q = TrigPoly::<f64>::zero(1, 1);
        for l in -3i64..=3 {
            p.insert_term(vec![l], vec![c(0.1 * l as f64 + 1.0, 0.3 - 0.05 * l as f64)]);
            q.insert_term(vec![l], vec![c(0.7 - 0.02 * l as f64, 0.1 * l as f64)]);
        }
        let dense = TrigPoly::convolve_product(&p, &q).unwrap();
        let mut q_sparse = q.clone();
        q_sparse.insert_term(vec![40], vec![c(1e-30, 0.0)]);
        let sparse = TrigPoly::convolve_product(&p, &q_sparse).unwrap();
        for l in -6i64..=6 {
            let a = dense.coeff(&[l])[0].clone();
            let b = sparse.coeff(&[l])[0].clone();
            assert!((a - b).abs() < 1e-13, "mismatch at l = {l}");
        }
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let p = sin_theta();
        let out = p.shift(&[0.0]).unwrap();
        assert_eq!(out.coeff(&[1]), p.coeff(&[1]));
        assert_eq!(out.coeff(&[-1]), p.coeff(&[-1]));
    }

    #[test]
    fn shift_by_half_period_flips_sign() {
        let e = TrigPoly::<f64>::single_mode(1, vec![1], vec![Cplx::one()]);
        let out = e.shift(&[std::f64::consts::PI]).unwrap();
        let v = out.coeff(&[1])[0].clone();
        assert!((v.re + 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn shift_matches_grid_oracle() {
        let omega = 2.0 * std::f64::consts::PI * 0.618;
        let shifted = sin_theta().shift(&[omega]).unwrap();
        for j in 0..17 {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / 17.0;
            let val = shifted.evaluate(&[theta]).unwrap()[0].clone();
            assert!((val.re - (theta + omega).sin()).abs() < 1e-14);
            assert!(val.im.abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let p = TrigPoly::<f64>::constant(1, vec![c(3.0, 0.0)]);
        assert!(p.derivative(&[1]).unwrap().is_empty());
    }

    #[test]
    fn derivative_of_sin_is_cos() {
        let out = sin_theta().derivative(&[1]).unwrap();
        let cos = cos_theta();
        assert_eq!(out.coeff(&[1]), cos.coeff(&[1]));
        assert_eq!(out.coeff(&[-1]), cos.coeff(&[-1]));
    }

    #[test]
    fn second_derivative_of_cos_is_minus_cos() {
        let out = cos_theta()
            .derivative(&[1])
            .unwrap()
            .derivative(&[1])
            .unwrap();
        assert_eq!(out.coeff(&[1]), vec![c(-0.5, 0.0)]);
        assert_eq!(out.coeff(&[-1]), vec![c(-0.5, 0.0)]);
    }

    #[test]
    fn average_examples() {
        assert!(sin_theta().average()[0].is_zero());
        let one_plus_cos = TrigPoly::linear_combine(&[
            (Cplx::one(), &TrigPoly::constant(1, vec![Cplx::one()])),
            (Cplx::one(), &cos_theta()),
        ])
        .unwrap();
        assert_eq!(one_plus_cos.average(), vec![Cplx::one()]);
        let sq = TrigPoly::convolve_product(&sin_theta(), &sin_theta()).unwrap();
        assert_eq!(sq.average(), vec![c(0.5, 0.0)]);
    }

    #[test]
    fn norm_single_mode_closed_form() {
        let e = TrigPoly::<f64>::single_mode(1, vec![1], vec![Cplx::one()]);
        let np = NormParams::new(1.0, 1.0).unwrap();
        let expected = (2.0 * (2.0f64).exp()).sqrt();
        assert!((e.norm(&np).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn norm_of_constant_is_modulus() {
        let p = TrigPoly::<f64>::constant(1, vec![c(3.0, 4.0)]);
        let np = NormParams::new(2.5, 7.0).unwrap();
        assert!((p.norm(&np).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn norm_overflow_reported() {
        let e = TrigPoly::<f64>::single_mode(1, vec![500], vec![Cplx::one()]);
        let np = NormParams::new(10.0, 0.0).unwrap();
        assert!(matches!(e.norm(&np), Err(Error::NormOverflow(_))));
    }

    #[test]
    fn projection_is_a_contraction() {
        let mut p = TrigPoly::<f64>::zero(1, 2);
        p.insert_term(vec![0], vec![c(1.0, 0.0), c(-2.0, 0.5)]);
        p.insert_term(vec![3], vec![c(0.2, 0.1), c(0.0, -0.4)]);
        let np = NormParams::new(0.3, 1.5).unwrap();
        assert!(p.sub_average().norm(&np).unwrap() <= p.norm(&np).unwrap());
    }

    #[test]
    fn evaluate_constants_and_modes() {
        let p = TrigPoly::<f64>::constant(1, vec![Cplx::one()]);
        assert_eq!(p.evaluate(&[0.321]).unwrap(), vec![Cplx::one()]);
        let e = TrigPoly::<f64>::single_mode(1, vec![1], vec![Cplx::one()]);
        let v = e.evaluate(&[std::f64::consts::FRAC_PI_2]).unwrap()[0].clone();
        assert!(v.re.abs() < 1e-15 && (v.im - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluation_is_multiplicative_on_products() {
        // Seeded lightweight LCG so the test stays dependency-free here.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut p = TrigPoly::<f64>::zero(1, 1);
        let mut q = TrigPoly::<f64>::zero(1, 1);
        for l in -8i64..=8 {
            p.insert_term(vec![l], vec![c(next(), next())]);
            q.insert_term(vec![l], vec![c(next(), next())]);
        }
        let prod = TrigPoly::convolve_product(&p, &q).unwrap();
        for j in 0..7 {
            let theta = [0.1 + j as f64];
            let lhs = prod.evaluate(&theta).unwrap()[0].clone();
            let rhs =
                p.evaluate(&theta).unwrap()[0].clone() * q.evaluate(&theta).unwrap()[0].clone();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn dft_recovers_band_limited_polynomials() {
        let p = {
            let mut p = TrigPoly::<f64>::zero(1, 2);
            p.insert_term(vec![2], vec![c(0.3, -0.7), c(0.0, 0.2)]);
            p.insert_term(vec![-1], vec![c(-1.5, 0.1), c(2.0, 0.0)]);
            p.insert_term(vec![0], vec![c(0.25, 0.0), c(0.0, -1.0)]);
            p
        };
        let grid = uniform_grid_1d::<f64>(11);
        let pts: Vec<Vec<f64>> = grid.into_iter().map(|t| vec![t]).collect();
        let samples = p.evaluate_grid(&pts).unwrap();
        let back = dft_project_1d(&samples, 5);
        for l in -5i64..=5 {
            let a = p.coeff(&[l]);
            let b = back.coeff(&[l]);
            for (x, y) in a.iter().zip(&b) {
                assert!((x.clone() - y.clone()).abs() < 1e-13, "mode {l}");
            }
        }
    }

    #[test]
    fn potential_derives_gradient_and_upsilon() {
        // V = -cos q so that V' = sin q.
        let pot = Potential::from_terms(
            1,
            &[PotentialTerm {
                mode: vec![1],
                cos_amp: -1.0,
                sin_amp: 0.0,
            }],
        )
        .unwrap();
        assert_eq!(pot.degree_j(), 1);
        assert!((pot.upsilon() - 1.0).abs() < 1e-15);
        let a1 = pot.alpha(&[1]);
        assert_eq!(a1, vec![c(0.0, -0.5)]);
        let v = pot.vprime_at(&[std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14);
        // Gradient coefficients are conjugate-symmetric.
        let am1 = pot.alpha(&[-1]);
        assert_eq!(am1[0], a1[0].conj());
    }

    #[test]
    fn potential_constant_term_is_dropped() {
        let pot = Potential::from_terms(
            2,
            &[PotentialTerm {
                mode: vec![0, 0],
                cos_amp: 5.0,
                sin_amp: 1.0,
            }],
        )
        .unwrap();
        assert!(pot.is_empty());
        assert_eq!(pot.degree_j(), 0);
    }

    #[test]
    fn froeschle_potential_data() {
        // V = cos q1 + cos q2.
        let pot = Potential::from_terms(
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
            ],
        )
        .unwrap();
        assert_eq!(pot.degree_j(), 1);
        assert!((pot.upsilon() - 2.0).abs() < 1e-15);
        // alpha_{(1,0)} = i (1,0) * 1/2.
        let a = pot.alpha(&[1, 0]);
        assert_eq!(a[0], c(0.0, 0.5));
        assert!(a[1].is_zero());
    }
}
