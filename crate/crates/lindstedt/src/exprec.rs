//! Power-series layers of exponentials of unknown series.
//!
//! For a fixed integer mode l the composition e^{i l . (theta + U(theta))}
//! (or e^{i l . h(theta)} for a lower-dimensional hull h = theta k + g) is a
//! power series in epsilon whose layers obey a differentiation recursion:
//! with f = sum_{m >= 1} f_m eps^m, f_m = i l . s_m, the layers of E = E_0
//! e^{f} satisfy
//!
//!   n E_n = sum_{m=1}^{n} m f_m E_{n-m},      E_0 given.
//!
//! The cache stores the contracted scalars f_m and the layers E_n, and can
//! evaluate a hypothetical next layer without committing it, which the
//! lower-tori driver uses to probe candidate constant parts.

use crate::error::{Error, Result};
use crate::fourier::{Mode, TrigPoly};
use crate::scalar::{Cplx, Scalar};

/// Layer cache for one integer mode l.
#[derive(Clone, Debug)]
pub struct ExpCache<T: Scalar> {
    ell: Mode,
    /// Contracted scalar series f_m = i l . s_m for m = 1, 2, ...
    fs: Vec<TrigPoly<T>>,
    /// Layers E_0, ..., E_{fs.len()}.
    layers: Vec<TrigPoly<T>>,
}

impl<T: Scalar> ExpCache<T> {
    /// Cache for e^{i l . (theta + U(theta))}: layer zero is the single mode
    /// e^{i l . theta}.
    pub fn init_maximal(ell: Mode) -> Self {
        let dom = ell.len();
        let e0 = TrigPoly::single_mode(dom, ell.clone(), vec![Cplx::one()]);
        ExpCache {
            ell,
            fs: Vec::new(),
            layers: vec![e0],
        }
    }

    /// Cache for e^{i l . h(theta)} with h(theta) = theta k + g_0: layer
    /// zero is the single mode (l . k) carrying the phase e^{i l . g_0}.
    pub fn init_lower(ell: Mode, k: &[i64], g0: &[T]) -> Result<Self> {
        if ell.len() != k.len() || ell.len() != g0.len() {
            return Err(Error::DimensionMismatch(format!(
                "mode length {}, winding length {}, offset length {}",
                ell.len(),
                k.len(),
                g0.len()
            )));
        }
        let lk: i64 = ell.iter().zip(k).map(|(a, b)| a * b).sum();
        let mut phase_arg = T::zero();
        for (&c, g) in ell.iter().zip(g0) {
            if c != 0 {
                phase_arg = phase_arg + T::from_i64(c) * g.clone();
            }
        }
        let e0 = TrigPoly::single_mode(1, vec![lk], vec![Cplx::expi(phase_arg)]);
        Ok(ExpCache {
            ell,
            fs: Vec::new(),
            layers: vec![e0],
        })
    }

    pub fn mode(&self) -> &Mode {
        &self.ell
    }

    /// Index of the highest committed layer.
    pub fn highest(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, n: usize) -> Result<&TrigPoly<T>> {
        self.layers.get(n).ok_or(Error::MissingOrder(n))
    }

    /// Commits the next series term s_{m+1} (m = number already committed)
    /// and computes the corresponding layer.
    pub fn advance(&mut self, s_next: &TrigPoly<T>) -> Result<&TrigPoly<T>> {
        let f = s_next.contract_i(&self.ell)?;
        let layer = self.next_layer_with(&f)?;
        self.fs.push(f);
        self.layers.push(layer);
        Ok(self.layers.last().unwrap())
    }

    /// The layer that `advance` would produce for a candidate next term,
    /// without committing anything.
    pub fn peek(&self, s_next: &TrigPoly<T>) -> Result<TrigPoly<T>> {
        let f = s_next.contract_i(&self.ell)?;
        self.next_layer_with(&f)
    }

    /// Cache for the series with every order-m term multiplied by eta^m.
    /// The recursion is homogeneous, so rescaling f_m by eta^m and E_n by
    /// eta^n yields exactly the cache that a run on the rescaled series
    /// would have produced.
    pub fn scaled(&self, eta: &T) -> Self {
        let mut pow = T::one();
        let fs = self
            .fs
            .iter()
            .map(|f| {
                pow = pow.clone() * eta.clone();
                f.scale(&pow)
            })
            .collect();
        let mut pow = T::one();
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(n, e)| {
                if n > 0 {
                    pow = pow.clone() * eta.clone();
                }
                e.scale(&pow)
            })
            .collect();
        ExpCache {
            ell: self.ell.clone(),
            fs,
            layers,
        }
    }

    /// n E_n = sum_{m=1}^{n} m f_m E_{n-m} with f_n = `f_new`.
    fn next_layer_with(&self, f_new: &TrigPoly<T>) -> Result<TrigPoly<T>> {
        let n = self.layers.len();
        let n_t = T::from_i64(n as i64);
        let mut acc = TrigPoly::zero(self.layers[0].dom(), 1);
        for m in 1..=n {
            let f_m = if m == n { f_new } else { &self.fs[m - 1] };
            if f_m.is_empty() {
                continue;
            }
            let prod = TrigPoly::convolve_product(f_m, &self.layers[n - m])?;
            let w = T::from_i64(m as i64) / n_t.clone();
            for (mode, vals) in prod.iter() {
                let scaled: Vec<Cplx<T>> = vals.iter().map(|v| v.scale(&w)).collect();
                acc.insert_term(mode.clone(), scaled);
            }
        }
        Ok(acc)
    }
}
