//! Small-jump functionals `κ, ζ, γ, χ` and the scalar summaries `c, b, dtail`.

use std::collections::HashMap;
use std::sync::Mutex;

use super::measure::{Interval, Moment};
use super::model::LevyModel;
use crate::error::{LevyError, Result};

#[derive(Clone, Copy, Debug, Hash, PartialEq, Eq)]
enum Key {
    Kappa(u64),
    Gamma(u64),
    Chi(u64),
    Tail,
}

/// Memo table shared by clones of a model.
#[derive(Debug, Default)]
pub struct FunctionalCache {
    table: Mutex<HashMap<Key, f64>>,
}

/// Evaluators for the small-jump functionals of a model.
pub struct SmallJumpFunctionals<'a> {
    model: &'a LevyModel,
    cache: &'a FunctionalCache,
}

impl<'a> SmallJumpFunctionals<'a> {
    pub(crate) fn new(model: &'a LevyModel, cache: &'a FunctionalCache) -> Self {
        Self { model, cache }
    }

    fn memo(&self, key: Key, f: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = self.cache.table.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        self.cache.table.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    fn check_delta(delta: f64) -> Result<()> {
        if delta.is_nan() || delta < 0.0 {
            return Err(LevyError::InvalidModel(format!("functional argument must be nonnegative, got {delta}")));
        }
        Ok(())
    }

    /// `κ(δ) = ∫_{[-1,1]^d \ [-δ,δ]^d} |x| dλ`; `κ(0) = b`.
    pub fn kappa(&self, delta: f64) -> Result<f64> {
        Self::check_delta(delta)?;
        if delta >= 1.0 {
            return Ok(0.0);
        }
        if delta == 0.0 {
            return Ok(self.b());
        }
        self.memo(Key::Kappa(delta.to_bits()), || self.annulus(delta, Moment::AbsFirst))
    }

    /// `ζ(δ) = δ κ(δ)`.
    pub fn zeta(&self, delta: f64) -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        Ok(delta * self.kappa(delta)?)
    }

    /// `γ(δ) = δ² λ([-1,1]^d \ [-δ,δ]^d)`.
    pub fn gamma(&self, delta: f64) -> Result<f64> {
        Self::check_delta(delta)?;
        if delta >= 1.0 || delta == 0.0 {
            return Ok(0.0);
        }
        let mass = self.memo(Key::Gamma(delta.to_bits()), || self.annulus(delta, Moment::Mass))?;
        Ok(delta * delta * mass)
    }

    /// `χ(δ) = Σ_{i<j} ∫_{[-δ,δ]^d} |x_i x_j| dλ` (zero for `d = 1`).
    pub fn chi(&self, delta: f64) -> Result<f64> {
        Self::check_delta(delta)?;
        let d = self.model.dim();
        if d == 1 || delta == 0.0 {
            return Ok(0.0);
        }
        self.memo(Key::Chi(delta.to_bits()), || {
            let cross = |x: &[f64]| {
                let mut s = 0.0;
                for i in 0..x.len() {
                    for j in i + 1..x.len() {
                        s += (x[i] * x[j]).abs();
                    }
                }
                s
            };
            let measure = self.model.measure();
            let mut total = measure.punctured_integral(delta, &cross)?;
            for a in measure.atoms() {
                if a.location.iter().all(|x| x.abs() <= delta) {
                    total += a.weight * cross(&a.location);
                }
            }
            Ok(total)
        })
    }

    /// `c = λ(ℝ^d)`.
    pub fn c(&self) -> f64 {
        self.model.activity().total_mass
    }

    /// `b = κ(0)`.
    pub fn b(&self) -> f64 {
        self.model.activity().first_moment
    }

    /// `λ(ℝ^d \ [-1,1]^d)`.
    pub fn dtail(&self) -> Result<f64> {
        self.memo(Key::Tail, || {
            let measure = self.model.measure();
            let mut total: f64 =
                measure.atoms().iter().filter(|a| a.location.iter().any(|x| x.abs() > 1.0)).map(|a| a.weight).sum();
            if self.model.dim() == 1 {
                let (p, n) = measure.density_tails(1.0)?;
                total += p + n;
            } else if let Some(support) = measure.multivariate_support() {
                if support > 1.0 {
                    total += shell_boxes(self.model.dim(), 1.0, support)
                        .iter()
                        .map(|(lo, hi)| measure.box_integral(lo, hi, &|_| 1.0))
                        .sum::<Result<f64>>()?;
                }
            }
            Ok(total)
        })
    }

    /// `min_j σ²_j`.
    pub fn sigma_hat2(&self) -> f64 {
        self.model.sigma2().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `Σ_j σ²_j`.
    pub fn sigma2_sum(&self) -> f64 {
        self.model.sigma2().iter().sum()
    }

    /// Integral over the region `δ < |x|_∞ ≤ 1` with the given weight.
    fn annulus(&self, delta: f64, kind: Moment) -> Result<f64> {
        let measure = self.model.measure();
        if self.model.dim() == 1 {
            let pos = measure.integrate(kind, Interval::new(delta, 1.0, false, true))?;
            let neg = measure.integrate(kind, Interval::new(-1.0, -delta, true, false))?;
            return Ok(pos + neg);
        }
        let weight = |x: &[f64]| match kind {
            Moment::Mass => 1.0,
            _ => x.iter().map(|c| c * c).sum::<f64>().sqrt(),
        };
        let mut total = 0.0;
        for a in measure.atoms() {
            let sup = a.location.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if sup > delta && sup <= 1.0 {
                total += a.weight * weight(&a.location);
            }
        }
        for (lo, hi) in shell_boxes(self.model.dim(), delta, 1.0) {
            total += measure.box_integral(&lo, &hi, &weight)?;
        }
        Ok(total)
    }
}

/// Boxes tiling `[-outer, outer]^d \ [-inner, inner]^d`.
pub(crate) fn shell_boxes(d: usize, inner: f64, outer: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let cuts = [(-outer, -inner), (-inner, inner), (inner, outer)];
    let mut out = Vec::new();
    for flat in 0..3usize.pow(d as u32) {
        let mut rem = flat;
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        let mut central = true;
        for j in 0..d {
            let c = rem % 3;
            rem /= 3;
            central &= c == 1;
            lo[j] = cuts[c].0;
            hi[j] = cuts[c].1;
        }
        if !central {
            out.push((lo, hi));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::measure::{Atom, LevyMeasure};
    use approx::assert_relative_eq;

    fn stable_half() -> LevyModel {
        LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(0.5, 1.0).unwrap(), 1).unwrap()
    }

    #[test]
    fn kappa_of_stable_half() {
        // κ(δ) = 2(1 - δ^{1/2})/(1/2)
        let m = stable_half();
        let f = m.functionals();
        assert_relative_eq!(f.kappa(0.25).unwrap(), 2.0, max_relative = 1e-12);
        let q = m.without_closed_forms();
        assert_relative_eq!(q.functionals().kappa(0.25).unwrap(), 2.0, max_relative = 1e-10);
        assert_relative_eq!(f.kappa(0.0).unwrap(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_measure_functionals_vanish() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let f = m.functionals();
        for d in [0.1, 0.5] {
            assert_eq!(f.kappa(d).unwrap(), 0.0);
            assert_eq!(f.zeta(d).unwrap(), 0.0);
            assert_eq!(f.gamma(d).unwrap(), 0.0);
            assert_eq!(f.chi(d).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_atom_kappa() {
        let two = LevyMeasure::atomic(1, vec![Atom::at(0.5, 0.5), Atom::at(-0.5, 0.5)]).unwrap();
        let m = LevyModel::univariate(1.0, 0.0, two, 0).unwrap();
        assert_relative_eq!(m.functionals().kappa(0.25).unwrap(), 0.5);
        // atoms on the inner boundary are excluded
        assert_eq!(m.functionals().kappa(0.5).unwrap(), 0.0);
    }

    #[test]
    fn cross_term_of_bivariate_atoms() {
        let atoms = vec![Atom::new(vec![0.1, 0.2], 2.0), Atom::new(vec![0.5, 0.5], 1.0)];
        let m = LevyModel::new(vec![1.0, 1.0], vec![0.0, 0.0], LevyMeasure::atomic(2, atoms).unwrap(), 0).unwrap();
        assert_relative_eq!(m.functionals().chi(0.3).unwrap(), 2.0 * 0.02);
        assert_relative_eq!(m.functionals().kappa(0.3).unwrap(), 0.5f64.sqrt());
    }

    #[test]
    fn gamma_below_zeta() {
        let m = stable_half();
        let f = m.functionals();
        for k in 0..12 {
            let d = 2f64.powi(-k);
            assert!(f.gamma(d).unwrap() <= f.zeta(d).unwrap() + 1e-15);
        }
    }
}
