use std::sync::Arc;

use num_complex::Complex64;

use super::functionals::{FunctionalCache, SmallJumpFunctionals};
use super::measure::{Interval, LevyMeasure, Moment};
use crate::error::{LevyError, Result};

/// A Lévy process given by its characteristic triplet relative to the cutoff
/// `1_{[-V,V]^d}`.
#[derive(Clone, Debug)]
pub struct LevyModel {
    dim: usize,
    sigma2: Vec<f64>,
    mu: Vec<f64>,
    measure: LevyMeasure,
    cutoff_v: u8,
    orey_epsilon: Option<f64>,
    activity: Activity,
    cache: Arc<FunctionalCache>,
}

/// Total mass `c = λ(ℝ^d)` and `b = κ(0) = ∫_{[-1,1]^d}|x| dλ`; `∞` when divergent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activity {
    pub total_mass: f64,
    pub first_moment: f64,
}

impl Activity {
    pub fn finite_mass(&self) -> bool {
        self.total_mass.is_finite()
    }

    pub fn finite_variation(&self) -> bool {
        self.first_moment.is_finite()
    }
}

/// Coarse classification of the jump part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivityClass {
    /// `λ = 0`
    None,
    /// `0 < λ(ℝ^d) < ∞`
    Finite,
    /// `κ(0) < ∞ = λ(ℝ^d)`
    FiniteVariation,
    /// `κ(0) = ∞`
    InfiniteVariation,
}

impl LevyModel {
    pub fn new(sigma2: Vec<f64>, mu: Vec<f64>, measure: LevyMeasure, cutoff_v: u8) -> Result<Self> {
        let dim = sigma2.len();
        if dim == 0 {
            return Err(LevyError::InvalidModel("dimension must be positive".into()));
        }
        if mu.len() != dim || measure.dim() != dim {
            return Err(LevyError::InvalidModel(format!(
                "dimension mismatch: sigma2 has {dim}, mu has {}, measure has {}",
                mu.len(),
                measure.dim()
            )));
        }
        if sigma2.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(LevyError::InvalidModel(format!("variances must be finite and nonnegative: {sigma2:?}")));
        }
        if sigma2.windows(2).any(|w| w[0] < w[1]) {
            return Err(LevyError::InvalidModel(format!("variances must be sorted nonincreasing: {sigma2:?}")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(LevyError::InvalidModel(format!("drift must be finite: {mu:?}")));
        }
        if cutoff_v > 1 {
            return Err(LevyError::InvalidModel(format!("cutoff V must be 0 or 1, got {cutoff_v}")));
        }
        let activity = classify(&measure)?;
        if cutoff_v == 0 && !activity.finite_variation() {
            return Err(LevyError::InvalidModel("cutoff V = 0 requires a finite first moment near the origin".into()));
        }
        Ok(Self {
            dim,
            sigma2,
            mu,
            measure,
            cutoff_v,
            orey_epsilon: None,
            activity,
            cache: Arc::new(FunctionalCache::default()),
        })
    }

    /// Univariate convenience constructor.
    pub fn univariate(sigma2: f64, mu: f64, measure: LevyMeasure, cutoff_v: u8) -> Result<Self> {
        Self::new(vec![sigma2], vec![mu], measure, cutoff_v)
    }

    /// Brownian motion with drift.
    pub fn brownian(sigma2: f64, mu: f64) -> Result<Self> {
        Self::univariate(sigma2, mu, LevyMeasure::zero(1), 0)
    }

    /// Declares Orey's exponent `ε ∈ (0, 2)`. The quotient
    /// `∫_{[-r,r]}u² dλ / r^{2-ε}` is checked on `r = 2^{-k}`, `k = 1..20`.
    pub fn with_orey_epsilon(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 2.0) {
            return Err(LevyError::InvalidModel(format!("Orey exponent must lie in (0, 2), got {eps}")));
        }
        if self.dim != 1 {
            return Err(LevyError::InvalidModel("Orey's exponent is only supported for univariate models".into()));
        }
        let quotients = self.orey_quotients(eps, 1..=20)?;
        let max = quotients.iter().cloned().fold(0.0, f64::max);
        let min = quotients.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) || min < 1e-8 * max {
            return Err(LevyError::InvalidModel(format!(
                "Orey quotient is not bounded away from zero on the dyadic grid (min {min:.3e}, max {max:.3e})"
            )));
        }
        self.orey_epsilon = Some(eps);
        Ok(self)
    }

    /// `∫_{[-r,r]}u² dλ / r^{2-ε}` for `r = 2^{-k}`.
    pub fn orey_quotients(&self, eps: f64, ks: impl IntoIterator<Item = i32>) -> Result<Vec<f64>> {
        ks.into_iter()
            .map(|k| {
                let r = 2f64.powi(-k);
                let m2 = self.measure.integrate(Moment::Second, Interval::closed(-r, r))?;
                Ok(m2 / r.powf(2.0 - eps))
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.measure
    }

    pub fn cutoff_v(&self) -> u8 {
        self.cutoff_v
    }

    pub fn orey_epsilon(&self) -> Option<f64> {
        self.orey_epsilon
    }

    pub fn activity(&self) -> Activity {
        self.activity
    }

    pub fn activity_class(&self) -> ActivityClass {
        if self.measure.is_zero() {
            ActivityClass::None
        } else if self.activity.finite_mass() {
            ActivityClass::Finite
        } else if self.activity.finite_variation() {
            ActivityClass::FiniteVariation
        } else {
            ActivityClass::InfiniteVariation
        }
    }

    /// Number of components with positive variance (the `l` of the multivariate scheme).
    pub fn diffusive_components(&self) -> usize {
        self.sigma2.iter().take_while(|&&s| s > 0.0).count()
    }

    /// The same model with the drift replaced.
    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(self.sigma2.clone(), mu, self.measure.clone(), self.cutoff_v)?;
        m.orey_epsilon = self.orey_epsilon;
        Ok(m)
    }

    /// The same model with every measure integral computed by quadrature.
    pub fn without_closed_forms(&self) -> Self {
        let mut m = self.clone();
        m.measure = self.measure.without_closed_forms();
        m.cache = Arc::new(FunctionalCache::default());
        m
    }

    /// Characteristic exponent
    /// `Ψ(p) = -½⟨p,Σp⟩ + i⟨μ,p⟩ + ∫(e^{i⟨p,x⟩} - i⟨p,x⟩1_{[-V,V]^d}(x) - 1) dλ(x)`.
    pub fn psi(&self, p: &[f64]) -> Result<Complex64> {
        if p.len() != self.dim {
            return Err(LevyError::InvalidModel(format!(
                "expected a point of dimension {}, got {}",
                self.dim,
                p.len()
            )));
        }
        if p.iter().all(|&x| x == 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..self.dim {
            re -= 0.5 * self.sigma2[j] * p[j] * p[j];
            im += self.mu[j] * p[j];
        }
        let jump = self.measure.psi_jump(p, self.cutoff_v)?;
        Ok(Complex64::new(re, im) + jump)
    }

    /// Univariate shorthand for [`LevyModel::psi`].
    pub fn psi1(&self, p: f64) -> Result<Complex64> {
        self.psi(&[p])
    }

    pub fn functionals(&self) -> SmallJumpFunctionals<'_> {
        SmallJumpFunctionals::new(self, &self.cache)
    }
}

fn classify(measure: &LevyMeasure) -> Result<Activity> {
    let hint = measure.hint();
    let dim = measure.dim();
    let mut total_mass: f64 = measure.atoms().iter().map(|a| a.weight).sum();
    let mut first_moment: f64 = measure
        .atoms()
        .iter()
        .filter(|a| a.location.iter().all(|x| x.abs() <= 1.0))
        .map(|a| a.weight * a.location.iter().map(|x| x * x).sum::<f64>().sqrt())
        .sum();
    if dim == 1 && measure.has_density() {
        // integrability: ∫_{[-1,1]} x² dλ and λ(|x| > 1) must be finite
        let inner = measure
            .integrate(Moment::Second, Interval::closed(-1.0, 1.0))
            .map_err(|e| LevyError::InvalidModel(format!("∫_[-1,1] x² dλ does not converge: {e}")))?;
        let (tp, tn) = measure
            .density_tails(1.0)
            .map_err(|e| LevyError::InvalidModel(format!("λ(|x| > 1) does not converge: {e}")))?;
        if !(inner < 1e12 && tp + tn < 1e12) {
            return Err(LevyError::InvalidModel(format!(
                "measure is not a Lévy measure: ∫_[-1,1] x² dλ = {inner:.3e}, λ(|x|>1) = {:.3e}",
                tp + tn
            )));
        }
        let near_mass = measure
            .side_integral(true, 0.0, 1.0, Moment::Mass)
            .and_then(|a| measure.side_integral(false, 0.0, 1.0, Moment::Mass).map(|b| a + b));
        total_mass += match near_mass {
            Ok(v) if v.is_finite() => v + tp + tn,
            _ => f64::INFINITY,
        };
        let near_first = measure
            .side_integral(true, 0.0, 1.0, Moment::AbsFirst)
            .and_then(|a| measure.side_integral(false, 0.0, 1.0, Moment::AbsFirst).map(|b| a + b));
        first_moment += match near_first {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        };
    } else if measure.has_density() {
        let support = measure.multivariate_support().unwrap_or(1.0);
        let mass = measure.punctured_integral(support, &|_| 1.0);
        total_mass += match mass {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        };
        let first = measure.punctured_integral(1.0, &|x| x.iter().map(|c| c * c).sum::<f64>().sqrt());
        first_moment += match first {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        };
        let second = measure.punctured_integral(1.0, &|x| x.iter().map(|c| c * c).sum::<f64>());
        match second {
            Ok(v) if v.is_finite() && v < 1e12 => {}
            _ => return Err(LevyError::InvalidModel("∫_[-1,1]^d |x|² dλ does not converge".into())),
        }
    }
    if hint.infinite_mass {
        total_mass = f64::INFINITY;
    }
    if hint.infinite_variation {
        total_mass = f64::INFINITY;
        first_moment = f64::INFINITY;
    }
    Ok(Activity { total_mass, first_moment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::measure::Atom;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_exponent() {
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        let psi = m.psi1(2.0).unwrap();
        assert_eq!(psi, Complex64::new(-2.0, 2.0));
        assert_eq!(m.psi1(0.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn cauchy_exponent() {
        let m = LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(1.0, 1.0).unwrap(), 1).unwrap();
        assert_relative_eq!(m.psi1(1.0).unwrap().re, -PI, max_relative = 1e-14);
        let q = m.without_closed_forms();
        assert_relative_eq!(q.psi1(1.0).unwrap().re, -PI, max_relative = 1e-9);
    }

    #[test]
    fn validation() {
        assert!(LevyModel::new(vec![1.0, 2.0], vec![0.0, 0.0], LevyMeasure::zero(2), 0).is_err());
        assert!(LevyModel::univariate(-1.0, 0.0, LevyMeasure::zero(1), 0).is_err());
        assert!(LevyModel::univariate(1.0, 0.0, LevyMeasure::zero(1), 2).is_err());
        // V = 0 needs finite variation
        assert!(LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(1.5, 1.0).unwrap(), 0).is_err());
        assert!(LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(0.5, 1.0).unwrap(), 0).is_ok());
        // not a Lévy measure: ∫ x² x^{-4} diverges at 0
        let f: crate::levy_model::measure::Density1 = Arc::new(|x: f64| x.abs().powi(-4));
        assert!(LevyModel::univariate(0.0, 0.0, LevyMeasure::density(f, true), 1).is_err());
    }

    #[test]
    fn activity_classes() {
        let two = LevyMeasure::atomic(1, vec![Atom::at(0.5, 0.5), Atom::at(-0.5, 0.5)]).unwrap();
        let m = LevyModel::univariate(1.0, 0.0, two, 0).unwrap();
        assert_eq!(m.activity_class(), ActivityClass::Finite);
        assert_eq!(m.activity().total_mass, 1.0);
        let vg = LevyModel::univariate(0.0, 0.0, LevyMeasure::variance_gamma(1.0).unwrap(), 1).unwrap();
        assert_eq!(vg.activity_class(), ActivityClass::FiniteVariation);
        assert_relative_eq!(vg.activity().first_moment, 2.0 * (1.0 - (-1.0f64).exp()), max_relative = 1e-10);
        let st = LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(1.5, 1.0).unwrap(), 1).unwrap();
        assert_eq!(st.activity_class(), ActivityClass::InfiniteVariation);
    }

    #[test]
    fn orey_check() {
        let st = LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(0.5, 1.0).unwrap(), 1).unwrap();
        assert!(st.clone().with_orey_epsilon(0.5).is_ok());
        // a compound Poisson measure never satisfies Orey's condition
        let cp = LevyModel::univariate(0.0, 0.0, LevyMeasure::atomic(1, vec![Atom::at(0.5, 1.0)]).unwrap(), 0).unwrap();
        assert!(cp.with_orey_epsilon(1.0).is_err());
        assert!(st.with_orey_epsilon(2.5).is_err());
    }
}
