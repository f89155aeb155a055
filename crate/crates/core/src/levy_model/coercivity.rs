use std::f64::consts::PI;

use super::measure::{Interval, Moment};
use super::model::LevyModel;
use crate::error::{LevyError, Result};

/// Constants of the bound `|e^{tΨ(p)}| ≤ exp(-C t |p|^ε)` for `|p| ≥ P`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coercivity {
    pub p: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Constant valid for the exact exponent (`½σ̂²` in the diffusive case).
    pub c_exact: f64,
}

impl Coercivity {
    /// Radius beyond which `exp(-C t |p|^ε)` falls below `level`.
    pub fn radius(&self, t: f64, level: f64, exact: bool) -> f64 {
        let c = if exact { self.c_exact } else { self.c };
        let r = ((-level.ln()) / (c * t)).powf(1.0 / self.epsilon);
        r.max(self.p)
    }
}

/// Largest Orey grid exponent `k` (so the smallest radius is `2^{-K}`).
const OREY_GRID: i32 = 20;

/// Coercivity constants: with `σ̂² > 0` these are `P = 0`, `ε = 2`,
/// `C = ½(2/π)²σ̂²`; otherwise `ε` is the declared Orey exponent and `(P, C)`
/// come from `A₀ = min_k ∫_{[-r,r]}u² dλ / r^{2-ε}` on `r = 2^{-k}`.
pub fn coercivity_constants(model: &LevyModel) -> Result<Coercivity> {
    let f = model.functionals();
    let s = f.sigma_hat2();
    if s > 0.0 {
        let c = 0.5 * (2.0 / PI).powi(2) * s;
        return Ok(Coercivity { p: 0.0, c, epsilon: 2.0, c_exact: 0.5 * s });
    }
    let eps =
        model.orey_epsilon().ok_or_else(|| LevyError::NoDensity("σ² = 0 and no Orey exponent was declared".into()))?;
    let mut a0 = f64::INFINITY;
    for k in 0..=OREY_GRID {
        let r = 2f64.powi(-k);
        let m2 = model.measure().integrate(Moment::Second, Interval::closed(-r, r))?;
        a0 = a0.min(m2 / r.powf(2.0 - eps));
    }
    // between grid points the quotient can drop by at most 2^{-(2-ε)}
    a0 *= 2f64.powf(-(2.0 - eps));
    if !(a0 > 0.0) {
        return Err(LevyError::NoDensity("Orey quotient vanishes on the dyadic grid".into()));
    }
    let r0 = 1.0;
    let c = 8.0 / (9.0 * PI * PI) * a0 * (0.5 * PI).powf(2.0 - eps);
    Ok(Coercivity { p: PI / (2.0 * r0), c, epsilon: eps, c_exact: c })
}
