//! Characteristic exponent `Ψ^h` of the lattice chain and its error terms.

use num_complex::Complex64;

use super::scheme::{h_star, stencil_valid, LatticeSpec, SchemeKind};
use super::weights::{build_weights, CellWeights};
use crate::error::{LevyError, Result};
use crate::levy_model::{cos_minus_one, sin_minus_identity, LevyModel};

/// A model discretized on a lattice with a given drift scheme.
#[derive(Clone, Debug)]
pub struct Discretization {
    model: LevyModel,
    spec: LatticeSpec,
    scheme: SchemeKind,
    weights: CellWeights,
    h_star: f64,
}

/// `Ψ^h - Ψ = σ² f_h + μ g_h + l_h` evaluated at one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorDecomposition {
    pub f_h: f64,
    pub g_h: Complex64,
    pub l_h: Complex64,
    /// `σ² f_h + μ g_h + l_h`.
    pub total: Complex64,
}

impl Discretization {
    /// Builds the lattice weights after checking `h ≤ h*`.
    pub fn new(model: &LevyModel, spec: &LatticeSpec, scheme: SchemeKind) -> Result<Self> {
        scheme.check(model)?;
        let hs = h_star(model, scheme)?;
        if spec.h > hs {
            return Err(LevyError::StepTooLarge { h: spec.h, h_star: hs });
        }
        if hs.is_finite() && !stencil_valid(model, scheme, spec.h)? {
            return Err(LevyError::StepTooLarge { h: spec.h, h_star: hs });
        }
        let weights = build_weights(model, spec)?;
        Ok(Self { model: model.clone(), spec: *spec, scheme, weights, h_star: hs })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn weights(&self) -> &CellWeights {
        &self.weights
    }

    pub fn h(&self) -> f64 {
        self.spec.h
    }

    pub fn h_star(&self) -> f64 {
        self.h_star
    }

    /// Nearest-neighbour rates `(q(+e_j), q(-e_j))` excluding the jump rates.
    pub fn neighbour_rates(&self, j: usize) -> (f64, f64) {
        let h = self.spec.h;
        let a = (self.model.sigma2()[j] + self.weights.c0[j]) / (2.0 * h * h);
        let d = self.model.mu()[j] - self.weights.mu_h[j];
        if self.scheme.two_sided(&self.model, j) {
            (a + d / (2.0 * h), a - d / (2.0 * h))
        } else if d >= 0.0 {
            (a + d / h, a)
        } else {
            (a, a - d / h)
        }
    }

    /// `Ψ^h(p)`.
    pub fn psi_h(&self, p: &[f64]) -> Result<Complex64> {
        if p.len() != self.model.dim() {
            return Err(LevyError::InvalidLattice(format!(
                "frequency has dimension {} but the model has dimension {}",
                p.len(),
                self.model.dim()
            )));
        }
        let h = self.spec.h;
        let mut total = Complex64::new(0.0, 0.0);
        for (j, &pj) in p.iter().enumerate() {
            let a = self.model.sigma2()[j] + self.weights.c0[j];
            total += a * cos_minus_one(h * pj) / (h * h);
            let d = self.model.mu()[j] - self.weights.mu_h[j];
            total += d * self.drift_symbol(j, pj);
        }
        total += self.jump_sum(p);
        if let Some(far) = &self.weights.far {
            total += far.contribution(p[0], h)?;
        }
        Ok(total)
    }

    /// Fourier symbol of the discrete first-derivative operator on axis `j`.
    fn drift_symbol(&self, j: usize, p: f64) -> Complex64 {
        let h = self.spec.h;
        let u = h * p;
        if self.scheme.two_sided(&self.model, j) {
            return Complex64::new(0.0, u.sin() / h);
        }
        let d = self.model.mu()[j] - self.weights.mu_h[j];
        if d >= 0.0 {
            Complex64::new(cos_minus_one(u), u.sin()) / h
        } else {
            Complex64::new(-cos_minus_one(u), u.sin()) / h
        }
    }

    /// `Σ_s c_s (e^{i⟨p,s⟩} - 1)` over the enumerated jumps.
    fn jump_sum(&self, p: &[f64]) -> Complex64 {
        let w = &self.weights;
        let h = self.spec.h;
        if w.dim == 1 {
            return jump_sum_1d(&w.offsets, &w.rates, h * p[0]);
        }
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..w.len() {
            let u: f64 = w.offset(i).iter().zip(p).map(|(&k, &q)| k as f64 * h * q).sum();
            total += Complex64::new(cos_minus_one(u), u.sin()) * w.rates[i];
        }
        total
    }

    /// `Ψ^h(p) - Ψ(p)` split into diffusion, drift and jump parts
    /// (univariate models).
    pub fn error_decomposition(&self, p: f64) -> Result<ErrorDecomposition> {
        if self.model.dim() != 1 {
            return Err(LevyError::InvalidModel("error decomposition is univariate".into()));
        }
        let h = self.spec.h;
        let sigma2 = self.model.sigma2()[0];
        let mu = self.model.mu()[0];
        let f_h = diffusion_error(h, p);
        let g_h = if self.scheme.two_sided(&self.model, 0) {
            Complex64::new(0.0, sin_minus_identity(h * p) / h)
        } else {
            self.drift_symbol(0, p) - Complex64::new(0.0, p)
        };
        let w = &self.weights;
        let mut l_h = w.c0[0] * cos_minus_one(h * p) / (h * h) - w.mu_h[0] * self.drift_symbol(0, p);
        l_h += self.jump_sum(&[p]);
        if let Some(far) = &w.far {
            l_h += far.contribution(p, h)?;
        }
        l_h -= self.model.measure().psi_jump(&[p], self.model.cutoff_v())?;
        Ok(ErrorDecomposition { f_h, g_h, l_h, total: sigma2 * f_h + mu * g_h + l_h })
    }
}

/// `Σ_k c_k (e^{iku} - 1)` using a phase recurrence re-anchored every 64 steps.
fn jump_sum_1d(offsets: &[i64], rates: &[f64], u: f64) -> Complex64 {
    const ANCHOR: i64 = 64;
    let step = Complex64::new(1.0 + cos_minus_one(u), u.sin());
    let mut total = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut last: Option<i64> = None;
    for (&k, &c) in offsets.iter().zip(rates) {
        let term = if k.abs() <= ANCHOR {
            let v = k as f64 * u;
            Complex64::new(cos_minus_one(v), v.sin())
        } else {
            match last {
                Some(prev) if k == prev + 1 && k.rem_euclid(ANCHOR) != 0 => phase *= step,
                _ => {
                    let v = k as f64 * u;
                    phase = Complex64::new(v.cos(), v.sin());
                }
            }
            last = Some(k);
            phase - 1.0
        };
        total += term * c;
    }
    total
}

/// `f_h(p) = (cos(hp) - 1)/h² + p²/2`, by series when `hp` is small.
pub fn diffusion_error(h: f64, p: f64) -> f64 {
    let x = h * p;
    if x.abs() < 0.5 {
        let x2 = x * x;
        let s = 1.0 - x2 / 30.0 * (1.0 - x2 / 56.0 * (1.0 - x2 / 90.0 * (1.0 - x2 / 132.0)));
        p * p * p * p * h * h / 24.0 * s
    } else {
        (cos_minus_one(x) + 0.5 * x * x) / (h * h)
    }
}

/// `Ψ^h(p)` for a freshly built discretization.
pub fn psi_h(model: &LevyModel, spec: &LatticeSpec, scheme: SchemeKind, p: &[f64]) -> Result<Complex64> {
    Discretization::new(model, spec, scheme)?.psi_h(p)
}

/// `(σ² f_h, μ g_h, l_h)` at `p` for a univariate model.
pub fn psi_error_decomposition(
    model: &LevyModel,
    spec: &LatticeSpec,
    scheme: SchemeKind,
    p: f64,
) -> Result<(f64, Complex64, Complex64)> {
    let e = Discretization::new(model, spec, scheme)?.error_decomposition(p)?;
    Ok((model.sigma2()[0] * e.f_h, model.mu()[0] * e.g_h, e.l_h))
}
