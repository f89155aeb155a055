//! Lévy measures: an absolutely continuous part, a finite list of atoms and
//! optional closed forms for interval integrals.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{LevyError, Result};
use crate::quadrature::{self, Tolerance};

pub type Density1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type DensityN = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Integral of the density part over `(a, b)`, `a < b`, both endpoints on the
/// same side of the origin (infinite endpoints allowed).
pub type IntervalFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Jump part of the exponent, `∫(e^{ipx} - 1 - ipx 1_{[-V,V]}) ρ(x) dx`, given `(p, V)`.
pub type PsiFn = Arc<dyn Fn(f64, u8) -> Complex64 + Send + Sync>;

pub(crate) const QUAD_TOL: Tolerance = Tolerance::new(1e-15, 1e-12);

/// A point mass of the Lévy measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub location: Vec<f64>,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: Vec<f64>, weight: f64) -> Self {
        Self { location, weight }
    }

    pub fn at(x: f64, weight: f64) -> Self {
        Self { location: vec![x], weight }
    }
}

/// Parametric one-dimensional families with closed-form exponents.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Symmetric stable: `c |x|^{-1-α}`.
    Stable { alpha: f64, c: f64 },
    /// Variance gamma: `e^{-|x|/scale} / |x|`.
    VarianceGamma { scale: f64 },
    /// Tempered stable: `c e^{-λ₊x} x^{-1-Y}` on `x > 0`, `c e^{-λ₋|x|} |x|^{-1-Y}` on `x < 0`.
    Cgmy { c: f64, lambda_plus: f64, lambda_minus: f64, y: f64 },
}

/// User-supplied exact integrals of the density part. Any missing entry falls
/// back to quadrature.
#[derive(Clone, Default)]
pub struct ClosedForms {
    pub mass: Option<IntervalFn>,
    pub moment1: Option<IntervalFn>,
    pub moment2: Option<IntervalFn>,
    pub psi: Option<PsiFn>,
}

impl fmt::Debug for ClosedForms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedForms")
            .field("mass", &self.mass.is_some())
            .field("moment1", &self.moment1.is_some())
            .field("moment2", &self.moment2.is_some())
            .field("psi", &self.psi.is_some())
            .finish()
    }
}

/// Declared activity of a measure whose atom list truncates an infinite series.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActivityHint {
    pub infinite_mass: bool,
    pub infinite_variation: bool,
}

#[derive(Clone)]
pub(crate) enum DensityPart {
    Zero,
    Univariate { f: Density1, symmetric: bool },
    Multivariate { f: DensityN, support: f64 },
}

/// Integrand power used by the interval integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Moment {
    /// `∫ dλ`
    Mass,
    /// `∫ x dλ`
    First,
    /// `∫ |x| dλ`
    AbsFirst,
    /// `∫ x² dλ`
    Second,
}

impl Moment {
    fn weight(self, x: f64) -> f64 {
        match self {
            Moment::Mass => 1.0,
            Moment::First => x,
            Moment::AbsFirst => x.abs(),
            Moment::Second => x * x,
        }
    }
}

/// An interval of the real line with explicit endpoint membership.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        Self { lo, hi, lo_closed, hi_closed }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    /// Membership with endpoints snapped within a relative `1e-12`.
    pub fn contains(&self, x: f64) -> bool {
        let snap = |a: f64| 1e-12 * a.abs().max(x.abs()).max(1e-300);
        let above = if self.lo == f64::NEG_INFINITY {
            true
        } else if (x - self.lo).abs() <= snap(self.lo) {
            self.lo_closed
        } else {
            x > self.lo
        };
        let below = if self.hi == f64::INFINITY {
            true
        } else if (x - self.hi).abs() <= snap(self.hi) {
            self.hi_closed
        } else {
            x < self.hi
        };
        above && below
    }
}

/// Cached constants of a tempered stable family.
#[derive(Clone, Copy, Debug)]
struct CgmyConsts {
    /// `∫_{|x|>1} x dλ`
    outer_first: f64,
    /// `∫ x dλ` (finite when `Y < 1`)
    total_first: f64,
}

/// A Lévy measure on `ℝ^d`.
#[derive(Clone)]
pub struct LevyMeasure {
    dim: usize,
    density: DensityPart,
    family: Option<Family>,
    cgmy: Option<CgmyConsts>,
    atoms: Vec<Atom>,
    closed: ClosedForms,
    use_closed_forms: bool,
    hint: ActivityHint,
}

impl fmt::Debug for LevyMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let density = match &self.density {
            DensityPart::Zero => "none",
            DensityPart::Univariate { .. } => "univariate",
            DensityPart::Multivariate { .. } => "multivariate",
        };
        f.debug_struct("LevyMeasure")
            .field("dim", &self.dim)
            .field("density", &density)
            .field("family", &self.family)
            .field("atoms", &self.atoms.len())
            .field("closed_forms", &self.closed)
            .field("use_closed_forms", &self.use_closed_forms)
            .field("hint", &self.hint)
            .finish()
    }
}

impl LevyMeasure {
    /// The zero measure on `ℝ^dim`.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            density: DensityPart::Zero,
            family: None,
            cgmy: None,
            atoms: Vec::new(),
            closed: ClosedForms::default(),
            use_closed_forms: true,
            hint: ActivityHint::default(),
        }
    }

    /// A purely atomic measure.
    pub fn atomic(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        Self::zero(dim).with_atoms(atoms)
    }

    /// A univariate absolutely continuous measure.
    pub fn density(f: Density1, symmetric: bool) -> Self {
        let mut m = Self::zero(1);
        m.density = DensityPart::Univariate { f, symmetric };
        m
    }

    /// A multivariate density supported in `[-support, support]^dim`.
    pub fn density_nd(dim: usize, f: DensityN, support: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(LevyError::InvalidModel(format!(
                "multivariate densities are supported for dimension 2 or 3, got {dim}"
            )));
        }
        if !(support > 0.0 && support.is_finite()) {
            return Err(LevyError::InvalidModel("density support radius must be positive".into()));
        }
        let mut m = Self::zero(dim);
        m.density = DensityPart::Multivariate { f, support };
        Ok(m)
    }

    /// Symmetric stable measure `c|x|^{-1-α} dx`, `α ∈ (0, 2)`.
    pub fn stable(alpha: f64, c: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) || !(c > 0.0 && c.is_finite()) {
            return Err(LevyError::InvalidModel(format!("stable parameters out of range: alpha={alpha}, c={c}")));
        }
        let f: Density1 = Arc::new(move |x: f64| c * x.abs().powf(-1.0 - alpha));
        let mut m = Self::density(f, true);
        m.family = Some(Family::Stable { alpha, c });
        m.closed = stable_closed_forms(alpha, c);
        Ok(m)
    }

    /// Variance gamma measure `e^{-|x|/scale}/|x| dx`.
    pub fn variance_gamma(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LevyError::InvalidModel(format!("variance gamma scale must be positive, got {scale}")));
        }
        let f: Density1 = Arc::new(move |x: f64| {
            let a = x.abs();
            (-a / scale).exp() / a
        });
        let mut m = Self::density(f, true);
        m.family = Some(Family::VarianceGamma { scale });
        m.closed.psi = Some(Arc::new(move |p: f64, _v: u8| Complex64::new(-(scale * p).powi(2).ln_1p(), 0.0)));
        Ok(m)
    }

    /// Tempered stable (CGMY) measure with `Y ∈ (0, 2) \ {1}`.
    pub fn cgmy(c: f64, lambda_plus: f64, lambda_minus: f64, y: f64) -> Result<Self> {
        if !(c > 0.0 && lambda_plus > 0.0 && lambda_minus > 0.0 && y > 0.0 && y < 2.0) || (y - 1.0).abs() < 1e-12 {
            return Err(LevyError::InvalidModel(format!(
                "tempered stable parameters out of range: c={c}, lambda+={lambda_plus}, lambda-={lambda_minus}, Y={y}"
            )));
        }
        let f: Density1 = Arc::new(move |x: f64| {
            if x > 0.0 {
                c * (-lambda_plus * x).exp() * x.powf(-1.0 - y)
            } else {
                let a = -x;
                c * (-lambda_minus * a).exp() * a.powf(-1.0 - y)
            }
        });
        let symmetric = lambda_plus == lambda_minus;
        let mut m = Self::density(f, symmetric);
        let side = |lam: f64| -> Result<f64> {
            Ok(quadrature::to_infinity(&|u: f64| c * (-lam * u).exp() * u.powf(-y), 1.0, QUAD_TOL)?.value)
        };
        let outer_first = side(lambda_plus)? - side(lambda_minus)?;
        let total_first = if y < 1.0 {
            c * gamma(1.0 - y) * (lambda_plus.powf(y - 1.0) - lambda_minus.powf(y - 1.0))
        } else {
            f64::NAN
        };
        m.family = Some(Family::Cgmy { c, lambda_plus, lambda_minus, y });
        m.cgmy = Some(CgmyConsts { outer_first, total_first });
        Ok(m)
    }

    pub fn with_atoms(mut self, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if a.location.len() != self.dim {
                return Err(LevyError::InvalidModel(format!(
                    "atom at {:?} has dimension {} but the measure has dimension {}",
                    a.location,
                    a.location.len(),
                    self.dim
                )));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(LevyError::InvalidModel(format!("atom weight must be positive, got {}", a.weight)));
            }
            if a.location.iter().all(|&x| x == 0.0) {
                return Err(LevyError::InvalidModel("atom at the origin".into()));
            }
            if a.location.iter().any(|x| !x.is_finite()) {
                return Err(LevyError::InvalidModel(format!("atom location {:?} is not finite", a.location)));
            }
        }
        self.atoms.extend(atoms);
        Ok(self)
    }

    pub fn with_closed_forms(mut self, closed: ClosedForms) -> Self {
        self.closed = closed;
        self
    }

    pub fn with_activity_hint(mut self, hint: ActivityHint) -> Self {
        self.hint = hint;
        self
    }

    /// The same measure with every closed form disabled, so all integrals are
    /// computed by quadrature.
    pub fn without_closed_forms(&self) -> Self {
        let mut m = self.clone();
        m.use_closed_forms = false;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    pub fn hint(&self) -> ActivityHint {
        self.hint
    }

    pub fn uses_closed_forms(&self) -> bool {
        self.use_closed_forms
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.density, DensityPart::Zero)
    }

    pub fn is_zero(&self) -> bool {
        !self.has_density() && self.atoms.is_empty()
    }

    /// True when the measure is invariant under `x ↦ -x` (as far as can be
    /// decided from its description).
    pub fn is_symmetric(&self) -> bool {
        let density_sym = match &self.density {
            DensityPart::Zero => true,
            DensityPart::Univariate { symmetric, .. } => *symmetric,
            DensityPart::Multivariate { .. } => false,
        };
        if !density_sym {
            return false;
        }
        let mut pos: Vec<(Vec<u64>, u64)> = Vec::new();
        let mut neg: Vec<(Vec<u64>, u64)> = Vec::new();
        for a in &self.atoms {
            pos.push((a.location.iter().map(|x| x.to_bits()).collect(), a.weight.to_bits()));
            neg.push((a.location.iter().map(|x| (-x).to_bits()).collect(), a.weight.to_bits()));
        }
        pos.sort();
        neg.sort();
        pos == neg
    }

    /// Density value at a univariate point (zero when there is no density part).
    pub fn density_at(&self, x: f64) -> f64 {
        match &self.density {
            DensityPart::Univariate { f, .. } if x != 0.0 => f(x),
            _ => 0.0,
        }
    }

    fn closed_fn(&self, kind: Moment) -> Option<&IntervalFn> {
        if !self.use_closed_forms {
            return None;
        }
        match kind {
            Moment::Mass => self.closed.mass.as_ref(),
            Moment::First | Moment::AbsFirst => self.closed.moment1.as_ref(),
            Moment::Second => self.closed.moment2.as_ref(),
        }
    }

    /// `∫_a^b |u|^k ρ(±u) du` over `0 ≤ a < b ≤ ∞` for one side of the origin.
    /// Returns the unsigned integral (first moments are taken in absolute value).
    pub(crate) fn side_integral(&self, positive: bool, a: f64, b: f64, kind: Moment) -> Result<f64> {
        debug_assert!(a >= 0.0 && b >= a);
        if a == b {
            return Ok(0.0);
        }
        let f = match &self.density {
            DensityPart::Univariate { f, .. } => f.clone(),
            _ => return Ok(0.0),
        };
        if let Some(cf) = self.closed_fn(kind) {
            let v = if positive { cf(a, b) } else { cf(-b, -a) };
            return Ok(match kind {
                Moment::First | Moment::AbsFirst => v.abs(),
                _ => v,
            });
        }
        let sign = if positive { 1.0 } else { -1.0 };
        let pow = |u: f64| match kind {
            Moment::Mass => 1.0,
            Moment::First | Moment::AbsFirst => u,
            Moment::Second => u * u,
        };
        let g = |u: f64| pow(u) * f(sign * u);
        let mut total = 0.0;
        let split = 1.0f64.max(a);
        if a < split {
            let hi = b.min(split);
            total += if a == 0.0 {
                quadrature::singular_at_origin(&g, hi, QUAD_TOL)?.value
            } else {
                quadrature::log_split(&g, a, hi, QUAD_TOL)?.value
            };
        }
        if b > split {
            total += if b.is_finite() {
                quadrature::log_split(&g, split, b, QUAD_TOL)?.value
            } else {
                quadrature::to_infinity(&g, split, QUAD_TOL)?.value
            };
        }
        Ok(total)
    }

    /// Density-part integral over a univariate interval.
    fn density_integral(&self, kind: Moment, iv: Interval) -> Result<f64> {
        if !matches!(self.density, DensityPart::Univariate { .. }) {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if iv.hi > 0.0 {
            let a = iv.lo.max(0.0);
            total += self.side_integral(true, a, iv.hi, kind)?;
        }
        if iv.lo < 0.0 {
            let b = (-iv.hi).max(0.0);
            let v = self.side_integral(false, b, -iv.lo, kind)?;
            total += if kind == Moment::First { -v } else { v };
        }
        Ok(total)
    }

    /// `∫_I g dλ` for a univariate interval, atoms included per endpoint membership.
    pub fn integrate(&self, kind: Moment, iv: Interval) -> Result<f64> {
        if self.dim != 1 {
            return Err(LevyError::InvalidModel("interval integrals need a univariate measure".into()));
        }
        let mut total = self.density_integral(kind, iv)?;
        for a in &self.atoms {
            let x = a.location[0];
            if iv.contains(x) {
                total += a.weight * kind.weight(x);
            }
        }
        Ok(total)
    }

    /// Density-part mass of `{|x| > r}` on each side `(positive, negative)`.
    pub fn density_tails(&self, r: f64) -> Result<(f64, f64)> {
        Ok((
            self.side_integral(true, r, f64::INFINITY, Moment::Mass)?,
            self.side_integral(false, r, f64::INFINITY, Moment::Mass)?,
        ))
    }

    /// Jump part of the exponent: `∫(e^{i⟨p,x⟩} - 1 - i⟨p,x⟩1_{[-V,V]^d}(x)) dλ(x)`.
    pub fn psi_jump(&self, p: &[f64], cutoff_v: u8) -> Result<Complex64> {
        if p.iter().all(|&x| x == 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut total = Complex64::new(0.0, 0.0);
        let v = cutoff_v as f64;
        for a in &self.atoms {
            let u: f64 = a.location.iter().zip(p).map(|(x, q)| x * q).sum();
            let inside = a.location.iter().all(|x| x.abs() <= v);
            let re = -2.0 * (0.5 * u).sin().powi(2);
            let im = if inside { sin_minus_identity(u) } else { u.sin() };
            total += Complex64::new(re, im) * a.weight;
        }
        match &self.density {
            DensityPart::Zero => {}
            DensityPart::Univariate { .. } => total += self.density_psi_1d(p[0], cutoff_v)?,
            DensityPart::Multivariate { f, support } => total += density_psi_nd(f, *support, p, cutoff_v)?,
        }
        Ok(total)
    }

    fn density_psi_1d(&self, p: f64, cutoff_v: u8) -> Result<Complex64> {
        if self.use_closed_forms {
            if let Some(psi) = &self.closed.psi {
                return Ok(psi(p, cutoff_v));
            }
            if let Some(fam) = &self.family {
                return Ok(family_psi(fam, self.cgmy, p, cutoff_v));
            }
        }
        self.density_psi_quadrature(p, cutoff_v)
    }

    fn density_psi_quadrature(&self, p: f64, cutoff_v: u8) -> Result<Complex64> {
        let (f, symmetric) = match &self.density {
            DensityPart::Univariate { f, symmetric } => (f.clone(), *symmetric),
            _ => return Ok(Complex64::new(0.0, 0.0)),
        };
        let even = |u: f64| f(u) + f(-u);
        let odd = |u: f64| f(u) - f(-u);
        let near_re = |u: f64| -2.0 * (0.5 * p * u).sin().powi(2) * even(u);
        let mut re = quadrature::singular_at_origin(&near_re, 1.0, QUAD_TOL)?.value;
        let omega = p.abs();
        let far_cos = quadrature::oscillatory_tail(&|u: f64| (p * u).cos() * even(u), 1.0, omega, QUAD_TOL)?;
        let far_mass = quadrature::to_infinity(&even, 1.0, QUAD_TOL)?;
        re += far_cos.value - far_mass.value;
        let mut im = 0.0;
        if !symmetric {
            let compensated = cutoff_v == 1;
            let near_im = |u: f64| {
                let s = if compensated { sin_minus_identity(p * u) } else { (p * u).sin() };
                s * odd(u)
            };
            im += quadrature::singular_at_origin(&near_im, 1.0, QUAD_TOL)?.value;
            im += quadrature::oscillatory_tail(&|u: f64| (p * u).sin() * odd(u), 1.0, omega, QUAD_TOL)?.value;
        }
        Ok(Complex64::new(re, im))
    }

    /// `∫_{|x|>R} e^{ipx} ρ(x) dx` for the univariate density part, `R > 0`.
    pub(crate) fn density_far_transform(&self, p: f64, radius: f64) -> Result<Complex64> {
        let (f, symmetric) = match &self.density {
            DensityPart::Univariate { f, symmetric } => (f.clone(), *symmetric),
            _ => return Ok(Complex64::new(0.0, 0.0)),
        };
        if p == 0.0 {
            let (a, b) = self.density_tails(radius)?;
            return Ok(Complex64::new(a + b, 0.0));
        }
        if let (true, Some(&Family::Stable { alpha, c })) = (self.use_closed_forms, self.family.as_ref()) {
            // ∫_R^∞ e^{iqu} u^{-1-α} du = R^{-α} E_{1+α}(-iqR)
            let z = Complex64::new(0.0, -p.abs() * radius);
            return Ok(Complex64::new(2.0 * c * radius.powf(-alpha) * expint(1.0 + alpha, z).re, 0.0));
        }
        let even = |u: f64| f(u) + f(-u);
        let re = quadrature::oscillatory_tail(&|u: f64| (p * u).cos() * even(u), radius, p.abs(), QUAD_TOL)?.value;
        let im = if symmetric {
            0.0
        } else {
            let odd = |u: f64| f(u) - f(-u);
            quadrature::oscillatory_tail(&|u: f64| (p * u).sin() * odd(u), radius, p.abs(), QUAD_TOL)?.value
        };
        Ok(Complex64::new(re, im))
    }

    /// Multivariate density integral over a box (zero for other density kinds).
    pub(crate) fn box_integral(&self, lo: &[f64], hi: &[f64], g: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        match &self.density {
            DensityPart::Multivariate { f, support } => {
                let l: Vec<f64> = lo.iter().map(|x| x.max(-support)).collect();
                let u: Vec<f64> = hi.iter().map(|x| x.min(*support)).collect();
                if l.iter().zip(&u).any(|(a, b)| a >= b) {
                    return Ok(0.0);
                }
                let fx = |x: &[f64]| f(x) * g(x);
                Ok(quadrature::integrate_box(&fx, &l, &u, QUAD_TOL, 8)?.value)
            }
            _ => Ok(0.0),
        }
    }

    /// Multivariate density integral over `[-a, a]^d` with the origin removed.
    pub(crate) fn punctured_integral(&self, a: f64, g: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        match &self.density {
            DensityPart::Multivariate { f, support } => {
                let a = a.min(*support);
                let fx = |x: &[f64]| f(x) * g(x);
                Ok(quadrature::punctured_cube(&fx, a, self.dim, QUAD_TOL)?.value)
            }
            _ => Ok(0.0),
        }
    }

    pub(crate) fn multivariate_support(&self) -> Option<f64> {
        match &self.density {
            DensityPart::Multivariate { support, .. } => Some(*support),
            _ => None,
        }
    }
}

/// `sin(u) - u`, accurate for small `u`.
pub fn sin_minus_identity(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let u2 = u * u;
        -u * u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)))
    } else {
        u.sin() - u
    }
}

/// `cos(u) - 1` without cancellation.
pub fn cos_minus_one(u: f64) -> f64 {
    -2.0 * (0.5 * u).sin().powi(2)
}

fn stable_closed_forms(alpha: f64, c: f64) -> ClosedForms {
    // integrals over (a, b) on one side; by symmetry the negative side mirrors
    let to_pos = |a: f64, b: f64| if b <= 0.0 { (-b, -a, -1.0) } else { (a, b, 1.0) };
    let mass: IntervalFn = Arc::new(move |a, b| {
        let (a, b, _) = to_pos(a, b);
        c * (a.powf(-alpha) - b.powf(-alpha)) / alpha
    });
    let moment1: IntervalFn = Arc::new(move |a, b| {
        let (a, b, s) = to_pos(a, b);
        let v = if (alpha - 1.0).abs() < 1e-15 {
            c * (b / a).ln()
        } else {
            c * (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha)
        };
        s * v
    });
    let moment2: IntervalFn = Arc::new(move |a, b| {
        let (a, b, _) = to_pos(a, b);
        c * (b.powf(2.0 - alpha) - a.powf(2.0 - alpha)) / (2.0 - alpha)
    });
    let psi: PsiFn = Arc::new(move |p: f64, _v: u8| {
        let ap = p.abs();
        let re = if (alpha - 1.0).abs() < 1e-15 {
            -c * PI * ap
        } else {
            -2.0 * c * ap.powf(alpha) * gamma(1.0 - alpha) * (0.5 * PI * alpha).cos() / alpha
        };
        Complex64::new(re, 0.0)
    });
    ClosedForms { mass: Some(mass), moment1: Some(moment1), moment2: Some(moment2), psi: Some(psi) }
}

fn family_psi(fam: &Family, cgmy: Option<CgmyConsts>, p: f64, cutoff_v: u8) -> Complex64 {
    match *fam {
        Family::Cgmy { c, lambda_plus, lambda_minus, y } => {
            let consts = cgmy.expect("tempered stable constants are computed at construction");
            let ip = Complex64::new(0.0, p);
            let lp = Complex64::new(lambda_plus, 0.0);
            let lm = Complex64::new(lambda_minus, 0.0);
            let compensated =
                (lp - ip).powf(y) - lambda_plus.powf(y) + ip * y * lambda_plus.powf(y - 1.0) + (lm + ip).powf(y)
                    - lambda_minus.powf(y)
                    - ip * y * lambda_minus.powf(y - 1.0);
            let base = compensated * (c * gamma(-y));
            let shift = if cutoff_v == 1 { consts.outer_first } else { consts.total_first };
            base + ip * shift
        }
        // the other families carry an explicit closed-form exponent
        _ => unreachable!("closed-form exponent registered at construction"),
    }
}

/// Generalized exponential integral `E_n(z) = ∫_1^∞ e^{-zt} t^{-n} dt` for
/// `n > 1`, `Re z ≥ 0`, `z ≠ 0`.
pub(crate) fn expint(n: f64, z: Complex64) -> Complex64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    let one = Complex64::new(1.0, 0.0);
    if z.norm() >= 1.0 {
        // modified Lentz evaluation of the even continued fraction
        let tiny = 1e-300;
        let mut b = z + n;
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = one / b;
        let mut h = d;
        for i in 1..200_000 {
            let a = -(i as f64) * (n - 1.0 + i as f64);
            b += 2.0;
            d = one / (d * a + b);
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del - one).norm() < 1e-16 {
                break;
            }
        }
        return h * (-z).exp();
    }
    let m = n.round();
    if (n - m).abs() < 1e-12 {
        // integer order: E_1 by its series, then E_{k+1} = (e^{-z} - z E_k)/k
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = one;
        for k in 1..200 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        let mut e = -(z.ln()) - EULER - sum;
        for k in 1..(m as usize) {
            e = ((-z).exp() - z * e) / k as f64;
        }
        return e;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = one;
    for k in 0..200 {
        if k > 0 {
            power *= -z / k as f64;
        }
        let add = power / (k as f64 + 1.0 - n);
        sum += add;
        if k > 2 && add.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    z.powf(n - 1.0) * gamma(1.0 - n) - sum
}

fn density_psi_nd(f: &DensityN, support: f64, p: &[f64], cutoff_v: u8) -> Result<Complex64> {
    let d = p.len();
    let v = cutoff_v as f64;
    let re = |x: &[f64]| {
        let u: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
        cos_minus_one(u) * f(x)
    };
    let im = |x: &[f64]| {
        let u: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
        let inside = x.iter().all(|c| c.abs() <= v);
        (if inside { sin_minus_identity(u) } else { u.sin() }) * f(x)
    };
    let tol = Tolerance::new(1e-12, 1e-9);
    let r = quadrature::punctured_cube(&re, support, d, tol)?.value;
    let i = quadrature::punctured_cube(&im, support, d, tol)?.value;
    Ok(Complex64::new(r, i))
}
