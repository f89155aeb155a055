use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::weights::drift_terms;
use crate::error::{LevyError, Result};
use crate::levy_model::LevyModel;

/// Drift discretization of the chain generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// Centred differences for the drift (univariate, `σ² > 0`).
    Scheme1,
    /// One-sided upwind differences for the drift (univariate).
    Scheme2,
    /// Centred differences on diffusive axes, upwind on the others.
    Multivariate,
}

impl SchemeKind {
    /// Whether axis `j` uses the centred drift stencil.
    pub fn two_sided(self, model: &LevyModel, j: usize) -> bool {
        match self {
            SchemeKind::Scheme1 => true,
            SchemeKind::Scheme2 => false,
            SchemeKind::Multivariate => model.sigma2()[j] > 0.0,
        }
    }

    pub(crate) fn check(self, model: &LevyModel) -> Result<()> {
        match self {
            SchemeKind::Scheme1 | SchemeKind::Scheme2 if model.dim() != 1 => Err(LevyError::SchemeInvalid(format!(
                "{self} is univariate; use the multivariate scheme for dimension {}",
                model.dim()
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Scheme1 => "scheme1",
            SchemeKind::Scheme2 => "scheme2",
            SchemeKind::Multivariate => "multivariate",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = LevyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scheme1" | "1" => Ok(SchemeKind::Scheme1),
            "scheme2" | "2" => Ok(SchemeKind::Scheme2),
            "multivariate" | "mv" => Ok(SchemeKind::Multivariate),
            _ => Err(LevyError::Config(format!("unknown scheme `{s}`"))),
        }
    }
}

/// Lattice `Z_h^d` with the truncation box `[-M, M]^d` and jump enumeration
/// controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub h: f64,
    pub dim: usize,
    /// Half-width of the truncation box.
    pub m: f64,
    /// Relative tail mass below which far jumps are dropped.
    pub tail_cut: f64,
    /// Largest radius over which cells are enumerated one by one.
    pub window_max: f64,
}

impl LatticeSpec {
    pub const DEFAULT_TAIL_CUT: f64 = 1e-10;
    pub const DEFAULT_WINDOW_MAX: f64 = 64.0;

    pub fn new(h: f64, dim: usize, m: f64) -> Result<Self> {
        let spec = Self { h, dim, m, tail_cut: Self::DEFAULT_TAIL_CUT, window_max: Self::DEFAULT_WINDOW_MAX };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tail_cut(mut self, tail_cut: f64) -> Result<Self> {
        self.tail_cut = tail_cut;
        self.validate()?;
        Ok(self)
    }

    pub fn with_window_max(mut self, window_max: f64) -> Result<Self> {
        self.window_max = window_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LevyError::InvalidLattice(msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("step h must be positive and finite, got {}", self.h));
        }
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if !(self.m >= self.h && self.m.is_finite()) {
            return bad(format!("box half-width M = {} must be finite and at least h = {}", self.m, self.h));
        }
        if !(self.tail_cut > 0.0 && self.tail_cut <= 1e-3) {
            return bad(format!("tail_cut must lie in (0, 1e-3], got {}", self.tail_cut));
        }
        if !(self.window_max >= 1.0 && self.window_max.is_finite()) {
            return bad(format!("window_max must be at least 1, got {}", self.window_max));
        }
        Ok(())
    }

    /// Number of lattice points per axis on each side of the origin in `S_M`.
    pub fn half_width(&self) -> i64 {
        (self.m / self.h + 1e-9).floor() as i64
    }
}

/// Whether the nearest-neighbour rates of axis `j` are nonnegative at step `h`.
pub fn stencil_valid(model: &LevyModel, scheme: SchemeKind, h: f64) -> Result<bool> {
    let terms = drift_terms(model, h)?;
    for j in 0..model.dim() {
        if !scheme.two_sided(model, j) {
            continue;
        }
        let a = (model.sigma2()[j] + terms.c0[j]) / (2.0 * h * h);
        let d = (model.mu()[j] - terms.mu_h[j]) / (2.0 * h);
        if a + d + terms.c_plus[j] < 0.0 || a - d + terms.c_minus[j] < 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

const H_STAR_GRID: std::ops::RangeInclusive<i32> = -16..=4;

/// Samples per dyadic interval that cannot be certified at once.
const H_STAR_SAMPLES: usize = 64;

/// Largest number of atom breakpoints examined per dyadic interval.
const H_STAR_BREAKPOINTS: usize = 4096;

/// Largest `h*` such that the centred drift stencil has nonnegative rates for
/// every `h ≤ h*`.
///
/// On each dyadic interval `[2^j, 2^{j+1}]`, `j = -16..=4`, validity is first
/// certified by the bound `σ² − (|μ| + 2κ(2^{j-1}))·2^{j+1} > 0`. Intervals that
/// fail the bound are sampled geometrically and at every step where a cell
/// boundary crosses an atom; the first failing sample is refined by bisection
/// to `1e-6` relative accuracy. Upwind axes impose no restriction, and neither
/// does a symmetric measure without drift; both cases return `∞`.
pub fn h_star(model: &LevyModel, scheme: SchemeKind) -> Result<f64> {
    scheme.check(model)?;
    let axes: Vec<usize> = (0..model.dim()).filter(|&j| scheme.two_sided(model, j)).collect();
    if axes.is_empty() || (model.measure().is_symmetric() && axes.iter().all(|&j| model.mu()[j] == 0.0)) {
        return Ok(f64::INFINITY);
    }
    let f = model.functionals();
    let mut last_valid: Option<f64> = None;
    for j in H_STAR_GRID {
        let (lo, hi) = (2f64.powi(j), 2f64.powi(j + 1));
        if last_valid.is_some() {
            let kappa = if model.cutoff_v() == 0 { 0.0 } else { f.kappa(0.5 * lo)? };
            let certified = axes.iter().all(|&a| {
                let s2 = model.sigma2()[a];
                s2 - (model.mu()[a].abs() + 2.0 * kappa) * hi > 1e-12 * s2
            });
            if certified {
                last_valid = Some(hi);
                continue;
            }
        }
        for h in interval_samples(model, &axes, lo, hi) {
            if stencil_valid(model, scheme, h)? {
                last_valid = Some(h);
                continue;
            }
            let Some(lo) = last_valid else {
                return Err(LevyError::SchemeInvalid(format!(
                    "centred drift stencil has negative rates already at h = {h:e}; use scheme 2"
                )));
            };
            return bisect(model, scheme, lo, h);
        }
    }
    Ok(f64::INFINITY)
}

/// Ascending trial steps in `[lo, hi]`: a geometric grid plus each step at
/// which a cell boundary `(k + ½)h` passes through an atom, with neighbours on
/// both sides.
fn interval_samples(model: &LevyModel, axes: &[usize], lo: f64, hi: f64) -> Vec<f64> {
    let mut out: Vec<f64> =
        (0..=H_STAR_SAMPLES).map(|i| lo * (hi / lo).powf(i as f64 / H_STAR_SAMPLES as f64)).collect();
    let mut breaks = Vec::new();
    for atom in model.measure().atoms() {
        for &a in axes {
            let x = atom.location[a].abs();
            // (k + ½)h = x  ⇔  h = 2x/(2k + 1)
            let k_lo = ((2.0 * x / hi - 1.0) / 2.0).ceil().max(0.0) as i64;
            let k_hi = ((2.0 * x / lo - 1.0) / 2.0).floor() as i64;
            for k in k_lo..=k_hi {
                breaks.push(2.0 * x / (2 * k + 1) as f64);
                if breaks.len() > H_STAR_BREAKPOINTS {
                    break;
                }
            }
        }
    }
    for b in breaks.into_iter().take(H_STAR_BREAKPOINTS) {
        out.extend([b * (1.0 - 1e-9), b, b * (1.0 + 1e-9)]);
    }
    out.retain(|&h| h >= lo && h <= hi);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn bisect(model: &LevyModel, scheme: SchemeKind, mut lo: f64, mut hi: f64) -> Result<f64> {
    while hi - lo > 1e-6 * lo {
        let mid = 0.5 * (lo + hi);
        if stencil_valid(model, scheme, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{Atom, LevyMeasure};
    use approx::assert_relative_eq;

    #[test]
    fn h_star_sees_holes_between_dyadic_steps() {
        // valid on (0, 1/3] and again on [0.4, 1.2) once the atom sits in the cell at -h
        let measure = LevyMeasure::atomic(1, vec![Atom::at(-0.6, 5.0)]).unwrap();
        let m = LevyModel::univariate(1.0, 3.0, measure, 0).unwrap();
        assert!(stencil_valid(&m, SchemeKind::Scheme1, 0.5).unwrap());
        assert!(!stencil_valid(&m, SchemeKind::Scheme1, 0.35).unwrap());
        assert_relative_eq!(h_star(&m, SchemeKind::Scheme1).unwrap(), 1.0 / 3.0, max_relative = 1e-5);
    }

    #[test]
    fn brownian_h_star() {
        // σ²/(2h²) ≥ |μ|/(2h) gives h* = σ²/|μ|
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        assert_relative_eq!(h_star(&m, SchemeKind::Scheme1).unwrap(), 1.0, max_relative = 1e-6);
        let m = LevyModel::brownian(1.0, 2.0).unwrap();
        assert_relative_eq!(h_star(&m, SchemeKind::Scheme1).unwrap(), 0.5, max_relative = 1e-6);
        let m = LevyModel::brownian(1.0, 4.0).unwrap();
        assert_relative_eq!(h_star(&m, SchemeKind::Scheme1).unwrap(), 0.25, max_relative = 1e-6);
        assert_eq!(h_star(&m, SchemeKind::Scheme2).unwrap(), f64::INFINITY);
        assert_eq!(h_star(&LevyModel::brownian(1.0, 0.0).unwrap(), SchemeKind::Scheme1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn symmetric_jumps_never_restrict() {
        let two = LevyMeasure::atomic(1, vec![Atom::at(0.5, 0.5), Atom::at(-0.5, 0.5)]).unwrap();
        let m = LevyModel::univariate(1.0, 0.0, two, 0).unwrap();
        assert_eq!(h_star(&m, SchemeKind::Scheme1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn scheme_requirements() {
        let m = LevyModel::brownian(0.0, 1.0).unwrap();
        assert!(matches!(h_star(&m, SchemeKind::Scheme1), Err(LevyError::SchemeInvalid(_))));
        let m2 = LevyModel::new(vec![1.0, 1.0], vec![0.0, 0.0], LevyMeasure::zero(2), 0).unwrap();
        assert!(matches!(h_star(&m2, SchemeKind::Scheme2), Err(LevyError::SchemeInvalid(_))));
        assert_eq!(h_star(&m2, SchemeKind::Multivariate).unwrap(), f64::INFINITY);
    }

    #[test]
    fn lattice_validation() {
        assert!(LatticeSpec::new(0.0, 1, 1.0).is_err());
        assert!(LatticeSpec::new(0.5, 1, 0.25).is_err());
        assert!(LatticeSpec::new(0.5, 1, 2.0).unwrap().with_tail_cut(0.1).is_err());
        assert_eq!(LatticeSpec::new(0.1, 1, 5.0).unwrap().half_width(), 50);
    }
}
