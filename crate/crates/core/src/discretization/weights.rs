//! Jump rates `c_s^h = λ(A_s^h)`, the small-jump variance `c_0^h` and the
//! compensator `μ^h` of the lattice chain.

use rayon::prelude::*;

use super::cells::{cell_index, density_cell_masses};
use super::scheme::LatticeSpec;
use crate::error::{LevyError, Result};
use crate::levy_model::{Interval, LevyMeasure, LevyModel, Moment};

/// Jumps beyond the enumeration window whose transform is folded back onto the
/// lattice in closed form.
#[derive(Clone, Debug)]
pub struct FarField {
    /// Distance from the origin where enumeration stopped, `(K + ½)h`.
    pub radius: f64,
    /// Mass beyond the radius.
    pub tail: f64,
    measure: LevyMeasure,
}

impl FarField {
    /// `Σ_{|k|>K} c_k (e^{ikhp} - 1)`.
    pub(crate) fn contribution(&self, p: f64, h: f64) -> Result<num_complex::Complex64> {
        use num_complex::Complex64;
        if p == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let period = 2.0 * std::f64::consts::PI / h;
        let mut total = Complex64::new(-self.tail, 0.0);
        for m in -2i32..=2 {
            let w = p + m as f64 * period;
            let arg = 0.5 * w * h;
            let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
            total += self.measure.density_far_transform(w, self.radius)? * sinc;
        }
        Ok(total)
    }
}

/// Everything the generator needs from the Lévy measure at step `h`.
#[derive(Clone, Debug)]
pub struct CellWeights {
    pub h: f64,
    pub dim: usize,
    /// Jump offsets in lattice units, `dim` entries per jump.
    pub offsets: Vec<i64>,
    /// `c_s^h` for each offset, all positive.
    pub rates: Vec<f64>,
    /// `c_{0j}^h = ∫_{A_0 ∩ [-V,V]^d} x_j² dλ`.
    pub c0: Vec<f64>,
    /// `μ_j^h = Σ_s s_j λ(A_s ∩ [-V,V]^d)`.
    pub mu_h: Vec<f64>,
    /// Cells were enumerated for `|k| ≤ window` on each axis.
    pub window: i64,
    /// Far-field correction when the window was capped.
    pub far: Option<FarField>,
    /// Density mass beyond the window that was dropped as negligible.
    pub dropped_tail: f64,
}

impl CellWeights {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn offset(&self, i: usize) -> &[i64] {
        &self.offsets[i * self.dim..(i + 1) * self.dim]
    }

    /// Rate of the jump by `k` lattice steps (zero if absent).
    pub fn rate_at(&self, k: &[i64]) -> f64 {
        (0..self.len()).find(|&i| self.offset(i) == k).map_or(0.0, |i| self.rates[i])
    }

    /// Mass outside the enumerated window (far field or dropped).
    pub fn outside_mass(&self) -> f64 {
        self.far.as_ref().map_or(self.dropped_tail, |f| f.tail)
    }

    /// Sum of all jump rates including the mass outside the window.
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum::<f64>() + self.outside_mass()
    }
}

/// `c_0^h`, `μ^h` and the nearest-neighbour cell masses `c_{±e_j}^h`.
pub(crate) struct DriftTerms {
    pub c0: Vec<f64>,
    pub mu_h: Vec<f64>,
    pub c_plus: Vec<f64>,
    pub c_minus: Vec<f64>,
}

pub(crate) fn drift_terms(model: &LevyModel, h: f64) -> Result<DriftTerms> {
    let d = model.dim();
    let measure = model.measure();
    let v = model.cutoff_v() as f64;
    let c0 = small_jump_variance(measure, h, v)?;
    let mu_h = compensator(measure, h, v)?;
    let mut c_plus = vec![0.0; d];
    let mut c_minus = vec![0.0; d];
    for j in 0..d {
        let mut e = vec![0i64; d];
        e[j] = 1;
        c_plus[j] = super::cells::cell_measure(measure, &e, h)?;
        e[j] = -1;
        c_minus[j] = super::cells::cell_measure(measure, &e, h)?;
    }
    Ok(DriftTerms { c0, mu_h, c_plus, c_minus })
}

fn small_jump_variance(measure: &LevyMeasure, h: f64, v: f64) -> Result<Vec<f64>> {
    let d = measure.dim();
    let a = (0.5 * h).min(v);
    if a == 0.0 {
        return Ok(vec![0.0; d]);
    }
    if d == 1 {
        return Ok(vec![measure.integrate(Moment::Second, Interval::closed(-a, a))?]);
    }
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mut s = measure.punctured_integral(a, &|x: &[f64]| x[j] * x[j])?;
        for atom in measure.atoms() {
            let in_zero_cell = atom.location.iter().all(|&x| cell_index(x, h) == 0);
            if in_zero_cell && atom.location.iter().all(|x| x.abs() <= v) {
                s += atom.weight * atom.location[j] * atom.location[j];
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// `μ_j^h` as a sum over slabs `{x_j ∈ A_k^h}` paired as `k` and `-k`, so a
/// symmetric measure gives exactly zero.
fn compensator(measure: &LevyMeasure, h: f64, v: f64) -> Result<Vec<f64>> {
    let d = measure.dim();
    if v == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let kmax = (v / h + 0.5).ceil() as i64;
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let (mut pos, mut neg) = if d == 1 {
            let s = density_cell_masses(measure, h, kmax, v)?;
            (s.pos_inner, s.neg_inner)
        } else {
            slab_masses(measure, h, kmax, v, j)?
        };
        for atom in measure.atoms() {
            if atom.location.iter().any(|x| x.abs() > v) {
                continue;
            }
            let k = cell_index(atom.location[j], h);
            if k > 0 {
                pos[(k - 1) as usize] += atom.weight;
            } else if k < 0 {
                neg[(-k - 1) as usize] += atom.weight;
            }
        }
        let mut s = 0.0;
        for k in (1..=kmax).rev() {
            let i = (k - 1) as usize;
            s += k as f64 * h * (pos[i] - neg[i]);
        }
        out.push(s);
    }
    Ok(out)
}

fn slab_masses(measure: &LevyMeasure, h: f64, kmax: i64, v: f64, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = measure.dim();
    let slab = |k: i64| -> Result<f64> {
        let a = (k.abs() as f64 - 0.5) * h;
        let b = ((k.abs() as f64 + 0.5) * h).min(v);
        if a >= b {
            return Ok(0.0);
        }
        let mut lo = vec![-v; d];
        let mut hi = vec![v; d];
        if k > 0 {
            lo[j] = a;
            hi[j] = b;
        } else {
            lo[j] = -b;
            hi[j] = -a;
        }
        measure.box_integral(&lo, &hi, &|_| 1.0)
    };
    let pos = (1..=kmax).into_par_iter().map(slab).collect::<Result<Vec<_>>>()?;
    let neg = (1..=kmax).into_par_iter().map(|k| slab(-k)).collect::<Result<Vec<_>>>()?;
    Ok((pos, neg))
}

/// Builds the lattice jump rates, `c_0^h` and `μ^h` for the lattice `spec`.
///
/// Univariate densities are enumerated cell by cell out to the smallest
/// dyadic radius `R ≥ max(1, 2M + h)` whose tail mass is below
/// `tail_cut · λ(|x| > h/2)` (or `tail_cut · λ(|x| > 1)` for infinite
/// activity). If `R` hits `window_max` the remaining tail is kept as a
/// [`FarField`]; otherwise it is dropped from the exponent but still counted in
/// the exit rate of the generator. Atoms are always binned exactly.
pub fn build_weights(model: &LevyModel, spec: &LatticeSpec) -> Result<CellWeights> {
    spec.validate()?;
    if spec.dim != model.dim() {
        return Err(LevyError::InvalidLattice(format!(
            "lattice dimension {} does not match model dimension {}",
            spec.dim,
            model.dim()
        )));
    }
    let h = spec.h;
    if model.cutoff_v() == 1 && h > 2.0 {
        return Err(LevyError::InvalidLattice(format!("h = {h} must not exceed 2 when V = 1")));
    }
    let terms = drift_terms(model, h)?;
    let measure = model.measure();
    let d = model.dim();
    let need = (2.0 * spec.m + h).max(1.0);

    let mut jumps: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut window = 0;
    let mut far = None;
    let mut dropped_tail = 0.0;

    if d == 1 {
        if measure.has_density() {
            let (radius, tail, capped) = choose_window(model, spec, need)?;
            window = ((radius / h) - 0.5).ceil().max(1.0) as i64;
            let edge = (window as f64 + 0.5) * h;
            let masses = density_cell_masses(measure, h, window, 0.0)?;
            for k in (1..=window).rev() {
                jumps.push((vec![-k], masses.neg[(k - 1) as usize]));
            }
            for k in 1..=window {
                jumps.push((vec![k], masses.pos[(k - 1) as usize]));
            }
            let (tp, tn) = measure.density_tails(edge).map_err(|e| overflow(e, edge))?;
            let tail_mass = if edge == radius { tail } else { tp + tn };
            if capped && tail_mass > 0.0 {
                far = Some(FarField { radius: edge, tail: tail_mass, measure: measure.clone() });
            } else {
                dropped_tail = tail_mass;
            }
        }
    } else if let Some(support) = measure.multivariate_support() {
        window = ((support / h) - 0.5).ceil().max(1.0) as i64;
        jumps.extend(box_cells(measure, h, window, d)?);
    }

    for atom in measure.atoms() {
        let k: Vec<i64> = atom.location.iter().map(|&x| cell_index(x, h)).collect();
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        match jumps.iter_mut().find(|(o, _)| *o == k) {
            Some((_, w)) => *w += atom.weight,
            None => jumps.push((k, atom.weight)),
        }
    }
    jumps.retain(|(_, w)| *w > 0.0);
    jumps.sort_by(|a, b| a.0.cmp(&b.0));

    let mut offsets = Vec::with_capacity(jumps.len() * d);
    let mut rates = Vec::with_capacity(jumps.len());
    for (o, w) in jumps {
        offsets.extend(o);
        rates.push(w);
    }
    Ok(CellWeights { h, dim: d, offsets, rates, c0: terms.c0, mu_h: terms.mu_h, window, far, dropped_tail })
}

fn overflow(e: LevyError, radius: f64) -> LevyError {
    LevyError::EnumerationOverflow(format!("tail mass beyond {radius} could not be computed: {e}"))
}

/// Returns the window radius, the tail beyond it and whether the cap was hit.
fn choose_window(model: &LevyModel, spec: &LatticeSpec, need: f64) -> Result<(f64, f64, bool)> {
    let measure = model.measure();
    let reference = if model.activity().finite_mass() {
        let (p, n) = measure.density_tails(0.5 * spec.h).map_err(|e| overflow(e, 0.5 * spec.h))?;
        p + n
    } else {
        let (p, n) = measure.density_tails(1.0).map_err(|e| overflow(e, 1.0))?;
        p + n
    };
    let threshold = spec.tail_cut * reference;
    let mut r = 1.0;
    while r < need {
        r *= 2.0;
    }
    let cap = spec.window_max.max(need);
    loop {
        let (p, n) = measure.density_tails(r).map_err(|e| overflow(e, r))?;
        let tail = p + n;
        if tail <= threshold {
            return Ok((r, tail, false));
        }
        if r >= cap {
            return Ok((r, tail, true));
        }
        r = (2.0 * r).min(cap);
    }
}

fn box_cells(measure: &LevyMeasure, h: f64, window: i64, d: usize) -> Result<Vec<(Vec<i64>, f64)>> {
    let side = (2 * window + 1) as usize;
    let count = side.pow(d as u32);
    (0..count)
        .into_par_iter()
        .filter_map(|flat| {
            let mut rem = flat;
            let mut k = vec![0i64; d];
            for j in (0..d).rev() {
                k[j] = (rem % side) as i64 - window;
                rem /= side;
            }
            if k.iter().all(|&x| x == 0) {
                return None;
            }
            let lo: Vec<f64> = k.iter().map(|&x| (x as f64 - 0.5) * h).collect();
            let hi: Vec<f64> = k.iter().map(|&x| (x as f64 + 0.5) * h).collect();
            Some(measure.box_integral(&lo, &hi, &|_| 1.0).map(|w| (k, w)))
        })
        .collect()
}
