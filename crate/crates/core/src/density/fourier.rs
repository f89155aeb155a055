//! Densities by Fourier inversion of `e^{tΨ}` (exact process) and `e^{tΨ^h}`
//! (lattice chain).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::table::{DensityTable, Route};
use crate::discretization::{Discretization, LatticeSpec, SchemeKind};
use crate::error::{LevyError, Result};
use crate::levy_model::{coercivity_constants, Coercivity, Family, LevyModel};
use crate::quadrature::{self, gauss_legendre, Tolerance};

/// Default absolute tolerance for density values.
pub const DEFAULT_TOL: f64 = 1e-10;

const LOW: usize = 16;
const HIGH: usize = 32;
const BLOCK: usize = 64;
const MAX_DEPTH: u32 = 24;
const GRADING_LEVELS: i32 = 30;

/// Values of `(1/π)∫_0^U Re[e^{-ipd} e^{tΨ(p)}] dp` for several `d`.
pub(crate) struct Inversion {
    pub values: Vec<f64>,
    pub error: f64,
    /// Frequency where integration stopped.
    pub cutoff: f64,
}

/// Univariate inversion. `upper` is `π/h` for the chain or the coercivity
/// radius for the process; `decay_from` is the frequency `P` beyond which the
/// integrand is known to decay.
pub(crate) fn invert_1d<F>(psi: &F, t: f64, upper: f64, decay_from: f64, ds: &[f64], tol: f64) -> Result<Inversion>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let dmax = ds.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let w0 = if dmax > 0.0 { (0.5 * PI / dmax).min(1.0) } else { 1.0 };
    let mut edges = vec![0.0];
    for j in (0..GRADING_LEVELS).rev() {
        let e = w0 * 2f64.powi(-j);
        if e >= upper {
            break;
        }
        edges.push(e);
    }
    let graded = edges.len();
    let mut values = vec![0.0; ds.len()];
    let mut error = 0.0;
    let mut peak = 0.0f64;
    let mut quiet_from: Option<f64> = None;
    let mut k = 0usize;
    loop {
        let mut panels = Vec::with_capacity(BLOCK);
        while panels.len() < BLOCK {
            let lo = if k + 1 < graded { edges[k] } else { edges[graded - 1] + (k + 1 - graded) as f64 * w0 };
            let hi = if k + 1 < graded { edges[k + 1] } else { (lo + w0).min(upper) };
            if lo >= upper {
                break;
            }
            panels.push((lo, hi));
            k += 1;
        }
        if panels.is_empty() {
            break;
        }
        let results: Vec<Result<PanelResult>> =
            panels.par_iter().map(|&(a, b)| panel(psi, t, a, b, ds, tol * (b - a) / (20.0 * (1.0 + a)), 0)).collect();
        let mut stop = false;
        for (r, &(a, b)) in results.into_iter().zip(&panels) {
            let r = r?;
            for (v, x) in values.iter_mut().zip(&r.values) {
                *v += x;
            }
            error += r.error;
            peak = peak.max(r.modulus);
            if a >= decay_from && r.modulus < 1e-3 * tol * peak {
                let start = *quiet_from.get_or_insert(a);
                if b - start >= (0.5 * start).max(10.0) {
                    stop = true;
                    break;
                }
            } else {
                quiet_from = None;
            }
        }
        if stop {
            break;
        }
    }
    let scale = 1.0 / PI;
    let cutoff = (edges[graded - 1] + (k + 1).saturating_sub(graded) as f64 * w0).min(upper);
    Ok(Inversion { values: values.into_iter().map(|v| v * scale).collect(), error: error * scale, cutoff })
}

struct PanelResult {
    values: Vec<f64>,
    error: f64,
    modulus: f64,
}

fn panel<F>(psi: &F, t: f64, a: f64, b: f64, ds: &[f64], allowed: f64, depth: u32) -> Result<PanelResult>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let eval = |order: usize| -> Result<(Vec<f64>, f64)> {
        let mut acc = vec![0.0; ds.len()];
        let mut modulus = 0.0f64;
        for &(x, w) in gauss_legendre(order) {
            let p = mid + half * x;
            let z = t * psi(p)?;
            let amp = z.re.exp();
            modulus = modulus.max(amp);
            if amp == 0.0 {
                continue;
            }
            for (s, &d) in acc.iter_mut().zip(ds) {
                *s += w * amp * (z.im - p * d).cos();
            }
        }
        for s in acc.iter_mut() {
            *s *= half;
        }
        Ok((acc, modulus))
    };
    let (lo, _) = eval(LOW)?;
    let (hi, modulus) = eval(HIGH)?;
    let err = lo.iter().zip(&hi).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if err <= allowed || depth >= MAX_DEPTH {
        return Ok(PanelResult { values: hi, error: err, modulus });
    }
    let left = panel(psi, t, a, mid, ds, 0.5 * allowed, depth + 1)?;
    let right = panel(psi, t, mid, b, ds, 0.5 * allowed, depth + 1)?;
    Ok(PanelResult {
        values: left.values.iter().zip(&right.values).map(|(x, y)| x + y).collect(),
        error: left.error + right.error,
        modulus: left.modulus.max(right.modulus),
    })
}

fn check_error(inv: &Inversion, tol: f64, what: &str) -> Result<()> {
    if inv.error > (1e3 * tol).max(1e-6) {
        return Err(LevyError::Quadrature {
            context: format!("{what} Fourier inversion"),
            achieved: inv.error,
            requested: tol,
        });
    }
    Ok(())
}

/// Univariate closed-form densities, where the family admits one.
fn closed_form_density(model: &LevyModel, t: f64, d: f64) -> Option<Result<f64>> {
    if model.dim() != 1 || model.sigma2()[0] != 0.0 || !model.measure().atoms().is_empty() {
        return None;
    }
    let x = d - model.mu()[0] * t;
    match model.measure().family()? {
        Family::VarianceGamma { scale } if model.measure().uses_closed_forms() => {
            Some(variance_gamma_density(*scale, t, x))
        }
        Family::Stable { alpha, c } if (*alpha - 1.0).abs() < 1e-15 => {
            let g = c * PI * t;
            Some(Ok(g / (PI * (g * g + x * x))))
        }
        _ => None,
    }
}

/// Density of the symmetric variance gamma law with exponent `-t ln(1 + s²p²)`:
/// `(|x|/2s)^{t-½} K_{t-½}(|x|/s) / (s √π Γ(t))`.
pub fn variance_gamma_density(scale: f64, t: f64, x: f64) -> Result<f64> {
    use statrs::function::gamma::gamma;
    let nu = t - 0.5;
    let z = x.abs() / scale;
    if z == 0.0 {
        return Ok(if nu > 0.0 { gamma(nu) / (2.0 * scale * PI.sqrt() * gamma(t)) } else { f64::INFINITY });
    }
    let k = bessel_k(nu, z)?;
    Ok((0.5 * z).powf(nu) * k / (scale * PI.sqrt() * gamma(t)))
}

/// `K_ν(z) = ∫_0^∞ e^{-z cosh u} cosh(νu) du` for `z > 0`.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    // scaled by e^{z} to keep the integrand O(1) near u = 0
    let f = |u: f64| (-z * (u.cosh() - 1.0)).exp() * (nu * u).cosh();
    let tol = Tolerance::new(0.0, 1e-13);
    let v = quadrature::adaptive(&f, 0.0, 1.0, tol)?.value + quadrature::to_infinity(&f, 1.0, tol)?.value;
    Ok(v * (-z).exp())
}

/// Exact transition density `p_t(x, y)`.
pub fn exact_density(model: &LevyModel, t: f64, x: &[f64], y: &[f64], tol: f64) -> Result<f64> {
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    if model.dim() == 1 {
        return Ok(exact_density_batch(model, t, &[d[0]], tol)?.values[0]);
    }
    exact_density_nd(model, t, &d, tol)
}

/// Exact densities `p_t(0, d)` at several univariate displacements.
pub fn exact_density_batch(model: &LevyModel, t: f64, ds: &[f64], tol: f64) -> Result<DensityTable> {
    check_time(t)?;
    let mut table = DensityTable::new(1, t, Route::FourierExact);
    if let Some(first) = ds.first().and_then(|&d| closed_form_density(model, t, d)) {
        first?;
        for &d in ds {
            table.push(&[d], closed_form_density(model, t, d).expect("family checked")?);
        }
        table.route = Route::ClosedForm;
        return Ok(table);
    }
    let k = coercivity_constants(model)?;
    let upper = k.radius(t, 1e-3 * tol, true);
    let psi = |p: f64| model.psi1(p);
    let inv = invert_1d(&psi, t, upper, k.p, ds, tol)?;
    check_error(&inv, tol, "exact")?;
    for (&d, v) in ds.iter().zip(inv.values) {
        table.push(&[d], v);
    }
    table.quad_tol = inv.error;
    table.extra.push(("frequency_cutoff".into(), format!("{:.6e}", inv.cutoff)));
    Ok(table)
}

/// Normalized lattice mass `(1/h^d) P^h_t(x, y)` of the untruncated chain.
pub fn discrete_density_fourier(
    model: &LevyModel,
    spec: &LatticeSpec,
    scheme: SchemeKind,
    t: f64,
    x: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<f64> {
    let disc = Discretization::new(model, spec, scheme)?;
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    if model.dim() == 1 {
        return Ok(discrete_density_batch(&disc, t, &[d[0]], tol)?.values[0]);
    }
    discrete_density_nd(&disc, t, &d, tol)
}

/// Normalized lattice masses at several univariate lattice displacements.
pub fn discrete_density_batch(disc: &Discretization, t: f64, ds: &[f64], tol: f64) -> Result<DensityTable> {
    check_time(t)?;
    let h = disc.h();
    let upper = PI / h;
    let (upper, decay_from) = match coercivity_constants(disc.model()) {
        Ok(k) => (k.radius(t, 1e-3 * tol, false).min(upper), k.p),
        Err(_) => (upper, f64::INFINITY),
    };
    let psi = |p: f64| disc.psi_h(&[p]);
    let inv = invert_1d(&psi, t, upper, decay_from, ds, tol)?;
    check_error(&inv, tol, "lattice")?;
    let mut table = DensityTable::new(1, t, Route::FourierDiscrete);
    table.h = Some(h);
    for (&d, v) in ds.iter().zip(inv.values) {
        table.push(&[d], v);
    }
    table.quad_tol = inv.error;
    table.extra.push(("frequency_cutoff".into(), format!("{:.6e}", inv.cutoff)));
    Ok(table)
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(LevyError::NegativeTime(t));
    }
    Ok(())
}

/// Tensor Gauss–Legendre inversion over `[-U, U]^d`, halving the panel width
/// until two successive results agree to `tol`.
fn invert_nd<F>(psi: &F, t: f64, upper: f64, d: &[f64], tol: f64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    let dim = d.len();
    let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut width = if dmax > 0.0 { (0.5 * PI / dmax).min(1.0) } else { 1.0 };
    let mut previous: Option<f64> = None;
    let mut last_err = f64::INFINITY;
    for _ in 0..8 {
        let n = (2.0 * upper / width).ceil().max(1.0) as usize;
        let w = 2.0 * upper / n as f64;
        let rule = gauss_legendre(LOW);
        let mut nodes = Vec::with_capacity(n * LOW);
        for i in 0..n {
            let mid = -upper + (i as f64 + 0.5) * w;
            for &(x, wt) in rule {
                nodes.push((mid + 0.5 * w * x, 0.5 * w * wt));
            }
        }
        let total = nodes.len().pow(dim as u32);
        let sum: f64 = (0..total)
            .into_par_iter()
            .map(|flat| -> Result<f64> {
                let mut rem = flat;
                let mut p = vec![0.0; dim];
                let mut weight = 1.0;
                for j in (0..dim).rev() {
                    let (x, wt) = nodes[rem % nodes.len()];
                    rem /= nodes.len();
                    p[j] = x;
                    weight *= wt;
                }
                let z = t * psi(&p)?;
                let phase: f64 = p.iter().zip(d).map(|(a, b)| a * b).sum();
                Ok(weight * z.re.exp() * (z.im - phase).cos())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .sum();
        let value = sum / (2.0 * PI).powi(dim as i32);
        if let Some(prev) = previous {
            last_err = (value - prev).abs();
            if last_err <= tol {
                return Ok((value, last_err));
            }
        }
        previous = Some(value);
        width *= 0.5;
    }
    Err(LevyError::Quadrature { context: "multivariate Fourier inversion".into(), achieved: last_err, requested: tol })
}

fn multivariate_radius(k: &Coercivity, t: f64, tol: f64, exact: bool) -> f64 {
    k.radius(t, 1e-3 * tol, exact)
}

fn exact_density_nd(model: &LevyModel, t: f64, d: &[f64], tol: f64) -> Result<f64> {
    check_time(t)?;
    let k = coercivity_constants(model)?;
    let upper = multivariate_radius(&k, t, tol, true);
    let psi = |p: &[f64]| model.psi(p);
    Ok(invert_nd(&psi, t, upper, d, tol)?.0)
}

fn discrete_density_nd(disc: &Discretization, t: f64, d: &[f64], tol: f64) -> Result<f64> {
    check_time(t)?;
    let mut upper = PI / disc.h();
    if let Ok(k) = coercivity_constants(disc.model()) {
        upper = upper.min(multivariate_radius(&k, t, tol, false));
    }
    let psi = |p: &[f64]| disc.psi_h(p);
    Ok(invert_nd(&psi, t, upper, d, tol)?.0)
}
