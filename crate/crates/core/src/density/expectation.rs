//! Expectations of payoffs under the process and under the lattice chain, and
//! European put prices in exponential tempered stable models.

use super::expm::chain_distribution;
use super::fourier::exact_density_batch;
use crate::discretization::{build_generator, LatticeSpec, SchemeKind, TruncatedGenerator};
use crate::error::{LevyError, Result};
use crate::levy_model::{Family, LevyMeasure, LevyModel};
use crate::quadrature::{self, gauss_legendre, Tolerance};

/// Integration window for [`expectation_exact`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadWindow {
    /// Initial half-width around `x + μt`.
    pub half_width: f64,
    /// Half-width beyond which the search gives up.
    pub max_half_width: f64,
    /// Largest quadrature panel width.
    pub panel: f64,
    /// Points where the payoff is not smooth; they become panel edges.
    pub kinks: Vec<f64>,
    /// Target tolerance; the window is accepted once the boundary density is
    /// below `tol` times the largest density seen.
    pub tol: f64,
}

impl Default for QuadWindow {
    fn default() -> Self {
        Self { half_width: 8.0, max_half_width: 1024.0, panel: 1.0 / 32.0, kinks: Vec::new(), tol: 1e-10 }
    }
}

impl QuadWindow {
    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }
}

const MAX_PANELS: usize = 1024;

/// `E[f(x + X_t)] = ∫ f(y) p_t(x, y) dy` for a univariate model.
pub fn expectation_exact(
    model: &LevyModel,
    t: f64,
    x: f64,
    f: &(dyn Fn(f64) -> f64 + Sync),
    window: &QuadWindow,
) -> Result<f64> {
    if model.dim() != 1 {
        return Err(LevyError::InvalidModel("expectation_exact is implemented for dimension 1".into()));
    }
    let center = x + model.mu()[0] * t;
    let nodes = gauss_legendre(16);
    let mut w = window.half_width;
    loop {
        let (lo, hi) = (center - w, center + w);
        let mut edges = vec![lo, hi];
        let n = ((2.0 * w / window.panel).ceil() as usize).clamp(1, MAX_PANELS);
        edges.extend((1..n).map(|i| lo + 2.0 * w * i as f64 / n as f64));
        edges.extend(window.kinks.iter().copied().filter(|&k| k > lo && k < hi));
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut ds = Vec::with_capacity(16 * edges.len() + 2);
        let mut weights = Vec::with_capacity(ds.capacity());
        for e in edges.windows(2) {
            let (a, b) = (e[0], e[1]);
            let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
            for &(node, wt) in nodes {
                ds.push(m + r * node - x);
                weights.push(r * wt);
            }
        }
        ds.push(lo - x);
        ds.push(hi - x);
        let dens = exact_density_batch(model, t, &ds, window.tol * 1e-2)?.values;
        let n_in = weights.len();
        let peak = dens[..n_in].iter().fold(0.0f64, |m, v| m.max(*v));
        let boundary = dens[n_in].max(dens[n_in + 1]);
        if boundary <= window.tol * peak {
            return Ok(ds[..n_in].iter().zip(&weights).zip(&dens).map(|((d, wt), p)| wt * p * f(x + d)).sum());
        }
        if 2.0 * w > window.max_half_width {
            return Err(LevyError::WindowTooSmall { boundary, tol: window.tol * peak });
        }
        w *= 2.0;
    }
}

/// Chain expectation together with the probability killed at the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainExpectation {
    pub value: f64,
    pub deficit: f64,
}

/// `E^x[f(X^h_t)] = Σ f(y) P^h_t(x, y)` for the truncated chain, with `f = 0`
/// on the cemetery state.
pub fn expectation_discrete(
    gen: &TruncatedGenerator,
    t: f64,
    start: &[f64],
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<ChainExpectation> {
    let table = chain_distribution(gen, t, start)?;
    let cell = gen.h().powi(gen.dim() as i32);
    let value = (0..table.len()).map(|i| f(table.point(i)) * table.values[i] * cell).sum();
    Ok(ChainExpectation { value, deficit: table.deficit.unwrap_or(0.0) })
}

/// `∫(e^x − 1 − x𝟙_{|x|≤V}) λ(dx)`, the jump part of the cumulant at 1.
pub fn exponential_compensator(measure: &LevyMeasure, cutoff_v: u8) -> Result<f64> {
    if measure.dim() != 1 {
        return Err(LevyError::InvalidModel("exponential moments are implemented for dimension 1".into()));
    }
    if let Some(Family::Cgmy { lambda_plus, .. }) = measure.family() {
        if *lambda_plus <= 1.0 {
            return Err(LevyError::NoExponentialMoment(format!("lambda+ = {lambda_plus} must exceed 1")));
        }
    }
    let v = f64::from(cutoff_v);
    let mut total: f64 = measure
        .atoms()
        .iter()
        .map(|a| {
            let z = a.location[0];
            let comp = if z.abs() <= v { z } else { 0.0 };
            a.weight * (z.exp_m1() - comp)
        })
        .sum();
    if !measure.has_density() {
        return Ok(total);
    }
    let tol = Tolerance::new(1e-14, 1e-12);
    for sign in [1.0, -1.0] {
        let inner = |u: f64| {
            let z = sign * u;
            (z.exp_m1() - v * z) * measure.density_at(z)
        };
        let outer = |u: f64| {
            let z = sign * u;
            z.exp_m1() * measure.density_at(z)
        };
        total += quadrature::singular_at_origin(&inner, 1.0, tol)?.value;
        total += quadrature::to_infinity(&outer, 1.0, tol)
            .map_err(|e| LevyError::NoExponentialMoment(format!("∫ e^x λ(dx) diverges ({e})")))?
            .value;
    }
    Ok(total)
}

/// The drift making `e^{X_t}` a martingale: `½σ² + μ + ∫(e^x − 1 − x𝟙) dλ = 0`.
pub fn martingale_drift(sigma2: f64, measure: &LevyMeasure, cutoff_v: u8) -> Result<f64> {
    Ok(-0.5 * sigma2 - exponential_compensator(measure, cutoff_v)?)
}

/// Tempered stable parameters: `λ(dx) = c e^{-λ₊x}/x^{1+α}` on `x > 0` and
/// `c e^{-λ₋|x|}/|x|^{1+α}` on `x < 0`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct CgmyParams {
    pub c: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub alpha: f64,
}

impl CgmyParams {
    pub fn measure(&self) -> Result<LevyMeasure> {
        LevyMeasure::cgmy(self.c, self.lambda_plus, self.lambda_minus, self.alpha)
    }

    /// Pure-jump model with cut-off `V = 1` and the martingale drift.
    pub fn risk_neutral_model(&self) -> Result<LevyModel> {
        if self.lambda_plus <= 1.0 {
            return Err(LevyError::NoExponentialMoment(format!("lambda+ = {} must exceed 1", self.lambda_plus)));
        }
        let measure = self.measure()?;
        let mu = martingale_drift(0.0, &measure, 1)?;
        LevyModel::univariate(0.0, mu, measure, 1)
    }
}

/// Truncation half-width `(½ log(1/h)) ∨ 1`.
pub fn put_truncation(h: f64) -> f64 {
    (0.5 * (1.0 / h).ln()).max(1.0)
}

/// Lattice for pricing at step `h` with the truncation [`put_truncation`].
pub fn put_lattice(h: f64) -> Result<LatticeSpec> {
    LatticeSpec::new(h, 1, put_truncation(h).max(h))
}

/// A claim price from the lattice chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PutPrice {
    pub strike: f64,
    pub price: f64,
    pub deficit: f64,
}

/// `e^{-rT} E[(K − S₀e^{rT + X_T})^+]` under the scheme-2 chain for several strikes.
pub fn price_european_puts(
    params: &CgmyParams,
    s0: f64,
    r: f64,
    maturity: f64,
    strikes: &[f64],
    spec: &LatticeSpec,
) -> Result<Vec<PutPrice>> {
    if !(s0 > 0.0) || strikes.iter().any(|k| !(*k >= 0.0)) {
        return Err(LevyError::InvalidModel("spot must be positive and strikes nonnegative".into()));
    }
    let model = params.risk_neutral_model()?;
    price_european(&model, s0, r, maturity, strikes, spec, &|s, k| (k - s).max(0.0))
}

/// `e^{-rT} E[g(S₀e^{rT + X_T}, K)]` under the scheme-2 chain of `model`
/// started at the origin, for each strike `K`.
pub fn price_european(
    model: &LevyModel,
    s0: f64,
    r: f64,
    maturity: f64,
    strikes: &[f64],
    spec: &LatticeSpec,
    payoff: &dyn Fn(f64, f64) -> f64,
) -> Result<Vec<PutPrice>> {
    if !(s0 > 0.0) || strikes.iter().any(|k| !(*k >= 0.0)) {
        return Err(LevyError::InvalidModel("spot must be positive and strikes nonnegative".into()));
    }
    let gen = build_generator(model, spec, SchemeKind::Scheme2)?;
    let table = chain_distribution(&gen, maturity, &[0.0])?;
    let deficit = table.deficit.unwrap_or(0.0);
    let disc = (-r * maturity).exp();
    let forward = s0 * (r * maturity).exp();
    Ok(strikes
        .iter()
        .map(|&k| {
            let undiscounted: f64 =
                (0..table.len()).map(|i| payoff(forward * table.point(i)[0].exp(), k) * table.values[i] * spec.h).sum();
            PutPrice { strike: k, price: disc * undiscounted, deficit }
        })
        .collect())
}

pub fn price_european_put(
    params: &CgmyParams,
    s0: f64,
    r: f64,
    maturity: f64,
    strike: f64,
    spec: &LatticeSpec,
) -> Result<f64> {
    Ok(price_european_puts(params, s0, r, maturity, &[strike], spec)?[0].price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::gamma::gamma;

    #[test]
    fn exact_expectations_of_simple_payoffs() {
        let bm = LevyModel::brownian(1.0, 0.0).unwrap();
        let w = QuadWindow::default().with_kinks(vec![0.0]);
        assert_relative_eq!(expectation_exact(&bm, 1.0, 0.0, &|_| 1.0, &w).unwrap(), 1.0, epsilon = 1e-8);
        let half = expectation_exact(&bm, 1.0, 0.0, &|y| if y > 0.0 { 1.0 } else { 0.0 }, &w).unwrap();
        assert_relative_eq!(half, 0.5, epsilon = 1e-8);
        let second = expectation_exact(&bm, 2.0, 0.0, &|y| y * y, &w).unwrap();
        assert_relative_eq!(second, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn window_too_small_is_reported() {
        let bm = LevyModel::brownian(1.0, 0.0).unwrap();
        let w = QuadWindow { half_width: 0.5, max_half_width: 1.0, ..QuadWindow::default() };
        assert!(matches!(expectation_exact(&bm, 1.0, 0.0, &|_| 1.0, &w), Err(LevyError::WindowTooSmall { .. })));
    }

    #[test]
    fn chain_expectations() {
        let bm = LevyModel::brownian(1.0, 0.0).unwrap();
        let spec = LatticeSpec::new(0.25, 1, 4.0).unwrap();
        let gen = build_generator(&bm, &spec, SchemeKind::Scheme1).unwrap();
        let one = expectation_discrete(&gen, 1.0, &[0.0], &|_| 1.0).unwrap();
        assert_relative_eq!(one.value, 1.0 - one.deficit, epsilon = 1e-12);
        let odd = expectation_discrete(&gen, 1.0, &[0.0], &|y| y[0].powi(3)).unwrap();
        assert!(odd.value.abs() < 1e-12);
        let table = chain_distribution(&gen, 1.0, &[0.0]).unwrap();
        let point = expectation_discrete(&gen, 1.0, &[0.0], &|y| if y[0] == 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(point.value, table.value_at(&[0.5]).unwrap() * 0.25);
    }

    #[test]
    fn tempered_stable_martingale_drift() {
        // with V = 0: μ = −cΓ(−α)[(λ₊−1)^α − λ₊^α + (λ₋+1)^α − λ₋^α]
        let (c, lp, lm, a) = (0.5, 3.5, 2.0, 0.5);
        let measure = LevyMeasure::cgmy(c, lp, lm, a).unwrap();
        let oracle = -c * gamma(-a) * ((lp - 1.0).powf(a) - lp.powf(a) + (lm + 1.0).powf(a) - lm.powf(a));
        assert_relative_eq!(martingale_drift(0.0, &measure, 0).unwrap(), oracle, max_relative = 1e-9);
        let bad = CgmyParams { c, lambda_plus: 1.0, lambda_minus: lm, alpha: a };
        assert!(matches!(bad.risk_neutral_model(), Err(LevyError::NoExponentialMoment(_))));
    }

    #[test]
    fn brownian_martingale_drift() {
        assert_eq!(martingale_drift(0.4, &LevyMeasure::zero(1), 0).unwrap(), -0.2);
    }

    #[test]
    fn truncation_rule() {
        assert_eq!(put_truncation(0.5), 1.0);
        assert_relative_eq!(put_truncation(2f64.powi(-9)), 4.5 * 2f64.ln(), epsilon = 1e-15);
    }
}
