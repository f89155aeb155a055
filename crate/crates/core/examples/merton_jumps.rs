//! A user-supplied Lévy density: Brownian motion plus Gaussian jumps.

use std::f64::consts::PI;
use std::sync::Arc;

use levy_lattice::density::{discrete_density_batch, exact_density_batch, DEFAULT_TOL};
use levy_lattice::discretization::Discretization;
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, Result, SchemeKind};

fn main() -> Result<()> {
    let rate = 2.0;
    let jumps = LevyMeasure::density(
        Arc::new(move |x: f64| rate * (-0.5 * x * x / 0.09).exp() / (2.0 * PI * 0.09).sqrt()),
        true,
    );
    let model = LevyModel::univariate(0.2, 0.1, jumps, 0)?;
    let ys: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.25).collect();
    let exact = exact_density_batch(&model, 0.5, &ys, DEFAULT_TOL)?;
    for h in [0.25, 0.125, 0.0625] {
        let disc = Discretization::new(&model, &LatticeSpec::new(h, 1, 6.0)?, SchemeKind::Scheme1)?;
        let lattice = discrete_density_batch(&disc, 0.5, &ys, DEFAULT_TOL)?;
        let sup = exact.values.iter().zip(&lattice.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("h={h:<7} sup error {sup:.4e}");
    }
    Ok(())
}
