//! Two-dimensional Brownian motion on the square lattice.

use levy_lattice::density::{discrete_density_fourier, exact_density, DEFAULT_TOL};
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, Result, SchemeKind};

fn main() -> Result<()> {
    let model = LevyModel::new(vec![1.0, 0.5], vec![0.2, -0.1], LevyMeasure::zero(2), 0)?;
    let y = [0.5, -0.5];
    let exact = exact_density(&model, 1.0, &[0.0, 0.0], &y, DEFAULT_TOL)?;
    println!("p_1(0, {y:?}) = {exact:.8}");
    for k in 1..=4 {
        let h = 2f64.powi(-k);
        let spec = LatticeSpec::new(h, 2, 4.0)?;
        let lattice =
            discrete_density_fourier(&model, &spec, SchemeKind::Multivariate, 1.0, &[0.0, 0.0], &y, DEFAULT_TOL)?;
        println!("h={h:<7} lattice {lattice:.8} error {:.3e}", (lattice - exact).abs());
    }
    Ok(())
}
