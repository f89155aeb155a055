//! Expectations of a smooth function under a variance gamma process and under
//! its lattice chain.

use levy_lattice::density::{expectation_discrete, expectation_exact, QuadWindow};
use levy_lattice::discretization::build_generator;
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, Result, SchemeKind};

fn main() -> Result<()> {
    let model = LevyModel::univariate(0.0, 0.0, LevyMeasure::variance_gamma(1.0)?, 1)?;
    let f = |x: f64| (-x * x).exp();
    let t = 1.0;
    let exact = expectation_exact(&model, t, 0.0, &f, &QuadWindow::default())?;
    println!("E f(X_t) = {exact:.10}");
    for k in 1..=6 {
        let h = 2f64.powi(-k);
        let gen = build_generator(&model, &LatticeSpec::new(h, 1, 12.0)?, SchemeKind::Scheme2)?;
        let chain = expectation_discrete(&gen, t, &[0.0], &|x| f(x[0]))?;
        println!("h={h:<9} E f(X^h_t) = {:.10}  error {:.3e}", chain.value, (chain.value - exact).abs());
    }
    Ok(())
}
