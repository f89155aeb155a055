//! Characteristic exponent of a symmetric stable process against its lattice
//! counterpart, with the split of the error into diffusion, drift and jump
//! terms.

use std::f64::consts::PI;

use levy_lattice::convergence::char_exponent_sweep;
use levy_lattice::discretization::Discretization;
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, Result, SchemeKind};

fn main() -> Result<()> {
    let model = LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(1.2, 1.0)?, 1)?.with_orey_epsilon(1.2)?;
    let steps = [0.5, 0.25, 0.125];
    let ps: Vec<f64> = (0..=8).map(|i| i as f64 * PI / 16.0).collect();
    for row in char_exponent_sweep(&model, &steps, SchemeKind::Scheme2, &ps)? {
        println!(
            "h={:<6} p={:.4} psi={:.6} psi_h={:.6} err={:.2e}",
            row.h,
            row.p,
            row.psi.re,
            row.psi_h.re,
            row.error()
        );
    }
    let disc = Discretization::new(&model, &LatticeSpec::new(0.25, 1, 4.0)?, SchemeKind::Scheme2)?;
    for p in [0.5, 2.0, 6.0] {
        let e = disc.error_decomposition(p)?;
        println!("p={p}: f_h={:.3e} g_h={:.3e} l_h={:.3e}", e.f_h, e.g_h.norm(), e.l_h.norm());
    }
    Ok(())
}
