//! Brownian motion with drift: exact density against the lattice chain,
//! computed by Fourier inversion and by the exponential of the truncated
//! generator.

use levy_lattice::density::{chain_distribution, discrete_density_batch, exact_density_batch, DEFAULT_TOL};
use levy_lattice::discretization::Discretization;
use levy_lattice::{LatticeSpec, LevyModel, Result, SchemeKind};

fn main() -> Result<()> {
    let model = LevyModel::brownian(1.0, 0.5)?;
    let t = 1.0;
    for h in [0.5, 0.25, 0.125] {
        let spec = LatticeSpec::new(h, 1, 6.0)?;
        let disc = Discretization::new(&model, &spec, SchemeKind::Scheme1)?;
        let ys: Vec<f64> = (-16..=16).map(|k| k as f64 * 0.125).filter(|y| (y / h).fract() == 0.0).collect();
        let exact = exact_density_batch(&model, t, &ys, DEFAULT_TOL)?;
        let fourier = discrete_density_batch(&disc, t, &ys, DEFAULT_TOL)?;
        let expm = chain_distribution(&disc.generator()?, t, &[0.0])?;
        let mut sup = 0.0f64;
        let mut gap = 0.0f64;
        for (i, y) in ys.iter().enumerate() {
            sup = sup.max((exact.values[i] - fourier.values[i]).abs());
            gap = gap.max((fourier.values[i] - expm.value_at(&[*y]).unwrap()).abs());
        }
        println!("h={h:<6} sup|p - P/h|={sup:.3e}  fourier vs expm={gap:.1e}  deficit={:.1e}", expm.deficit.unwrap());
    }
    Ok(())
}
