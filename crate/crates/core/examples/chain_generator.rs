//! The truncated generator of a jump diffusion: admissible step, stencil,
//! row sums and the distribution of the chain.

use levy_lattice::density::chain_distribution;
use levy_lattice::discretization::{build_generator, h_star};
use levy_lattice::levy_model::Atom;
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, Result, SchemeKind};

fn main() -> Result<()> {
    let measure = LevyMeasure::atomic(1, vec![Atom::at(-0.6, 5.0), Atom::at(1.3, 0.5)])?;
    let model = LevyModel::univariate(1.0, 3.0, measure, 0)?;
    let hs = h_star(&model, SchemeKind::Scheme1)?;
    println!("largest admissible step for scheme 1: {hs:.6}");
    let gen = build_generator(&model, &LatticeSpec::new(0.25, 1, 3.0)?, SchemeKind::Scheme1)?;
    println!("{} states, exit rate {:.4}", gen.n_states(), gen.exit_rate());
    for (k, rate) in gen.stencil() {
        println!("  jump {:+} with rate {rate:.4}", k[0]);
    }
    let sums = gen.row_sums();
    println!("row sums: first {:.3e}, middle {:.3e}", sums[0], sums[sums.len() / 2]);
    let table = chain_distribution(&gen, 0.5, &[0.0])?;
    println!("mass {:.12}, deficit {:.3e}", table.total_mass(), table.deficit.unwrap());
    let mut coo = Vec::new();
    gen.write_coo(&mut coo)?;
    println!("{} lines of COO output", String::from_utf8_lossy(&coo).lines().count());
    Ok(())
}
