//! Measured convergence order for catalog fixtures.
//!
//! ```text
//! cargo run --release --example convergence_sweep -- gaussian vg
//! ```

use levy_lattice::convergence::{fixture, fixtures, run_sweep};
use levy_lattice::Result;

fn main() -> Result<()> {
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = fixtures()?.into_iter().map(|f| f.name).collect();
        println!("available: {}", names.join(", "));
        names = vec!["gaussian".into(), "cp_two_atoms".into()];
    }
    for name in names {
        let report = run_sweep(&fixture(&name)?)?;
        println!("{name}: expected {:.3}, fitted {:.3}, pass {}", report.expected, report.fit.median, report.pass);
        for row in &report.rows {
            println!("  h={:<10} sup={:.4e}", row.h, row.sup_error);
        }
    }
    Ok(())
}
