//! European puts under a CGMY model priced on a sequence of dyadic lattices.

use levy_lattice::density::{price_european_puts, put_lattice, CgmyParams};
use levy_lattice::Result;

fn main() -> Result<()> {
    let params = CgmyParams { c: 0.5, lambda_plus: 3.5, lambda_minus: 2.0, alpha: 0.5 };
    let strikes = [80.0, 100.0, 120.0];
    println!("n   {:>10} {:>10} {:>10}", "K=80", "K=100", "K=120");
    for n in 2..=8 {
        let spec = put_lattice(2f64.powi(-n))?;
        let prices = price_european_puts(&params, 100.0, 0.04, 0.25, &strikes, &spec)?;
        println!("{n:<3} {:>10.4} {:>10.4} {:>10.4}", prices[0].price, prices[1].price, prices[2].price);
    }
    Ok(())
}
