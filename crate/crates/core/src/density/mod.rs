//! Transition densities of the process and of the lattice chain, chain
//! distributions by the exponential action, expectations and put prices.

mod expectation;
mod expm;
mod fourier;
mod table;

pub use expectation::{
    expectation_discrete, expectation_exact, exponential_compensator, martingale_drift, price_european,
    price_european_put, price_european_puts, put_lattice, put_truncation, CgmyParams, ChainExpectation, PutPrice,
    QuadWindow,
};
pub use expm::{
    chain_distribution, expm_action, expm_action_transpose, uniformize, ExpmOutcome, RateOperator, SparseRateMatrix,
    EXPM_TOL,
};
pub use fourier::{
    bessel_k, discrete_density_batch, discrete_density_fourier, exact_density, exact_density_batch,
    variance_gamma_density, DEFAULT_TOL,
};
pub use table::{DensityTable, Route};
