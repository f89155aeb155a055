//! Convergence sweeps over lattice steps, order fitting and the fixture catalog.

mod fixtures;
mod sweep;

pub use fixtures::{
    alpha_stable, cgmy, cp_two_atoms, finite_variation_atomic, fixture, fixtures, gaussian, gaussian_drift,
    infinite_variation_atomic, orey_half, triadic_atoms, vg, ExpectedOrder, Fixture, Reference, ATOM_DEPTH, CGMY_PUTS,
};
pub use sweep::{
    char_exponent_sweep, expectation_errors, fit_order, lattice_window, origin_gap, run_sweep, run_sweep_with,
    sup_error, write_exponent_csv, ExponentRow, OrderFit, SupError, SweepReport, SweepRow, ORDER_SLACK,
};
