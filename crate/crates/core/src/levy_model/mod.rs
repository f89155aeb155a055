//! Lévy processes described by their characteristic triplet.

mod coercivity;
mod functionals;
mod measure;
mod model;

pub use coercivity::{coercivity_constants, Coercivity};
pub use functionals::SmallJumpFunctionals;
pub use measure::{
    cos_minus_one, sin_minus_identity, ActivityHint, Atom, ClosedForms, Density1, DensityN, Family, Interval,
    IntervalFn, LevyMeasure, Moment, PsiFn,
};
pub use model::{Activity, ActivityClass, LevyModel};
