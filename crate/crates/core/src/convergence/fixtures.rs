use crate::density::{CgmyParams, DensityTable};
use crate::discretization::SchemeKind;
use crate::error::{LevyError, Result};
use crate::levy_model::{ActivityHint, Atom, LevyMeasure, LevyModel};

/// Number of atoms kept from the infinite atomic sequences `x_n = (3/2)3^{-n}`.
pub const ATOM_DEPTH: i32 = 40;

/// Asymptotic convergence order of `Δ_t(h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectedOrder {
    Two,
    One,
    /// `O(h κ(h/2))`
    KappaRate,
    /// `O(h ∨ (ζ + χ)(h/2))`
    ZetaRate,
    Custom(f64),
}

impl ExpectedOrder {
    /// Numerical order; rate functions are fitted on a grid of very small steps.
    pub fn value(&self, model: &LevyModel) -> Result<f64> {
        let f = model.functionals();
        match *self {
            ExpectedOrder::Two => Ok(2.0),
            ExpectedOrder::One => Ok(1.0),
            ExpectedOrder::Custom(v) => Ok(v),
            ExpectedOrder::KappaRate => {
                if f.b().is_finite() {
                    return Ok(1.0);
                }
                let pts = (12..=16)
                    .map(|k| {
                        let h = 3f64.powi(-k);
                        Ok((h, h * f.kappa(h / 2.0)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(super::sweep::fit_order(&pts)?.median.min(1.0))
            }
            ExpectedOrder::ZetaRate => {
                let pts = (12..=16)
                    .map(|k| {
                        let h = 3f64.powi(-k);
                        Ok((h, f.zeta(h / 2.0)? + f.chi(h / 2.0)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(super::sweep::fit_order(&pts)?.median.min(1.0))
            }
        }
    }
}

/// Where reference densities come from.
#[derive(Clone, Debug)]
pub enum Reference {
    /// [`crate::density::exact_density_batch`], closed form when available.
    Exact,
    /// A supplied table holding every lattice point of the window.
    Table(DensityTable),
}

/// A named model with its sweep configuration.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub model: LevyModel,
    pub scheme: SchemeKind,
    pub reference: Reference,
    pub expected: ExpectedOrder,
    pub t: f64,
    /// Interval of `y` over which the sup is taken.
    pub window: (f64, f64),
    /// Decreasing lattice steps.
    pub steps: Vec<f64>,
    /// Truncation half-width for the exponential route.
    pub m: f64,
}

/// The truncated atomic sequences stand in for infinite measures.
const INFINITE_MASS: ActivityHint = ActivityHint { infinite_mass: true, infinite_variation: false };

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

fn triadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 3f64.powi(-k)).collect()
}

/// Symmetric atoms `w(x_n)` at `±x_n`, `x_n = (3/2)3^{-n}`, `n = 1..=ATOM_DEPTH`.
pub fn triadic_atoms(scale: f64, weight: impl Fn(f64) -> f64) -> Vec<Atom> {
    (1..=ATOM_DEPTH)
        .flat_map(|n| {
            let x = 1.5 * 3f64.powi(-n);
            let w = scale * weight(x);
            [Atom::at(x, w), Atom::at(-x, w)]
        })
        .collect()
}

pub fn gaussian() -> Result<Fixture> {
    Ok(Fixture {
        name: "gaussian".into(),
        model: LevyModel::brownian(1.0, 0.0)?,
        scheme: SchemeKind::Scheme1,
        reference: Reference::Exact,
        expected: ExpectedOrder::Two,
        t: 1.0,
        window: (-3.0, 3.0),
        steps: dyadic(1, 6),
        m: 5.0,
    })
}

pub fn gaussian_drift() -> Result<Fixture> {
    Ok(Fixture {
        name: "gaussian_drift".into(),
        model: LevyModel::brownian(1.0, 1.0)?,
        window: (-2.0, 4.0),
        ..gaussian()?
    })
}

pub fn cp_two_atoms() -> Result<Fixture> {
    let measure = LevyMeasure::atomic(1, vec![Atom::at(0.5, 0.5), Atom::at(-0.5, 0.5)])?;
    Ok(Fixture {
        name: "cp_two_atoms".into(),
        model: LevyModel::univariate(1.0, 0.0, measure, 0)?,
        expected: ExpectedOrder::One,
        ..gaussian()?
    })
}

/// `σ² = 1` with `λ = ½(δ_{3/2} + δ_{-3/2}) + ½Σ(δ_{3^{-k}} + δ_{-3^{-k}})`.
pub fn finite_variation_atomic() -> Result<Fixture> {
    let mut atoms = vec![Atom::at(1.5, 0.5), Atom::at(-1.5, 0.5)];
    atoms.extend((1..=ATOM_DEPTH).flat_map(|k| {
        let x = 3f64.powi(-k);
        [Atom::at(x, 0.5), Atom::at(-x, 0.5)]
    }));
    Ok(Fixture {
        name: "finite_variation_atomic".into(),
        model: LevyModel::univariate(1.0, 0.0, LevyMeasure::atomic(1, atoms)?.with_activity_hint(INFINITE_MASS), 1)?,
        scheme: SchemeKind::Scheme1,
        reference: Reference::Exact,
        expected: ExpectedOrder::KappaRate,
        t: 1.0,
        window: (-3.0, 3.0),
        steps: triadic(1, 5),
        m: 5.0,
    })
}

/// `σ² = 0`, `λ = Σ (1/x_n)(δ_{x_n} + δ_{-x_n})`; Orey with `ε = 1`.
pub fn infinite_variation_atomic() -> Result<Fixture> {
    let measure = LevyMeasure::atomic(1, triadic_atoms(1.0, |x| 1.0 / x))?
        .with_activity_hint(ActivityHint { infinite_mass: true, infinite_variation: true });
    Ok(Fixture {
        name: "infinite_variation_atomic".into(),
        model: LevyModel::univariate(0.0, 0.0, measure, 1)?.with_orey_epsilon(1.0)?,
        scheme: SchemeKind::Scheme2,
        reference: Reference::Exact,
        expected: ExpectedOrder::ZetaRate,
        t: 1.0,
        window: (-1.0, 1.0),
        steps: triadic(1, 5),
        m: 5.0,
    })
}

/// `σ² = 0`, `λ = ½Σ x_n^{-1/2}(δ_{x_n} + δ_{-x_n})`; Orey with `ε = 1/2`.
pub fn orey_half() -> Result<Fixture> {
    let measure = LevyMeasure::atomic(1, triadic_atoms(0.5, |x| 1.0 / x.sqrt()))?.with_activity_hint(INFINITE_MASS);
    Ok(Fixture {
        name: "orey_half".into(),
        model: LevyModel::univariate(0.0, 0.0, measure, 1)?.with_orey_epsilon(0.5)?,
        expected: ExpectedOrder::KappaRate,
        ..infinite_variation_atomic()?
    })
}

/// `λ(dx) = dx/|x|^{1+α}`, `σ² = μ = 0`, scheme 2, `V = 1`.
pub fn alpha_stable(alpha: f64) -> Result<Fixture> {
    let m = if alpha <= 0.5 {
        500.0
    } else if alpha <= 1.0 {
        100.0
    } else if alpha <= 4.0 / 3.0 {
        30.0
    } else {
        20.0
    };
    let model = LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(alpha, 1.0)?, 1)?.with_orey_epsilon(alpha)?;
    Ok(Fixture {
        name: format!("alpha_stable_{alpha:.4}"),
        model,
        scheme: SchemeKind::Scheme2,
        reference: Reference::Exact,
        expected: ExpectedOrder::KappaRate,
        t: 1.0,
        window: (0.0, 1.0),
        steps: dyadic(0, 3),
        m,
    })
}

/// `λ(dx) = e^{-|x|}/|x| dx`, `σ² = μ = 0`, scheme 2, `V = 1`.
pub fn vg() -> Result<Fixture> {
    Ok(Fixture {
        name: "vg".into(),
        model: LevyModel::univariate(0.0, 0.0, LevyMeasure::variance_gamma(1.0)?, 1)?,
        scheme: SchemeKind::Scheme2,
        reference: Reference::Exact,
        expected: ExpectedOrder::One,
        t: 1.0,
        window: (0.0, 1.0),
        steps: dyadic(0, 3),
        m: 5.0,
    })
}

/// Parameters of the put pricing example.
pub const CGMY_PUTS: CgmyParams = CgmyParams { c: 0.5, lambda_plus: 3.5, lambda_minus: 2.0, alpha: 0.5 };

pub fn cgmy() -> Result<Fixture> {
    Ok(Fixture {
        name: "cgmy".into(),
        model: CGMY_PUTS.risk_neutral_model()?.with_orey_epsilon(0.5)?,
        scheme: SchemeKind::Scheme2,
        reference: Reference::Exact,
        expected: ExpectedOrder::One,
        t: 1.0,
        window: (-1.0, 1.0),
        steps: dyadic(1, 6),
        m: 3.0,
    })
}

/// All named fixtures.
pub fn fixtures() -> Result<Vec<Fixture>> {
    let mut all = vec![
        gaussian()?,
        gaussian_drift()?,
        cp_two_atoms()?,
        finite_variation_atomic()?,
        infinite_variation_atomic()?,
        orey_half()?,
    ];
    for alpha in [0.5, 1.0, 4.0 / 3.0, 5.0 / 3.0] {
        all.push(alpha_stable(alpha)?);
    }
    all.push(vg()?);
    all.push(cgmy()?);
    Ok(all)
}

/// Looks a fixture up by name; `alpha_stable_<α>` accepts any `α ∈ (0, 2)`.
pub fn fixture(name: &str) -> Result<Fixture> {
    if let Some(a) = name.strip_prefix("alpha_stable_").or_else(|| name.strip_prefix("alpha_stable:")) {
        let alpha = parse_alpha(a).ok_or_else(|| LevyError::Config(format!("bad stability index in `{name}`")))?;
        return alpha_stable(alpha);
    }
    match name {
        "gaussian" => gaussian(),
        "gaussian_drift" => gaussian_drift(),
        "cp_two_atoms" => cp_two_atoms(),
        "finite_variation_atomic" => finite_variation_atomic(),
        "infinite_variation_atomic" => infinite_variation_atomic(),
        "orey_half" => orey_half(),
        "vg" => vg(),
        "cgmy" => cgmy(),
        _ => Err(LevyError::Config(format!("unknown fixture `{name}`"))),
    }
}

fn parse_alpha(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}
