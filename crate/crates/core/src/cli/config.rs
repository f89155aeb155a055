use std::path::{Path, PathBuf};
use std::sync::Arc;

use meval::{Context, Expr};
use serde::Deserialize;

use crate::convergence::{fixture, Fixture};
use crate::density::{martingale_drift, put_truncation, DEFAULT_TOL};
use crate::discretization::SchemeKind;
use crate::error::{LevyError, Result};
use crate::levy_model::{ActivityHint, Atom, Density1, LevyMeasure, LevyModel};

/// Version of the configuration format understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// A scalar or a per-axis vector.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Axes {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Axes {
    fn to_vec(&self, dim: usize) -> Vec<f64> {
        match self {
            Axes::Scalar(v) => vec![*v; dim],
            Axes::Vector(v) => v.clone(),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Axes::Scalar(_) => None,
            Axes::Vector(v) => Some(v.len()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub at: Axes,
    pub weight: f64,
}

/// Model section: a named fixture, a parametric family or a density formula.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Another TOML file holding this section; its fields are overridden by
    /// the ones given here.
    pub file: Option<PathBuf>,
    /// `brownian`, `stable`, `variance_gamma`, `cgmy`, `atomic`, `density` or `fixture`.
    pub family: Option<String>,
    /// Fixture name when `family = "fixture"`.
    pub name: Option<String>,
    pub sigma2: Option<Axes>,
    pub mu: Option<Axes>,
    pub cutoff: Option<u8>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub scale: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub lambda_minus: Option<f64>,
    /// Lévy density in the variable `x`.
    pub density: Option<String>,
    pub symmetric: Option<bool>,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
    pub infinite_activity: Option<bool>,
    pub infinite_variation: Option<bool>,
    pub orey_epsilon: Option<f64>,
    /// Replace `μ` by the drift making `e^{X}` a martingale.
    pub martingale: Option<bool>,
}

impl ModelConfig {
    fn merge_over(self, base: ModelConfig) -> ModelConfig {
        ModelConfig {
            file: None,
            family: self.family.or(base.family),
            name: self.name.or(base.name),
            sigma2: self.sigma2.or(base.sigma2),
            mu: self.mu.or(base.mu),
            cutoff: self.cutoff.or(base.cutoff),
            alpha: self.alpha.or(base.alpha),
            c: self.c.or(base.c),
            scale: self.scale.or(base.scale),
            lambda_plus: self.lambda_plus.or(base.lambda_plus),
            lambda_minus: self.lambda_minus.or(base.lambda_minus),
            density: self.density.or(base.density),
            symmetric: self.symmetric.or(base.symmetric),
            atoms: if self.atoms.is_empty() { base.atoms } else { self.atoms },
            infinite_activity: self.infinite_activity.or(base.infinite_activity),
            infinite_variation: self.infinite_variation.or(base.infinite_variation),
            orey_epsilon: self.orey_epsilon.or(base.orey_epsilon),
            martingale: self.martingale.or(base.martingale),
        }
    }

    fn need(&self, v: Option<f64>, field: &str) -> Result<f64> {
        v.ok_or_else(|| {
            LevyError::Config(format!(
                "model family `{}` needs the field `{field}`",
                self.family.as_deref().unwrap_or("?")
            ))
        })
    }

    fn dim(&self) -> usize {
        let from_atoms = self.atoms.first().and_then(|a| a.at.dim());
        self.sigma2.as_ref().and_then(Axes::dim).or(self.mu.as_ref().and_then(Axes::dim)).or(from_atoms).unwrap_or(1)
    }

    /// The fixture named by the section, if any.
    pub fn fixture(&self) -> Result<Option<Fixture>> {
        match self.family.as_deref() {
            Some("fixture") => {
                let name =
                    self.name.as_deref().ok_or_else(|| LevyError::Config("fixture model needs `name`".into()))?;
                Ok(Some(fixture(name)?))
            }
            _ => Ok(None),
        }
    }

    pub fn build(&self) -> Result<LevyModel> {
        if let Some(f) = self.fixture()? {
            return Ok(f.model);
        }
        let family = self.family.as_deref().unwrap_or("brownian");
        let dim = self.dim();
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let loc = a.at.to_vec(1);
                if loc.len() != dim {
                    return Err(LevyError::InvalidModel(format!("atom at {loc:?} is not {dim}-dimensional")));
                }
                Ok(Atom::new(loc, a.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        let measure = match family {
            "brownian" | "atomic" => LevyMeasure::zero(dim),
            "stable" => LevyMeasure::stable(self.need(self.alpha, "alpha")?, self.c.unwrap_or(1.0))?,
            "variance_gamma" | "vg" => LevyMeasure::variance_gamma(self.scale.unwrap_or(1.0))?,
            "cgmy" => LevyMeasure::cgmy(
                self.need(self.c, "c")?,
                self.need(self.lambda_plus, "lambda_plus")?,
                self.need(self.lambda_minus, "lambda_minus")?,
                self.need(self.alpha, "alpha")?,
            )?,
            "density" => {
                let text =
                    self.density.as_deref().ok_or_else(|| LevyError::Config("density model needs `density`".into()))?;
                let f = Formula::parse(text, &["x"])?;
                let rho: Density1 = Arc::new(move |x| f.eval(&[x]));
                LevyMeasure::density(rho, self.symmetric.unwrap_or(false))
            }
            other => return Err(LevyError::Config(format!("unknown model family `{other}`"))),
        };
        if dim > 1 && !matches!(family, "brownian" | "atomic") {
            return Err(LevyError::Config(format!("family `{family}` is univariate")));
        }
        let mut measure = measure.with_atoms(atoms)?;
        if self.infinite_activity.is_some() || self.infinite_variation.is_some() {
            let infinite_variation = self.infinite_variation.unwrap_or(false);
            measure = measure.with_activity_hint(ActivityHint {
                infinite_mass: self.infinite_activity.unwrap_or(false) || infinite_variation,
                infinite_variation,
            });
        }
        let sigma2 = self.sigma2.as_ref().map_or(vec![0.0; dim], |s| s.to_vec(dim));
        let cutoff = self.cutoff.unwrap_or(if measure.is_zero() { 0 } else { 1 });
        let mu = if self.martingale == Some(true) {
            if dim != 1 {
                return Err(LevyError::Config("martingale drift is univariate".into()));
            }
            vec![martingale_drift(sigma2[0], &measure, cutoff)?]
        } else {
            self.mu.as_ref().map_or(vec![0.0; dim], |m| m.to_vec(dim))
        };
        let model = LevyModel::new(sigma2, mu, measure, cutoff)?;
        match self.orey_epsilon {
            Some(eps) => model.with_orey_epsilon(eps),
            None => Ok(model),
        }
    }
}

/// Truncation half-width: a number or the rule `"half_log"` for `(½ log 1/h) ∨ 1`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TruncationRule {
    Fixed(f64),
    Rule(String),
}

impl TruncationRule {
    pub fn at(&self, h: f64) -> Result<f64> {
        let m = match self {
            TruncationRule::Fixed(m) => *m,
            TruncationRule::Rule(r) if r == "half_log" => put_truncation(h),
            TruncationRule::Rule(r) => return Err(LevyError::Config(format!("unknown truncation rule `{r}`"))),
        };
        Ok(m.max(h))
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensityOptions {
    pub window: Option<(f64, f64)>,
    /// Also compute the truncated chain distribution by the exponential action.
    #[serde(default)]
    pub expm: bool,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PsiOptions {
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergeOptions {
    /// Named fixtures; when empty the configured model is swept.
    #[serde(default)]
    pub fixtures: Vec<String>,
    pub expected_order: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub slack: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriceOptions {
    pub s0: f64,
    pub r: f64,
    pub strikes: Vec<f64>,
    /// `"put"`, `"call"` or a formula in the terminal price `s` and strike `k`.
    #[serde(default = "default_payoff")]
    pub payoff: String,
    /// Reference prices, one per strike.
    pub reference: Option<Vec<f64>>,
}

fn default_payoff() -> String {
    "put".into()
}

/// A run of the command-line tool. Everything is deterministic.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub model: ModelConfig,
    pub scheme: Option<SchemeKind>,
    #[serde(default)]
    pub h: Vec<f64>,
    pub m: Option<TruncationRule>,
    #[serde(default = "default_t")]
    pub t: f64,
    pub tol: Option<f64>,
    pub output: Option<PathBuf>,
    /// Emit gnuplot scripts next to the tables.
    #[serde(default)]
    pub gnuplot: bool,
    #[serde(default)]
    pub density: DensityOptions,
    #[serde(default)]
    pub psi: PsiOptions,
    #[serde(default)]
    pub converge: ConvergeOptions,
    pub price: Option<PriceOptions>,
}

fn default_t() -> f64 {
    1.0
}

impl RunConfig {
    /// Parses a configuration; a model `file` is resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| LevyError::Config(format!("config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(LevyError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        if let Some(file) = cfg.model.file.clone() {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| LevyError::Config(format!("model file {}: {e}", path.display())))?;
            let base_model: ModelConfig =
                toml::from_str(&text).map_err(|e| LevyError::Config(format!("model file {}: {e}", path.display())))?;
            cfg.model = cfg.model.merge_over(base_model);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(LevyError::Config("lattice steps must be positive".into()));
        }
        if self.h.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(LevyError::Config("the h list must be strictly decreasing".into()));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(LevyError::Config(format!("tolerance must lie in (0, 1), got {tol}")));
            }
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(LevyError::Config(format!("time t must be nonnegative, got {}", self.t)));
        }
        if let Some(TruncationRule::Fixed(m)) = self.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(LevyError::Config(format!("M must be positive, got {m}")));
            }
        }
        Ok(())
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn steps(&self) -> Result<&[f64]> {
        if self.h.is_empty() {
            return Err(LevyError::Config("the h list is empty".into()));
        }
        Ok(&self.h)
    }

    pub fn truncation(&self) -> TruncationRule {
        self.m.clone().unwrap_or(TruncationRule::Fixed(5.0))
    }

    /// Configured scheme, or scheme 1 for univariate diffusions, the
    /// multivariate scheme for `d > 1` and scheme 2 otherwise.
    pub fn scheme_for(&self, model: &LevyModel) -> SchemeKind {
        self.scheme.unwrap_or(if model.dim() > 1 {
            SchemeKind::Multivariate
        } else if model.sigma2()[0] > 0.0 {
            SchemeKind::Scheme1
        } else {
            SchemeKind::Scheme2
        })
    }
}

thread_local! {
    static BUILTINS: Context<'static> = Context::new();
}

/// A parsed arithmetic expression in named variables.
#[derive(Clone, Debug)]
pub struct Formula {
    expr: Arc<Expr>,
    vars: Vec<String>,
}

impl Formula {
    pub fn parse(text: &str, vars: &[&str]) -> Result<Self> {
        let expr: Expr = text.parse().map_err(|e| LevyError::Config(format!("expression `{text}`: {e}")))?;
        let f = Self { expr: Arc::new(expr), vars: vars.iter().map(|v| v.to_string()).collect() };
        let probe = vec![0.5; vars.len()];
        f.try_eval(&probe).map_err(|e| LevyError::Config(format!("expression `{text}`: {e}")))?;
        Ok(f)
    }

    fn try_eval(&self, args: &[f64]) -> std::result::Result<f64, meval::Error> {
        let bound: Vec<(&str, f64)> = self.vars.iter().map(String::as_str).zip(args.iter().copied()).collect();
        BUILTINS.with(|ctx| self.expr.eval_with_context((bound, ctx)))
    }

    /// Evaluates the expression; failures give NaN.
    pub fn eval(&self, args: &[f64]) -> f64 {
        self.try_eval(args).unwrap_or(f64::NAN)
    }
}

/// Payoff of a claim on the terminal price `s` with strike `k`.
#[derive(Clone, Debug)]
pub enum Payoff {
    Put,
    Call,
    Custom(Formula),
}

impl Payoff {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "put" => Ok(Payoff::Put),
            "call" => Ok(Payoff::Call),
            other => Ok(Payoff::Custom(Formula::parse(other, &["s", "k"])?)),
        }
    }

    pub fn value(&self, s: f64, k: f64) -> f64 {
        match self {
            Payoff::Put => (k - s).max(0.0),
            Payoff::Call => (s - k).max(0.0),
            Payoff::Custom(f) => f.eval(&[s, k]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn parses_a_minimal_config() {
        let c = cfg("version = 1\nh = [1.0, 0.5]\n[model]\nfamily = \"brownian\"\nsigma2 = 1.0\nmu = 1.0\n").unwrap();
        let model = c.model.build().unwrap();
        assert_eq!(model.mu(), &[1.0]);
        assert_eq!(c.scheme_for(&model), SchemeKind::Scheme1);
        assert_eq!(c.truncation().at(0.5).unwrap(), 5.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(cfg("version = 2\n").is_err());
        assert!(cfg("version = 1\nh = [0.5, 1.0]\n").is_err());
        assert!(cfg("version = 1\ntol = -1.0\n").is_err());
        assert!(cfg("version = 1\nbogus = 3\n").is_err());
        assert!(cfg("version = 1\n").unwrap().steps().is_err());
    }

    #[test]
    fn formulas_and_payoffs() {
        let f = Formula::parse("exp(-abs(x))/abs(x)", &["x"]).unwrap();
        assert!((f.eval(&[-2.0]) - (-2.0f64).exp() / 2.0).abs() < 1e-15);
        assert!(Formula::parse("y + 1", &["x"]).is_err());
        assert_eq!(Payoff::parse("put").unwrap().value(90.0, 100.0), 10.0);
        assert_eq!(Payoff::parse("max(s - k, 0) * 2").unwrap().value(110.0, 100.0), 20.0);
    }

    #[test]
    fn density_models_match_their_families() {
        let c = cfg("version = 1\n[model]\nfamily = \"density\"\ndensity = \"exp(-abs(x))/abs(x)\"\nsymmetric = true\ncutoff = 1\n")
            .unwrap();
        let m = c.model.build().unwrap();
        let vg = LevyModel::univariate(0.0, 0.0, LevyMeasure::variance_gamma(1.0).unwrap(), 1).unwrap();
        let (a, b) = (m.psi1(1.3).unwrap(), vg.psi1(1.3).unwrap());
        assert!((a - b).norm() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn martingale_drift_requires_exponential_moments() {
        let base =
            "version = 1\n[model]\nfamily = \"cgmy\"\nc = 0.5\nlambda_minus = 2.0\nalpha = 0.5\nmartingale = true\n";
        assert!(cfg(&format!("{base}lambda_plus = 3.5\n")).unwrap().model.build().is_ok());
        let err = cfg(&format!("{base}lambda_plus = 1.0\n")).unwrap().model.build().unwrap_err();
        assert!(matches!(err, LevyError::NoExponentialMoment(_)), "{err}");
    }
}
