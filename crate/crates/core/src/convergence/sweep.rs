use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use super::fixtures::{Fixture, Reference};
use crate::density::{
    discrete_density_batch, exact_density_batch, expectation_discrete, expectation_exact, QuadWindow, DEFAULT_TOL,
};
use crate::discretization::{build_generator, Discretization, LatticeSpec, SchemeKind};
use crate::error::{LevyError, Result};
use crate::levy_model::LevyModel;

/// Successive-ratio and regression estimates of a convergence order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    /// Median of `log(e_k/e_{k+1}) / log(h_k/h_{k+1})`.
    pub median: f64,
    /// Least-squares slope of `log e` against `log h`.
    pub slope: f64,
    pub r2: f64,
}

/// Fits an order to `(h, error)` pairs with decreasing `h`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(LevyError::Config(format!("order fitting needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(h, e)| !(h > 0.0) || !(e >= 0.0)) {
        return Err(LevyError::Config("steps must be positive and errors nonnegative".into()));
    }
    if points.iter().all(|&(_, e)| e == 0.0) {
        return Ok(OrderFit { median: f64::INFINITY, slope: f64::INFINITY, r2: 1.0 });
    }
    let mut ratios: Vec<f64> = points
        .windows(2)
        .map(|w| {
            let (h0, e0) = w[0];
            let (h1, e1) = w[1];
            if e1 == 0.0 {
                f64::INFINITY
            } else {
                (e0 / e1).ln() / (h0 / h1).ln()
            }
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let median = if n % 2 == 1 { ratios[n / 2] } else { 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]) };
    let logs: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(h, e)| (h.ln(), e.ln())).collect();
    let (slope, r2) = regression(&logs);
    Ok(OrderFit { median, slope, r2 })
}

fn regression(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Pointwise comparison of exact and lattice densities on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct SupError {
    pub sup: f64,
    /// `(y, |p_t(0, y) − (1/h)P^h_t(0, y)|)` for each lattice `y` in the window.
    pub points: Vec<(f64, f64)>,
}

impl SupError {
    pub fn argmax(&self) -> f64 {
        self.points.iter().fold((f64::NAN, -1.0), |acc, &(y, e)| if e > acc.1 { (y, e) } else { acc }).0
    }
}

/// Lattice points `kh` with `lo ≤ kh ≤ hi`.
pub fn lattice_window(h: f64, (lo, hi): (f64, f64)) -> Vec<f64> {
    let k0 = (lo / h - 1e-9).ceil() as i64;
    let k1 = (hi / h + 1e-9).floor() as i64;
    (k0..=k1).map(|k| k as f64 * h).collect()
}

/// `max_y |p_t(0, y) − (1/h)P^h_t(0, y)|` over lattice `y` in `window`; the
/// lattice side uses the Fourier representation of the untruncated chain.
pub fn sup_error(
    model: &LevyModel,
    spec: &LatticeSpec,
    scheme: SchemeKind,
    t: f64,
    window: (f64, f64),
) -> Result<SupError> {
    let disc = Discretization::new(model, spec, scheme)?;
    let ys = lattice_window(spec.h, window);
    let exact = exact_density_batch(model, t, &ys, DEFAULT_TOL)?;
    sup_against(&disc, t, &ys, &exact.values)
}

fn sup_against(disc: &Discretization, t: f64, ys: &[f64], reference: &[f64]) -> Result<SupError> {
    let lattice = discrete_density_batch(disc, t, ys, DEFAULT_TOL)?;
    let points: Vec<(f64, f64)> =
        ys.iter().zip(reference).zip(&lattice.values).map(|((&y, a), b)| (y, (a - b).abs())).collect();
    let sup = points.iter().fold(0.0f64, |m, p| m.max(p.1));
    Ok(SupError { sup, points })
}

/// Signed `D(0, 0) = p_t(0, 0) − (1/h)P^h_t(0, 0)`.
pub fn origin_gap(model: &LevyModel, spec: &LatticeSpec, scheme: SchemeKind, t: f64) -> Result<f64> {
    let disc = Discretization::new(model, spec, scheme)?;
    let exact = exact_density_batch(model, t, &[0.0], DEFAULT_TOL)?.values[0];
    let lattice = discrete_density_batch(&disc, t, &[0.0], DEFAULT_TOL)?.values[0];
    Ok(exact - lattice)
}

/// One step of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    pub sup_error: f64,
    pub errors: Vec<(f64, f64)>,
    pub zeta: f64,
    pub kappa: f64,
    pub elapsed: Duration,
}

/// Errors along a decreasing sequence of steps with the fitted order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub fixture: String,
    pub t: f64,
    pub rows: Vec<SweepRow>,
    pub expected: f64,
    pub fit: OrderFit,
    pub slack: f64,
    pub pass: bool,
}

/// Slack allowed below the expected order.
pub const ORDER_SLACK: f64 = 0.25;

impl SweepReport {
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.h, r.sup_error)).collect()
    }

    /// Successive ratios `e_{k+1}/e_k`.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].sup_error / w[0].sup_error).collect()
    }

    /// Summary CSV. Timings are left out so that reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> Result<()> {
        writeln!(w, "#fixture={}", self.fixture)?;
        writeln!(w, "#t={}", self.t)?;
        writeln!(w, "#expected_order={}", self.expected)?;
        writeln!(w, "#fitted_order={}", self.fit.median)?;
        writeln!(w, "#regression_slope={}", self.fit.slope)?;
        writeln!(w, "#r2={}", self.fit.r2)?;
        writeln!(w, "#slack={}", self.slack)?;
        writeln!(w, "#pass={}", self.pass)?;
        for (k, v) in extra {
            writeln!(w, "#{k}={v}")?;
        }
        writeln!(w, "h,sup_error,argmax_y,zeta_half_h,kappa_half_h,error_over_zeta")?;
        for r in &self.rows {
            let arg = r.errors.iter().fold((f64::NAN, -1.0), |a, &(y, e)| if e > a.1 { (y, e) } else { a }).0;
            let ratio = if r.zeta > 0.0 { r.sup_error / r.zeta } else { f64::NAN };
            writeln!(w, "{},{:.10e},{},{:.10e},{:.10e},{:.6e}", r.h, r.sup_error, arg, r.zeta, r.kappa, ratio)?;
        }
        Ok(())
    }

    /// Per-point errors, one row per `(h, y)`.
    pub fn write_points_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#fixture={}", self.fixture)?;
        writeln!(w, "h,y,error")?;
        for r in &self.rows {
            for (y, e) in &r.errors {
                writeln!(w, "{},{},{:.10e}", r.h, y, e)?;
            }
        }
        Ok(())
    }
}

/// Runs the fixture over its steps (in parallel) and fits the order.
pub fn run_sweep(fixture: &Fixture) -> Result<SweepReport> {
    run_sweep_with(fixture, &fixture.steps)
}

pub fn run_sweep_with(fixture: &Fixture, steps: &[f64]) -> Result<SweepReport> {
    if steps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LevyError::Config("sweep steps must be strictly decreasing".into()));
    }
    let model = &fixture.model;
    let rows = steps
        .par_iter()
        .map(|&h| -> Result<SweepRow> {
            let start = Instant::now();
            let spec = LatticeSpec::new(h, model.dim(), fixture.m.max(h))?;
            let disc = Discretization::new(model, &spec, fixture.scheme)?;
            let ys = lattice_window(h, fixture.window);
            let reference = match &fixture.reference {
                Reference::Exact => exact_density_batch(model, fixture.t, &ys, DEFAULT_TOL)?.values,
                Reference::Table(table) => ys
                    .iter()
                    .map(|&y| table.value_at(&[y]).ok_or_else(|| LevyError::StateOutside(vec![y])))
                    .collect::<Result<Vec<_>>>()?,
            };
            let sup = sup_against(&disc, fixture.t, &ys, &reference)?;
            let f = model.functionals();
            let delta = (h / 2.0).min(1.0);
            Ok(SweepRow {
                h,
                sup_error: sup.sup,
                errors: sup.points,
                zeta: f.zeta(delta)? + f.chi(delta)?,
                kappa: f.kappa(delta)?,
                elapsed: start.elapsed(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let expected = fixture.expected.value(model)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.sup_error)).collect();
    let fit = fit_order(&points)?;
    Ok(SweepReport {
        fixture: fixture.name.clone(),
        t: fixture.t,
        rows,
        expected,
        fit,
        slack: ORDER_SLACK,
        pass: fit.median >= expected - ORDER_SLACK,
    })
}

/// `|E f(X_t) − E f(X^h_t)|` along `steps`, the chain truncated to `[-M, M]`.
pub fn expectation_errors(
    model: &LevyModel,
    scheme: SchemeKind,
    t: f64,
    m: f64,
    steps: &[f64],
    f: &(dyn Fn(f64) -> f64 + Sync),
    window: &QuadWindow,
) -> Result<Vec<(f64, f64)>> {
    let exact = expectation_exact(model, t, 0.0, f, window)?;
    steps
        .par_iter()
        .map(|&h| {
            let spec = LatticeSpec::new(h, 1, m)?;
            let gen = build_generator(model, &spec, scheme)?;
            let approx = expectation_discrete(&gen, t, &[0.0], &|y| f(y[0]))?;
            Ok((h, (exact - approx.value).abs()))
        })
        .collect()
}

/// `Ψ` and `Ψ^h` on a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentRow {
    pub h: f64,
    pub p: f64,
    pub psi: Complex64,
    pub psi_h: Complex64,
}

impl ExponentRow {
    pub fn error(&self) -> f64 {
        (self.psi_h - self.psi).norm()
    }
}

/// Characteristic exponents of the process and of each lattice chain.
pub fn char_exponent_sweep(
    model: &LevyModel,
    steps: &[f64],
    scheme: SchemeKind,
    ps: &[f64],
) -> Result<Vec<ExponentRow>> {
    if model.dim() != 1 {
        return Err(LevyError::InvalidModel("exponent sweeps are univariate".into()));
    }
    let psi: Vec<Complex64> = ps.iter().map(|&p| model.psi1(p)).collect::<Result<_>>()?;
    let per_h = steps
        .par_iter()
        .map(|&h| -> Result<Vec<ExponentRow>> {
            let spec = LatticeSpec::new(h, 1, h.max(1.0))?;
            let disc = Discretization::new(model, &spec, scheme)?;
            ps.iter().zip(&psi).map(|(&p, &psi)| Ok(ExponentRow { h, p, psi, psi_h: disc.psi_h(&[p])? })).collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_h.into_iter().flatten().collect())
}

pub fn write_exponent_csv<W: Write>(rows: &[ExponentRow], mut w: W, extra: &[(String, String)]) -> Result<()> {
    for (k, v) in extra {
        writeln!(w, "#{k}={v}")?;
    }
    writeln!(w, "h,p,re_psi,im_psi,re_psi_h,im_psi_h,abs_error")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.6e}",
            r.h,
            r.p,
            r.psi.re,
            r.psi.im,
            r.psi_h.re,
            r.psi_h.im,
            r.error()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fits() {
        let quad = fit_order(&[(1.0, 1.0), (0.5, 0.25), (0.25, 1.0 / 16.0)]).unwrap();
        assert!((quad.median - 2.0).abs() < 1e-12 && (quad.slope - 2.0).abs() < 1e-12);
        assert!((quad.r2 - 1.0).abs() < 1e-12);
        let lin = fit_order(&[(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)]).unwrap();
        assert!((lin.median - 1.0).abs() < 1e-12);
        assert_eq!(fit_order(&[(1.0, 0.0), (0.5, 0.0), (0.25, 0.0)]).unwrap().median, f64::INFINITY);
        assert!(fit_order(&[(1.0, 1.0), (0.5, 0.5)]).is_err());
        let third = fit_order(&[(1.0, 1.0), (1.0 / 3.0, 1.0 / 3.0), (1.0 / 9.0, 1.0 / 9.0)]).unwrap();
        assert!((third.median - 1.0).abs() < 1e-12);
    }

    #[test]
    fn windows() {
        assert_eq!(lattice_window(0.5, (-1.0, 1.0)), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(lattice_window(1.0 / 3.0, (0.0, 1.0)).len(), 4);
    }

    #[test]
    fn self_comparison_vanishes() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let spec = LatticeSpec::new(0.25, 1, 5.0).unwrap();
        let disc = Discretization::new(&m, &spec, SchemeKind::Scheme1).unwrap();
        let ys = lattice_window(0.25, (-1.0, 1.0));
        let lattice = discrete_density_batch(&disc, 1.0, &ys, DEFAULT_TOL).unwrap().values;
        assert_eq!(sup_against(&disc, 1.0, &ys, &lattice).unwrap().sup, 0.0);
    }

    #[test]
    fn exponent_sweep_shape() {
        let m = LevyModel::univariate(0.0, 0.0, crate::levy_model::LevyMeasure::stable(0.5, 1.0).unwrap(), 1).unwrap();
        let ps: Vec<f64> = (0..=8).map(|i| i as f64 * std::f64::consts::PI / 8.0).collect();
        let rows = char_exponent_sweep(&m, &[1.0, 0.5, 0.25, 0.125], SchemeKind::Scheme2, &ps).unwrap();
        assert_eq!(rows.len(), 36);
        assert_eq!(rows[0].psi, Complex64::new(0.0, 0.0));
        assert_eq!(rows[0].psi_h, Complex64::new(0.0, 0.0));
        // monotone once p sits in the lower half of each coarser band
        for k in 1..ps.len() {
            for j in 0..3 {
                let (a, b) = (&rows[j * ps.len() + k], &rows[(j + 1) * ps.len() + k]);
                if a.p * a.h <= std::f64::consts::FRAC_PI_2 {
                    assert!(b.error() <= a.error(), "p={} h={}", a.p, a.h);
                }
            }
        }
    }
}
