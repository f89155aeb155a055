//! The `levy-lattice` command-line tool: densities, exponent sweeps,
//! convergence sweeps and option prices driven by a TOML run configuration.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use config::{
    AtomConfig, Axes, ConvergeOptions, DensityOptions, Formula, ModelConfig, Payoff, PriceOptions, PsiOptions,
    RunConfig, TruncationRule, CONFIG_VERSION,
};

use crate::convergence::{
    char_exponent_sweep, lattice_window, run_sweep_with, write_exponent_csv, ExpectedOrder, Fixture, Reference,
    SweepReport,
};
use crate::density::{
    chain_distribution, discrete_density_batch, discrete_density_fourier, exact_density, exact_density_batch,
    price_european, DensityTable, Route, EXPM_TOL,
};
use crate::discretization::{build_generator, Discretization, LatticeSpec, SchemeKind};
use crate::error::{LevyError, Result};
use crate::levy_model::LevyModel;

#[derive(Debug, Parser)]
#[command(name = "levy-lattice", version, about = "Lattice chain approximations of Lévy processes")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Quadrature tolerance; overrides the configuration.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Lattice and exact transition densities for each h.
    Density,
    /// Characteristic exponents of the process and of each chain.
    Psi,
    /// Convergence sweeps with an order gate.
    Converge,
    /// Option prices for each h and strike.
    Price,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Psi => "psi",
            Command::Converge => "converge",
            Command::Price => "price",
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_GATE_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit code for a failed run: invalid input is a usage error, everything
/// else a numerical failure.
pub fn exit_code(err: &LevyError) -> i32 {
    match err {
        LevyError::InvalidModel(_)
        | LevyError::InvalidLattice(_)
        | LevyError::NoDensity(_)
        | LevyError::SchemeInvalid(_)
        | LevyError::StepTooLarge { .. }
        | LevyError::NegativeRate { .. }
        | LevyError::NegativeTime(_)
        | LevyError::NoExponentialMoment(_)
        | LevyError::StateOutside(_)
        | LevyError::Config(_) => EXIT_USAGE,
        LevyError::Quadrature { .. }
        | LevyError::EnumerationOverflow(_)
        | LevyError::ExpmTooStiff { .. }
        | LevyError::WindowTooSmall { .. }
        | LevyError::Io(_) => EXIT_NUMERICAL,
    }
}

/// What a command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Lines printed to standard output.
    pub lines: Vec<String>,
    /// `false` when a convergence gate failed.
    pub pass: bool,
}

/// Metadata written at the top of every output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub config_sha256: String,
    pub command: &'static str,
    pub tol: f64,
}

impl Provenance {
    pub fn new(config_text: &str, cfg: &RunConfig, command: Command) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        hasher.update(format!("\ntol={:e}", cfg.tol()).as_bytes());
        let digest = hasher.finalize();
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self { config_sha256, command: command.name(), tol: cfg.tol() }
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("tool".into(), format!("levy-lattice {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), self.command.into()),
            ("config_sha256".into(), self.config_sha256.clone()),
            ("tol".into(), format!("{:e}", self.tol)),
            ("expm_tol".into(), format!("{EXPM_TOL:e}")),
        ]
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match run_cli(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.pass {
                EXIT_PASS
            } else {
                EXIT_GATE_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run_cli(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_deref().ok_or_else(|| LevyError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| LevyError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = RunConfig::parse(&text, base)?;
    if let Some(tol) = cli.tol {
        cfg.tol = Some(tol);
        cfg.validate()?;
    }
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let job = || execute(cli.command, &cfg, &text, &out);
    match cli.threads {
        Some(0) => Err(LevyError::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| LevyError::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Runs one command with an already parsed configuration.
pub fn execute(command: Command, cfg: &RunConfig, config_text: &str, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)
        .map_err(|e| LevyError::Config(format!("output directory {} is not writable: {e}", out.display())))?;
    let meta = Provenance::new(config_text, cfg, command);
    match command {
        Command::Density => cmd_density(cfg, out, &meta),
        Command::Psi => cmd_psi(cfg, out, &meta),
        Command::Converge => cmd_converge(cfg, out, &meta),
        Command::Price => cmd_price(cfg, out, &meta),
    }
}

struct Sink {
    files: Vec<PathBuf>,
}

impl Sink {
    fn write(&mut self, dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn write_meta(w: &mut dyn Write, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "#{k}={v}")?;
    }
    Ok(())
}

fn model_and_scheme(cfg: &RunConfig) -> Result<(LevyModel, SchemeKind, Option<Fixture>)> {
    let fixture = cfg.model.fixture()?;
    let model = match &fixture {
        Some(f) => f.model.clone(),
        None => cfg.model.build()?,
    };
    let scheme = match (cfg.scheme, &fixture) {
        (Some(s), _) => s,
        (None, Some(f)) => f.scheme,
        (None, None) => cfg.scheme_for(&model),
    };
    Ok((model, scheme, fixture))
}

fn require_density(model: &LevyModel) -> Result<()> {
    if model.sigma2().iter().all(|&s| s == 0.0) && model.measure().is_zero() {
        return Err(LevyError::NoDensity("σ² = 0 and λ = 0: the process is a deterministic drift".into()));
    }
    Ok(())
}

fn key(point: &[f64]) -> Vec<i64> {
    point.iter().map(|x| (x * 1e9).round() as i64).collect()
}

fn grid(h: f64, window: (f64, f64), dim: usize) -> Vec<Vec<f64>> {
    let axis = lattice_window(h, window);
    let mut points = vec![Vec::new()];
    for _ in 0..dim {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    points
}

fn lattice_table(disc: &Discretization, t: f64, points: &[Vec<f64>], tol: f64) -> Result<DensityTable> {
    let dim = disc.model().dim();
    if dim == 1 {
        let ys: Vec<f64> = points.iter().map(|p| p[0]).collect();
        return discrete_density_batch(disc, t, &ys, tol);
    }
    let origin = vec![0.0; dim];
    let values = points
        .par_iter()
        .map(|y| discrete_density_fourier(disc.model(), disc.spec(), disc.scheme(), t, &origin, y, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut table = DensityTable::new(dim, t, Route::FourierDiscrete);
    table.h = Some(disc.h());
    for (p, v) in points.iter().zip(values) {
        table.push(p, v);
    }
    table.quad_tol = tol;
    Ok(table)
}

fn exact_table(model: &LevyModel, t: f64, points: &[Vec<f64>], tol: f64) -> Result<DensityTable> {
    let dim = model.dim();
    if dim == 1 {
        let ys: Vec<f64> = points.iter().map(|p| p[0]).collect();
        return exact_density_batch(model, t, &ys, tol);
    }
    let origin = vec![0.0; dim];
    let values = points.par_iter().map(|y| exact_density(model, t, &origin, y, tol)).collect::<Result<Vec<_>>>()?;
    let mut table = DensityTable::new(dim, t, Route::FourierExact);
    for (p, v) in points.iter().zip(values) {
        table.push(p, v);
    }
    table.quad_tol = tol;
    Ok(table)
}

struct DensityRun {
    h: f64,
    m: f64,
    lattice: DensityTable,
    expm: Option<DensityTable>,
}

/// Per-`h` lattice densities, the exact density on the union of their
/// abscissae and the maximal deviation for each `h`.
pub fn cmd_density(cfg: &RunConfig, out: &Path, meta: &Provenance) -> Result<Outcome> {
    let steps = cfg.steps()?;
    let (model, scheme, fixture) = model_and_scheme(cfg)?;
    require_density(&model)?;
    let dim = model.dim();
    let window = cfg.density.window.or(fixture.as_ref().map(|f| f.window)).unwrap_or((-3.0, 3.0));
    if !(window.0 <= window.1) {
        return Err(LevyError::Config(format!("density window {window:?} is empty")));
    }
    let tol = cfg.tol();
    let rule = cfg.truncation();
    let runs = steps
        .par_iter()
        .map(|&h| -> Result<DensityRun> {
            let m = rule.at(h)?;
            let spec = LatticeSpec::new(h, dim, m)?;
            let disc = Discretization::new(&model, &spec, scheme)?;
            let points = grid(h, window, dim);
            let mut lattice = lattice_table(&disc, cfg.t, &points, tol)?;
            lattice.m = Some(m);
            let expm = if cfg.density.expm {
                let gen = build_generator(&model, &spec, scheme)?;
                let full = chain_distribution(&gen, cfg.t, &vec![0.0; dim])?;
                let mut table = DensityTable::new(dim, cfg.t, Route::Expm);
                table.h = full.h;
                table.m = full.m;
                table.deficit = full.deficit;
                table.quad_tol = full.quad_tol;
                for i in 0..full.len() {
                    let p = full.point(i);
                    if p.iter().all(|&y| y >= window.0 - 1e-9 * h && y <= window.1 + 1e-9 * h) {
                        table.push(p, full.values[i]);
                    }
                }
                Some(table)
            } else {
                None
            };
            Ok(DensityRun { h, m, lattice, expm })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut union: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    for run in &runs {
        for i in 0..run.lattice.len() {
            let p = run.lattice.point(i);
            union.entry(key(p)).or_insert_with(|| p.to_vec());
        }
    }
    let abscissae: Vec<Vec<f64>> = union.into_values().collect();
    let mut exact = exact_table(&model, cfg.t, &abscissae, tol)?;
    let exact_at: BTreeMap<Vec<i64>, f64> = (0..exact.len()).map(|i| (key(exact.point(i)), exact.values[i])).collect();

    let pairs = meta.pairs();
    let mut sink = Sink { files: Vec::new() };
    let mut lines = Vec::new();
    let mut summary = Vec::new();
    for (idx, run) in runs.into_iter().enumerate() {
        let mut lattice = run.lattice;
        let (mut dev, mut arg) = (0.0f64, Vec::new());
        for i in 0..lattice.len() {
            let e = (lattice.values[i] - exact_at[&key(lattice.point(i))]).abs();
            if e > dev || arg.is_empty() {
                dev = dev.max(e);
                arg = lattice.point(i).to_vec();
            }
        }
        let route_gap = run.expm.as_ref().map(|expm| {
            (0..expm.len())
                .filter_map(|i| lattice.value_at(expm.point(i)).map(|v| (v - expm.values[i]).abs()))
                .fold(0.0f64, f64::max)
        });
        lattice.extra.extend(pairs.iter().cloned());
        lattice.extra.push(("scheme".into(), scheme.to_string()));
        lattice.extra.push(("max_deviation".into(), format!("{dev:.6e}")));
        sink.write(out, &format!("density_h{idx}.csv"), |w| lattice.write_csv(w))?;
        let deficit = run.expm.as_ref().and_then(|e| e.deficit);
        if let Some(mut expm) = run.expm {
            expm.extra.extend(pairs.iter().cloned());
            expm.extra.push(("scheme".into(), scheme.to_string()));
            sink.write(out, &format!("density_expm_h{idx}.csv"), |w| expm.write_csv(w))?;
        }
        let mut line = format!("h={} M={} max_deviation={dev:.6e} at y={arg:?}", run.h, run.m);
        if let (Some(gap), Some(d)) = (route_gap, deficit) {
            line.push_str(&format!(" deficit={d:.3e} route_gap={gap:.3e}"));
        }
        lines.push(line);
        summary.push((run.h, run.m, dev, deficit, route_gap));
    }
    exact.extra.extend(pairs.iter().cloned());
    sink.write(out, "exact.csv", |w| exact.write_csv(w))?;
    sink.write(out, "density_summary.csv", |w| {
        write_meta(w, &pairs)?;
        writeln!(w, "#t={}", cfg.t)?;
        writeln!(w, "#scheme={scheme}")?;
        writeln!(w, "h,M,max_deviation,deficit,route_gap")?;
        for (h, m, dev, deficit, gap) in &summary {
            let opt = |v: &Option<f64>| v.map_or(String::new(), |v| format!("{v:.6e}"));
            writeln!(w, "{h},{m},{dev:.6e},{},{}", opt(deficit), opt(gap))?;
        }
        Ok(())
    })?;
    if cfg.gnuplot && dim == 1 {
        sink.write(out, "density.gp", |w| {
            write_meta(w, &pairs)?;
            writeln!(w, "set datafile separator ','")?;
            writeln!(w, "set xlabel 'y'")?;
            writeln!(w, "set ylabel 'density'")?;
            write!(w, "plot 'exact.csv' using 1:2 with lines title 'exact'")?;
            for (idx, (h, ..)) in summary.iter().enumerate() {
                write!(w, ", \\\n     'density_h{idx}.csv' using 1:2 with linespoints title 'h={h}'")?;
            }
            writeln!(w)?;
            Ok(())
        })?;
    }
    Ok(Outcome { files: sink.files, lines, pass: true })
}

/// Frequencies `p_min + i (p_max − p_min)/(n − 1)`.
fn frequency_grid(opts: &PsiOptions) -> Result<Vec<f64>> {
    let lo = opts.p_min.unwrap_or(0.0);
    let hi = opts.p_max.unwrap_or(std::f64::consts::PI);
    let n = opts.points.unwrap_or(129);
    if n < 2 || !(lo < hi) {
        return Err(LevyError::Config(format!(
            "frequency grid needs p_min < p_max and 2+ points, got [{lo}, {hi}] x {n}"
        )));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// `Ψ` and `Ψ^h` on a frequency grid for each `h`.
pub fn cmd_psi(cfg: &RunConfig, out: &Path, meta: &Provenance) -> Result<Outcome> {
    let steps = cfg.steps()?;
    let (model, scheme, _) = model_and_scheme(cfg)?;
    let ps = frequency_grid(&cfg.psi)?;
    let rows = char_exponent_sweep(&model, steps, scheme, &ps)?;
    let mut pairs = meta.pairs();
    pairs.push(("scheme".into(), scheme.to_string()));
    let mut sink = Sink { files: Vec::new() };
    sink.write(out, "psi.csv", |w| write_exponent_csv(&rows, w, &pairs))?;
    if cfg.gnuplot {
        sink.write(out, "psi.gp", |w| {
            write_meta(w, &pairs)?;
            writeln!(w, "set datafile separator ','")?;
            writeln!(w, "set xlabel 'p'")?;
            write!(w, "plot 'psi.csv' every ::0::{} using 2:3 with lines title 'Re psi'", ps.len() - 1)?;
            for (idx, h) in steps.iter().enumerate() {
                let (a, b) = (idx * ps.len(), (idx + 1) * ps.len() - 1);
                write!(w, ", \\\n     'psi.csv' every ::{a}::{b} using 2:5 with lines title 'Re psi_h, h={h}'")?;
            }
            writeln!(w)?;
            Ok(())
        })?;
    }
    let lines = steps
        .iter()
        .map(|&h| {
            let worst = rows.iter().filter(|r| r.h == h).map(|r| r.error()).fold(0.0f64, f64::max);
            format!("h={h} max|psi_h - psi|={worst:.6e} over {} frequencies", ps.len())
        })
        .collect();
    Ok(Outcome { files: sink.files, lines, pass: true })
}

fn converge_fixtures(cfg: &RunConfig) -> Result<Vec<Fixture>> {
    let opts = &cfg.converge;
    let mut list = if opts.fixtures.is_empty() {
        let (model, scheme, fixture) = model_and_scheme(cfg)?;
        match fixture {
            Some(f) => vec![f],
            None => {
                let expected = opts.expected_order.ok_or_else(|| {
                    LevyError::Config("sweeping a configured model needs converge.expected_order".into())
                })?;
                let m = match cfg.truncation() {
                    TruncationRule::Fixed(m) => m,
                    TruncationRule::Rule(_) => 5.0,
                };
                vec![Fixture {
                    name: "model".into(),
                    model,
                    scheme,
                    reference: Reference::Exact,
                    expected: ExpectedOrder::Custom(expected),
                    t: cfg.t,
                    window: opts.window.unwrap_or((-3.0, 3.0)),
                    steps: cfg.steps()?.to_vec(),
                    m,
                }]
            }
        }
    } else {
        opts.fixtures.iter().map(|n| crate::convergence::fixture(n)).collect::<Result<Vec<_>>>()?
    };
    for f in &mut list {
        if !cfg.h.is_empty() {
            f.steps = cfg.h.clone();
        }
        if let Some(order) = opts.expected_order {
            f.expected = ExpectedOrder::Custom(order);
        }
        if let Some(window) = opts.window {
            f.window = window;
        }
        if let Some(scheme) = cfg.scheme {
            f.scheme = scheme;
        }
    }
    Ok(list)
}

/// Convergence sweeps; the outcome fails when any fitted order falls more
/// than the slack below its expected order.
pub fn cmd_converge(cfg: &RunConfig, out: &Path, meta: &Provenance) -> Result<Outcome> {
    let fixtures = converge_fixtures(cfg)?;
    let slack = cfg.converge.slack.unwrap_or(crate::convergence::ORDER_SLACK);
    if !(slack >= 0.0) {
        return Err(LevyError::Config(format!("slack must be nonnegative, got {slack}")));
    }
    let mut reports: Vec<SweepReport> = Vec::new();
    for f in &fixtures {
        let mut r = run_sweep_with(f, &f.steps)?;
        r.slack = slack;
        r.pass = r.fit.median >= r.expected - slack;
        reports.push(r);
    }
    let mut pairs = meta.pairs();
    pairs.push(("sweep_route".into(), "fourier_discrete".into()));
    let mut sink = Sink { files: Vec::new() };
    let mut lines = Vec::new();
    for (f, r) in fixtures.iter().zip(&reports) {
        let file = f.name.replace(['/', '.'], "_");
        let mut extra = pairs.clone();
        extra.push(("scheme".into(), f.scheme.to_string()));
        extra.push(("window".into(), format!("{:?}", f.window)));
        sink.write(out, &format!("converge_{file}.csv"), |w| r.write_csv(w, &extra))?;
        sink.write(out, &format!("converge_{file}_points.csv"), |w| {
            write_meta(w, &extra)?;
            r.write_points_csv(w)
        })?;
        lines.push(format!(
            "{}: expected {:.3} fitted {:.3} (slope {:.3}) {}",
            r.fixture,
            r.expected,
            r.fit.median,
            r.fit.slope,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    sink.write(out, "converge_summary.csv", |w| {
        write_meta(w, &pairs)?;
        writeln!(w, "fixture,expected_order,fitted_order,regression_slope,r2,slack,pass")?;
        for r in &reports {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.fixture, r.expected, r.fit.median, r.fit.slope, r.fit.r2, r.slack, r.pass
            )?;
        }
        Ok(())
    })?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(Outcome { files: sink.files, lines, pass })
}

fn dyadic_level(h: f64) -> Option<i32> {
    let n = -h.log2();
    ((n - n.round()).abs() < 1e-9).then(|| n.round() as i32)
}

/// Prices for each `h` and strike under the martingale drift, with errors
/// against reference prices when given.
pub fn cmd_price(cfg: &RunConfig, out: &Path, meta: &Provenance) -> Result<Outcome> {
    let opts =
        cfg.price.as_ref().ok_or_else(|| LevyError::Config("the price command needs a [price] section".into()))?;
    if opts.strikes.is_empty() {
        return Err(LevyError::Config("no strikes given".into()));
    }
    if let Some(reference) = &opts.reference {
        if reference.len() != opts.strikes.len() {
            return Err(LevyError::Config("price.reference needs one price per strike".into()));
        }
    }
    let payoff = Payoff::parse(&opts.payoff)?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.martingale = Some(true);
    let model = model_cfg.build()?;
    let steps = cfg.steps()?;
    let rule = cfg.m.clone().unwrap_or(TruncationRule::Rule("half_log".into()));
    let rows = steps
        .par_iter()
        .map(|&h| {
            let spec = LatticeSpec::new(h, 1, rule.at(h)?)?;
            let prices =
                price_european(&model, opts.s0, opts.r, cfg.t, &opts.strikes, &spec, &|s, k| payoff.value(s, k))?;
            Ok((h, spec.m, prices))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = meta.pairs();
    pairs.extend([
        ("s0".to_string(), opts.s0.to_string()),
        ("r".to_string(), opts.r.to_string()),
        ("maturity".to_string(), cfg.t.to_string()),
        ("mu".to_string(), format!("{:.15e}", model.mu()[0])),
        ("payoff".to_string(), opts.payoff.clone()),
        ("scheme".to_string(), SchemeKind::Scheme2.to_string()),
    ]);
    let header: Vec<String> = opts.strikes.iter().map(|k| format!("K={k}")).collect();
    let level = |h: f64| dyadic_level(h).map_or(String::new(), |n| n.to_string());
    let mut sink = Sink { files: Vec::new() };
    sink.write(out, "price.csv", |w| {
        write_meta(w, &pairs)?;
        writeln!(w, "n,h,M,deficit,{}", header.join(","))?;
        for (h, m, prices) in &rows {
            let cols: Vec<String> = prices.iter().map(|p| format!("{:.10}", p.price)).collect();
            writeln!(w, "{},{h},{m},{:.6e},{}", level(*h), prices[0].deficit, cols.join(","))?;
        }
        Ok(())
    })?;
    let mut lines = vec![format!("n      h           {}", header.join("  "))];
    for (h, _, prices) in &rows {
        let cols: Vec<String> = match &opts.reference {
            Some(reference) => prices.iter().zip(reference).map(|(p, r)| format!("{:+.4}", p.price - r)).collect(),
            None => prices.iter().map(|p| format!("{:.4}", p.price)).collect(),
        };
        lines.push(format!("{:<6} {:<11} {}", level(*h), h, cols.join("  ")));
    }
    if let Some(reference) = &opts.reference {
        sink.write(out, "price_errors.csv", |w| {
            write_meta(w, &pairs)?;
            writeln!(w, "#reference={reference:?}")?;
            writeln!(w, "n,h,{}", header.join(","))?;
            for (h, _, prices) in &rows {
                let cols: Vec<String> =
                    prices.iter().zip(reference).map(|(p, r)| format!("{:.10}", p.price - r)).collect();
                writeln!(w, "{},{h},{}", level(*h), cols.join(","))?;
            }
            Ok(())
        })?;
    }
    Ok(Outcome { files: sink.files, lines, pass: true })
}
