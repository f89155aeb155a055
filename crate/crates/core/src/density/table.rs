use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{LevyError, Result};

/// How a table of density values was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    FourierExact,
    FourierDiscrete,
    Expm,
    ClosedForm,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::FourierExact => "fourier_exact",
            Route::FourierDiscrete => "fourier_discrete",
            Route::Expm => "expm",
            Route::ClosedForm => "closed_form",
        })
    }
}

impl FromStr for Route {
    type Err = LevyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier_exact" => Ok(Route::FourierExact),
            "fourier_discrete" => Ok(Route::FourierDiscrete),
            "expm" => Ok(Route::Expm),
            "closed_form" => Ok(Route::ClosedForm),
            _ => Err(LevyError::Config(format!("unknown route `{s}`"))),
        }
    }
}

/// Density values (or lattice masses divided by `h^d`) at a list of points.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    pub dim: usize,
    /// Point coordinates, `dim` per row.
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub t: f64,
    pub h: Option<f64>,
    pub m: Option<f64>,
    pub route: Route,
    /// Probability lost through the truncation boundary.
    pub deficit: Option<f64>,
    /// Achieved quadrature or series tolerance.
    pub quad_tol: f64,
    /// Additional `#key=value` header lines.
    pub extra: Vec<(String, String)>,
}

impl DensityTable {
    pub fn new(dim: usize, t: f64, route: Route) -> Self {
        Self {
            dim,
            points: Vec::new(),
            values: Vec::new(),
            t,
            h: None,
            m: None,
            route,
            deficit: None,
            quad_tol: 0.0,
            extra: Vec::new(),
        }
    }

    pub fn push(&mut self, point: &[f64], value: f64) {
        debug_assert_eq!(point.len(), self.dim);
        self.points.extend_from_slice(point);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Value at a point, matched to within `1e-9` relative to the lattice step.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        let scale = self.h.unwrap_or(1.0) * 1e-9;
        (0..self.len())
            .find(|&i| self.point(i).iter().zip(x).all(|(a, b)| (a - b).abs() <= scale))
            .map(|i| self.values[i])
    }

    /// `h^d Σ v(y)`, the total probability on the lattice.
    pub fn total_mass(&self) -> f64 {
        let cell = self.h.map_or(1.0, |h| h.powi(self.dim as i32));
        self.values.iter().sum::<f64>() * cell
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#t={}", self.t)?;
        if let Some(h) = self.h {
            writeln!(w, "#h={h}")?;
        }
        if let Some(m) = self.m {
            writeln!(w, "#M={m}")?;
        }
        writeln!(w, "#route={}", self.route)?;
        if let Some(d) = self.deficit {
            writeln!(w, "#deficit={d:.6e}")?;
        }
        writeln!(w, "#quad_tol={:.3e}", self.quad_tol)?;
        for (k, v) in &self.extra {
            writeln!(w, "#{k}={v}")?;
        }
        let names: Vec<String> =
            if self.dim == 1 { vec!["y".into()] } else { (1..=self.dim).map(|j| format!("y{j}")).collect() };
        writeln!(w, "{},value", names.join(","))?;
        for i in 0..self.len() {
            for x in self.point(i) {
                write!(w, "{x},")?;
            }
            writeln!(w, "{:.15e}", self.values[i])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut table = DensityTable::new(1, 0.0, Route::ClosedForm);
        let mut header_seen = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta.split_once('=').ok_or_else(|| bad_line(line))?;
                let num = || v.parse::<f64>().map_err(|_| bad_line(line));
                match k {
                    "t" => table.t = num()?,
                    "h" => table.h = Some(num()?),
                    "M" => table.m = Some(num()?),
                    "route" => table.route = v.parse()?,
                    "deficit" => table.deficit = Some(num()?),
                    "quad_tol" => table.quad_tol = num()?,
                    _ => table.extra.push((k.to_string(), v.to_string())),
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if !header_seen {
                header_seen = true;
                table.dim = cols.len() - 1;
                continue;
            }
            if cols.len() != table.dim + 1 {
                return Err(bad_line(line));
            }
            let nums = cols.iter().map(|c| c.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>();
            let nums = nums.map_err(|_| bad_line(line))?;
            table.push(&nums[..table.dim], nums[table.dim]);
        }
        Ok(table)
    }
}

fn bad_line(line: &str) -> LevyError {
    LevyError::Config(format!("malformed density table line `{line}`"))
}
