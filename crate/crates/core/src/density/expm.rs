//! Action of `e^{tQ}` for sub-Markov rate matrices by uniformization.

use statrs::function::gamma::ln_gamma;

use super::table::{DensityTable, Route};
use crate::discretization::TruncatedGenerator;
use crate::error::{LevyError, Result};

/// Default truncation tolerance of the Poisson series.
pub const EXPM_TOL: f64 = 1e-12;

/// Largest number of series terms before the problem is declared too stiff.
const MAX_TERMS: usize = 2_000_000;

/// A sub-Markov rate matrix that can be applied to vectors.
pub trait RateOperator: Sync {
    fn n_states(&self) -> usize;
    /// Upper bound on `-Q_{xx}` over all states.
    fn max_exit_rate(&self) -> f64;
    fn apply(&self, v: &[f64], out: &mut [f64]);
    fn apply_transpose(&self, v: &[f64], out: &mut [f64]);
}

impl RateOperator for TruncatedGenerator {
    fn n_states(&self) -> usize {
        TruncatedGenerator::n_states(self)
    }

    fn max_exit_rate(&self) -> f64 {
        self.exit_rate()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        TruncatedGenerator::apply(self, v, out)
    }

    fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        TruncatedGenerator::apply_transpose(self, v, out)
    }
}

/// A rate matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRateMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRateMatrix {
    /// Builds the matrix from `(row, col, value)` triplets; duplicates add up.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_start = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if r >= n || c >= n {
                return Err(LevyError::InvalidModel(format!("entry ({r}, {c}) outside a {n}x{n} matrix")));
            }
            if r != c && v < 0.0 {
                return Err(LevyError::NegativeRate { offset: vec![c as i64 - r as i64], rate: v });
            }
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
                continue;
            }
            last = Some((r, c));
            row_start[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        Ok(Self { n, row_start, cols, vals })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        (self.row_start[r]..self.row_start[r + 1]).find(|&k| self.cols[k] == c).map_or(0.0, |k| self.vals[k])
    }
}

impl RateOperator for SparseRateMatrix {
    fn n_states(&self) -> usize {
        self.n
    }

    fn max_exit_rate(&self) -> f64 {
        (0..self.n).map(|i| -self.get(i, i)).fold(0.0, f64::max)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (self.row_start[i]..self.row_start[i + 1]).map(|k| self.vals[k] * v[self.cols[k]]).sum();
        }
    }

    fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n {
            for k in self.row_start[i]..self.row_start[i + 1] {
                out[self.cols[k]] += self.vals[k] * v[i];
            }
        }
    }
}

/// Result of a series evaluation.
#[derive(Clone, Debug)]
pub struct ExpmOutcome {
    pub vector: Vec<f64>,
    pub terms: usize,
    /// Poisson mass left out of the series.
    pub truncation: f64,
}

/// `e^{tQ} v`.
pub fn expm_action(op: &dyn RateOperator, v: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(uniformize(op, v, t, EXPM_TOL, false)?.vector)
}

/// `e^{tQᵀ} v`, the distribution at time `t` of a chain started from `v`.
pub fn expm_action_transpose(op: &dyn RateOperator, v: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(uniformize(op, v, t, EXPM_TOL, true)?.vector)
}

/// `Σ_k Pois(Λt; k) P^k v` with `P = I + Q/Λ`, summed until the remaining
/// Poisson mass is below `tol`. All terms are nonnegative for `v ≥ 0`.
pub fn uniformize(op: &dyn RateOperator, v: &[f64], t: f64, tol: f64, transpose: bool) -> Result<ExpmOutcome> {
    if t < 0.0 || t.is_nan() {
        return Err(LevyError::NegativeTime(t));
    }
    let n = op.n_states();
    if v.len() != n {
        return Err(LevyError::InvalidModel(format!("vector has length {} but the operator has {n} states", v.len())));
    }
    let rate = op.max_exit_rate();
    if t == 0.0 || rate == 0.0 {
        return Ok(ExpmOutcome { vector: v.to_vec(), terms: 0, truncation: 0.0 });
    }
    let lt = rate * t;
    let budget = (lt + 12.0 * lt.sqrt() + 40.0).ceil();
    if !(budget < MAX_TERMS as f64) {
        return Err(LevyError::ExpmTooStiff {
            rate_t: lt,
            suggested_steps: (budget / MAX_TERMS as f64).ceil() as usize + 1,
        });
    }
    let log_lt = lt.ln();
    let weight = |k: usize| (-lt + k as f64 * log_lt - ln_gamma(k as f64 + 1.0)).exp();
    let mut current = v.to_vec();
    let mut scratch = vec![0.0; n];
    let mut acc: Vec<f64> = current.iter().map(|x| x * weight(0)).collect();
    let mut used = weight(0);
    let mut k = 0usize;
    loop {
        let left = (1.0 - used).max(0.0);
        let mode_passed = k as f64 >= lt;
        if mode_passed {
            let w = weight(k);
            let ratio = lt / (k as f64 + 1.0);
            let tail_bound = w * ratio / (1.0 - ratio);
            if tail_bound.min(left) <= tol {
                return Ok(ExpmOutcome { vector: acc, terms: k, truncation: tail_bound.min(left) });
            }
        }
        if k as f64 >= budget {
            return Ok(ExpmOutcome { vector: acc, terms: k, truncation: left });
        }
        if transpose {
            op.apply_transpose(&current, &mut scratch);
        } else {
            op.apply(&current, &mut scratch);
        }
        for (c, s) in current.iter_mut().zip(&scratch) {
            *c += s / rate;
        }
        k += 1;
        let w = weight(k);
        used += w;
        if w > 0.0 {
            for (a, c) in acc.iter_mut().zip(&current) {
                *a += w * c;
            }
        }
    }
}

/// Law at time `t` of the truncated chain started at the lattice point `start`,
/// as normalized masses `P(X_t = y)/h^d` with the killed probability as deficit.
pub fn chain_distribution(gen: &TruncatedGenerator, t: f64, start: &[f64]) -> Result<DensityTable> {
    let i0 = gen.locate(start).ok_or_else(|| LevyError::StateOutside(start.to_vec()))?;
    let mut e = vec![0.0; gen.n_states()];
    e[i0] = 1.0;
    let out = uniformize(gen, &e, t, EXPM_TOL, true)?;
    let cell = gen.h().powi(gen.dim() as i32);
    let mut table = DensityTable::new(gen.dim(), t, Route::Expm);
    table.h = Some(gen.h());
    table.m = Some(gen.m());
    let mut total = 0.0;
    for (i, &mass) in out.vector.iter().enumerate() {
        total += mass;
        table.push(&gen.state(i), mass / cell);
    }
    table.deficit = Some((1.0 - total).max(0.0));
    table.quad_tol = out.truncation;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state(q: f64) -> SparseRateMatrix {
        SparseRateMatrix::from_triplets(2, &[(0, 0, -q), (0, 1, q), (1, 0, q), (1, 1, -q)]).unwrap()
    }

    #[test]
    fn two_state_closed_form() {
        let q = 0.7;
        for &t in &[0.1, 1.0, 5.0] {
            let row = expm_action_transpose(&two_state(q), &[1.0, 0.0], t).unwrap();
            assert_relative_eq!(row[0], 0.5 * (1.0 + (-2.0 * q * t).exp()), epsilon = 1e-12);
            assert_relative_eq!(row[0] + row[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_cases() {
        let v = [0.3, 0.7];
        assert_eq!(expm_action(&two_state(2.0), &v, 0.0).unwrap(), v.to_vec());
        let single = SparseRateMatrix::from_triplets(1, &[(0, 0, 0.0)]).unwrap();
        assert_eq!(expm_action(&single, &[2.5], 10.0).unwrap(), vec![2.5]);
        assert!(matches!(expm_action(&two_state(1.0), &v, -1.0), Err(LevyError::NegativeTime(_))));
    }

    #[test]
    fn stiff_problems_are_refused() {
        assert!(matches!(expm_action(&two_state(1e9), &[1.0, 0.0], 1.0), Err(LevyError::ExpmTooStiff { .. })));
    }
}
