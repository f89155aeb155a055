//! Generator of the lattice chain restricted to `S_M = Z_h^d ∩ [-M, M]^d`,
//! killed on leaving the box.

use std::io::Write;

use rayon::prelude::*;

use super::exponent::Discretization;
use super::scheme::{LatticeSpec, SchemeKind};
use crate::error::{LevyError, Result};
use crate::levy_model::LevyModel;

/// Rows handled per parallel task in matrix-vector products.
const ROW_CHUNK: usize = 256;

/// Sub-generator `Q` of the chain on `S_M`, stored as a translation-invariant
/// stencil.
#[derive(Clone, Debug)]
pub struct TruncatedGenerator {
    dim: usize,
    h: f64,
    m: f64,
    half_width: i64,
    scheme: SchemeKind,
    /// Off-diagonal offsets (lattice units, `dim` per entry) that can land in the box.
    offsets: Vec<i64>,
    rates: Vec<f64>,
    /// `-Q_{xx}`: total jump intensity on the full lattice.
    exit_rate: f64,
    /// Univariate stencil over offsets `-span..=span`, forward and reversed.
    dense: Option<Dense1>,
}

#[derive(Clone, Debug)]
struct Dense1 {
    span: usize,
    forward: Vec<f64>,
    reversed: Vec<f64>,
}

impl TruncatedGenerator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    /// Points per axis, `2K + 1`.
    pub fn side(&self) -> usize {
        (2 * self.half_width + 1) as usize
    }

    /// Number of states `|S_M|`.
    pub fn n_states(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn exit_rate(&self) -> f64 {
        self.exit_rate
    }

    /// Stencil offsets and rates (off-diagonal entries only).
    pub fn stencil(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.offsets.chunks(self.dim).zip(self.rates.iter().copied())
    }

    /// Lattice indices of state `i` (row-major, last axis fastest).
    pub fn state_index(&self, mut i: usize) -> Vec<i64> {
        let side = self.side();
        let mut k = vec![0i64; self.dim];
        for j in (0..self.dim).rev() {
            k[j] = (i % side) as i64 - self.half_width;
            i /= side;
        }
        k
    }

    /// Coordinates of state `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        self.state_index(i).into_iter().map(|k| k as f64 * self.h).collect()
    }

    /// State number of the lattice point with indices `k`, if inside the box.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let side = self.side();
        let mut i = 0usize;
        for &kj in k {
            if kj.abs() > self.half_width {
                return None;
            }
            i = i * side + (kj + self.half_width) as usize;
        }
        Some(i)
    }

    /// State number of the lattice point nearest to `x`, if it lies on the lattice
    /// and inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let k: Vec<i64> = x
            .iter()
            .map(|&v| {
                let u = v / self.h;
                let r = u.round();
                if (u - r).abs() <= 1e-9 * u.abs().max(1.0) {
                    Some(r as i64)
                } else {
                    None
                }
            })
            .collect::<Option<_>>()?;
        self.index_of(&k)
    }

    /// `Q v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.product(v, out, false);
    }

    /// `Qᵀ v`.
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        self.product(v, out, true);
    }

    fn product(&self, v: &[f64], out: &mut [f64], transpose: bool) {
        let n = self.n_states();
        assert_eq!(v.len(), n);
        assert_eq!(out.len(), n);
        if let Some(dense) = &self.dense {
            let stencil = if transpose { &dense.reversed } else { &dense.forward };
            let span = dense.span;
            out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, chunk)| {
                for (r, o) in chunk.iter_mut().enumerate() {
                    let i = c * ROW_CHUNK + r;
                    let lo = i.saturating_sub(span);
                    let hi = (i + span).min(n - 1);
                    let s0 = lo + span - i;
                    let acc: f64 = stencil[s0..s0 + hi - lo + 1].iter().zip(&v[lo..=hi]).map(|(a, b)| a * b).sum();
                    *o = acc - self.exit_rate * v[i];
                }
            });
            return;
        }
        let sign = if transpose { -1 } else { 1 };
        out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut target = vec![0i64; self.dim];
            for (r, o) in chunk.iter_mut().enumerate() {
                let i = c * ROW_CHUNK + r;
                let k = self.state_index(i);
                let mut acc = 0.0;
                for (off, rate) in self.stencil() {
                    for j in 0..self.dim {
                        target[j] = k[j] + sign * off[j];
                    }
                    if let Some(t) = self.index_of(&target) {
                        acc += rate * v[t];
                    }
                }
                *o = acc - self.exit_rate * v[i];
            }
        });
    }

    /// Row sums `Σ_y Q_{xy}` (nonpositive; the negative part is the killing rate).
    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.n_states()];
        let mut out = vec![0.0; self.n_states()];
        self.apply(&ones, &mut out);
        out
    }

    /// Writes the matrix in coordinate format: a `#` header, then one
    /// `row,col,value` line per nonzero entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n_states();
        writeln!(w, "# levy-lattice truncated generator")?;
        writeln!(w, "# dim={} h={} M={} scheme={} states={}", self.dim, self.h, self.m, self.scheme, n)?;
        writeln!(w, "# exit_rate={:.17e}", self.exit_rate)?;
        let sums = self.row_sums();
        let mut start = 0;
        for i in 1..=n {
            if i == n || sums[i].to_bits() != sums[start].to_bits() {
                writeln!(w, "# killing rows {}-{} rate={:.17e}", start, i - 1, -sums[start])?;
                start = i;
            }
        }
        writeln!(w, "row,col,value")?;
        let mut target = vec![0i64; self.dim];
        for i in 0..n {
            let k = self.state_index(i);
            let mut row: Vec<(usize, f64)> = vec![(i, -self.exit_rate)];
            for (off, rate) in self.stencil() {
                for j in 0..self.dim {
                    target[j] = k[j] + off[j];
                }
                if let Some(t) = self.index_of(&target) {
                    row.push((t, rate));
                }
            }
            row.sort_by_key(|e| e.0);
            for (t, r) in row {
                writeln!(w, "{i},{t},{r:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Builds the truncated generator of the chain on `S_M`.
pub fn build_generator(model: &LevyModel, spec: &LatticeSpec, scheme: SchemeKind) -> Result<TruncatedGenerator> {
    Discretization::new(model, spec, scheme)?.generator()
}

impl Discretization {
    /// Truncated generator on `S_M` for this discretization.
    pub fn generator(&self) -> Result<TruncatedGenerator> {
        let model = self.model();
        let d = model.dim();
        let spec = self.spec();
        let w = self.weights();
        let half_width = spec.half_width();
        let reach = 2 * half_width;

        let mut stencil: Vec<(Vec<i64>, f64)> = (0..w.len()).map(|i| (w.offset(i).to_vec(), w.rates[i])).collect();
        for j in 0..d {
            let (up, down) = self.neighbour_rates(j);
            for (sign, rate) in [(1i64, up), (-1i64, down)] {
                let mut e = vec![0i64; d];
                e[j] = sign;
                match stencil.iter_mut().find(|(o, _)| *o == e) {
                    Some((_, r)) => *r += rate,
                    None => stencil.push((e, rate)),
                }
            }
        }
        for (o, r) in &stencil {
            if *r < 0.0 {
                return Err(LevyError::NegativeRate { offset: o.clone(), rate: *r });
            }
        }
        stencil.sort_by(|a, b| a.0.cmp(&b.0));
        let exit_rate = stencil.iter().map(|(_, r)| r).sum::<f64>() + w.outside_mass();
        stencil.retain(|(o, r)| *r > 0.0 && o.iter().all(|k| k.abs() <= reach));

        let mut offsets = Vec::with_capacity(stencil.len() * d);
        let mut rates = Vec::with_capacity(stencil.len());
        for (o, r) in stencil {
            offsets.extend(o);
            rates.push(r);
        }
        let dense = (d == 1).then(|| {
            let span = offsets.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
            let mut forward = vec![0.0; 2 * span + 1];
            for (k, r) in offsets.iter().zip(&rates) {
                forward[(*k + span as i64) as usize] = *r;
            }
            let reversed = forward.iter().rev().copied().collect();
            Dense1 { span, forward, reversed }
        });
        Ok(TruncatedGenerator {
            dim: d,
            h: spec.h,
            m: spec.m,
            half_width,
            scheme: self.scheme(),
            offsets,
            rates,
            exit_rate,
            dense,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{Atom, LevyMeasure};
    use approx::assert_relative_eq;

    #[test]
    fn brownian_tridiagonal() {
        let m = LevyModel::brownian(1.0, 1.0).unwrap();
        let spec = LatticeSpec::new(0.5, 1, 1.0).unwrap();
        let q = build_generator(&m, &spec, SchemeKind::Scheme1).unwrap();
        assert_eq!(q.n_states(), 5);
        assert_relative_eq!(q.exit_rate(), 4.0);
        let sums = q.row_sums();
        // interior rows conserve mass, the edges leak one neighbour rate
        assert!(sums[2].abs() < 1e-15);
        assert_relative_eq!(sums[0], -1.0);
        assert_relative_eq!(sums[4], -3.0);
    }

    #[test]
    fn transpose_is_adjoint() {
        let meas = LevyMeasure::atomic(1, vec![Atom::at(0.3, 1.0), Atom::at(-0.7, 2.0)]).unwrap();
        let m = LevyModel::univariate(0.5, 0.3, meas, 1).unwrap();
        let spec = LatticeSpec::new(0.1, 1, 1.0).unwrap();
        let q = build_generator(&m, &spec, SchemeKind::Scheme2).unwrap();
        let n = q.n_states();
        let u: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 3 % 5) as f64).cos()).collect();
        let mut qu = vec![0.0; n];
        let mut qtv = vec![0.0; n];
        q.apply(&u, &mut qu);
        q.apply_transpose(&v, &mut qtv);
        let a: f64 = qu.iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&qtv).map(|(x, y)| x * y).sum();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn bivariate_generator_matches_dense_rows() {
        let m = LevyModel::new(vec![1.0, 0.5], vec![0.2, -0.1], LevyMeasure::zero(2), 0).unwrap();
        let spec = LatticeSpec::new(0.5, 2, 1.0).unwrap();
        let q = build_generator(&m, &spec, SchemeKind::Multivariate).unwrap();
        assert_eq!(q.n_states(), 25);
        let centre = q.index_of(&[0, 0]).unwrap();
        assert!(q.row_sums()[centre].abs() < 1e-14);
        let mut out = Vec::new();
        q.write_coo(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# levy-lattice"));
        assert!(text.contains("killing rows"));
    }
}
