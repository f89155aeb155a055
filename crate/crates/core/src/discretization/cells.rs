//! Lattice cells `A_s^h`: `[s-h/2, s+h/2)` for `s < 0`, `[-h/2, h/2]` for
//! `s = 0` and `(s-h/2, s+h/2]` for `s > 0`, so a point on a cell boundary
//! belongs to the cell nearer the origin.

use rayon::prelude::*;

use crate::error::Result;
use crate::levy_model::{Interval, LevyMeasure, Moment};

/// Boundary snapping tolerance in units of `h`.
const SNAP: f64 = 1e-9;

/// Index `k` of the cell `A_{kh}^h` containing `x`.
pub fn cell_index(x: f64, h: f64) -> i64 {
    let u = x / h;
    let a = u.abs();
    let fl = a.floor();
    let frac = a - fl;
    let k = if (frac - 0.5).abs() <= SNAP * a.max(1.0) { fl } else { a.round() } as i64;
    if u < 0.0 {
        -k
    } else {
        k
    }
}

/// The interval `A_{kh}^h` with its endpoint conventions.
pub fn cell_interval(k: i64, h: f64) -> Interval {
    let s = k as f64 * h;
    let (lo, hi) = (s - 0.5 * h, s + 0.5 * h);
    match k.signum() {
        -1 => Interval::new(lo, hi, true, false),
        0 => Interval::new(-0.5 * h, 0.5 * h, true, true),
        _ => Interval::new(lo, hi, false, true),
    }
}

/// `λ(A_s^h)` for a lattice point `s = h·index` (one index per coordinate).
pub fn cell_measure(measure: &LevyMeasure, index: &[i64], h: f64) -> Result<f64> {
    if measure.dim() == 1 {
        return measure.integrate(Moment::Mass, cell_interval(index[0], h));
    }
    let lo: Vec<f64> = index.iter().map(|&k| (k as f64 - 0.5) * h).collect();
    let hi: Vec<f64> = index.iter().map(|&k| (k as f64 + 0.5) * h).collect();
    let mut total = if index.iter().all(|&k| k == 0) {
        measure.punctured_integral(0.5 * h, &|_| 1.0)?
    } else {
        measure.box_integral(&lo, &hi, &|_| 1.0)?
    };
    for a in measure.atoms() {
        if a.location.iter().zip(index).all(|(&x, &k)| cell_index(x, h) == k) {
            total += a.weight;
        }
    }
    Ok(total)
}

/// Per-cell density masses for `k = 1..=kmax` on both sides, together with
/// the parts inside `[-V, V]`. Atoms are not included.
pub(crate) struct SideMasses {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub pos_inner: Vec<f64>,
    pub neg_inner: Vec<f64>,
}

pub(crate) fn density_cell_masses(measure: &LevyMeasure, h: f64, kmax: i64, v: f64) -> Result<SideMasses> {
    let n = kmax.max(0) as usize;
    if !measure.has_density() || n == 0 {
        return Ok(SideMasses {
            pos: vec![0.0; n],
            neg: vec![0.0; n],
            pos_inner: vec![0.0; n],
            neg_inner: vec![0.0; n],
        });
    }
    let rows: Vec<Result<(f64, f64, f64, f64)>> = (1..=kmax)
        .into_par_iter()
        .map(|k| {
            let a = (k as f64 - 0.5) * h;
            let b = (k as f64 + 0.5) * h;
            let p = measure.side_integral(true, a, b, Moment::Mass)?;
            let q = measure.side_integral(false, a, b, Moment::Mass)?;
            let (pi, qi) = if a >= v {
                (0.0, 0.0)
            } else if b <= v {
                (p, q)
            } else {
                (measure.side_integral(true, a, v, Moment::Mass)?, measure.side_integral(false, a, v, Moment::Mass)?)
            };
            Ok((p, q, pi, qi))
        })
        .collect();
    let mut out = SideMasses {
        pos: Vec::with_capacity(n),
        neg: Vec::with_capacity(n),
        pos_inner: Vec::with_capacity(n),
        neg_inner: Vec::with_capacity(n),
    };
    for r in rows {
        let (p, q, pi, qi) = r?;
        out.pos.push(p);
        out.neg.push(q);
        out.pos_inner.push(pi);
        out.neg_inner.push(qi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::Atom;

    fn two_atoms() -> LevyMeasure {
        LevyMeasure::atomic(1, vec![Atom::at(0.5, 0.5), Atom::at(-0.5, 0.5)]).unwrap()
    }

    #[test]
    fn boundary_points_go_toward_zero() {
        assert_eq!(cell_index(0.5, 1.0), 0);
        assert_eq!(cell_index(-0.5, 1.0), 0);
        assert_eq!(cell_index(1.5, 1.0), 1);
        assert_eq!(cell_index(-1.5, 1.0), -1);
        assert_eq!(cell_index(1.49, 1.0), 1);
        assert_eq!(cell_index(1.51, 1.0), 2);
        // atoms at (3/2)3^{-k} sit on boundaries of the 3^{-n} lattices
        let h = 3f64.powi(-4);
        assert_eq!(cell_index(1.5 * 3f64.powi(-2), h), 13);
    }

    #[test]
    fn two_atom_cells() {
        let m = two_atoms();
        assert_eq!(cell_measure(&m, &[0], 1.0).unwrap(), 1.0);
        assert_eq!(cell_measure(&m, &[1], 0.5).unwrap(), 0.5);
        assert_eq!(cell_measure(&m, &[-1], 0.5).unwrap(), 0.5);
        assert_eq!(cell_measure(&m, &[0], 0.5).unwrap(), 0.0);
        let z = LevyMeasure::zero(1);
        for k in -3..=3 {
            assert_eq!(cell_measure(&z, &[k], 0.5).unwrap(), 0.0);
        }
    }

    #[test]
    fn cells_partition_the_line() {
        let h = 0.3;
        for &x in &[-2.0, -0.45, -0.15, 0.0, 0.15, 0.449999, 0.45, 1.0] {
            let k = cell_index(x, h);
            assert!(cell_interval(k, h).contains(x), "x={x} k={k}");
            for j in [k - 1, k + 1] {
                assert!(!cell_interval(j, h).contains(x), "x={x} also in {j}");
            }
        }
    }

    #[test]
    fn bivariate_atom_cells() {
        let m = LevyMeasure::atomic(2, vec![Atom::new(vec![0.5, -0.2], 1.5)]).unwrap();
        assert_eq!(cell_measure(&m, &[1, 0], 0.5).unwrap(), 1.5);
        assert_eq!(cell_measure(&m, &[1, -1], 0.5).unwrap(), 0.0);
    }
}
