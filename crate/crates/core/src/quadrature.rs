//! Adaptive quadrature used for Lévy-measure integrals and Fourier inversion.
//!
//! Everything here is built on the 21-point Gauss–Kronrod rule. Integrands with
//! an integrable singularity at the origin are handled by geometric shells
//! `[b/2^{k+1}, b/2^k]`; infinite ranges by outward shells; oscillatory tails by
//! half-period panels whose partial sums are accelerated with Wynn's epsilon
//! algorithm.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::error::{LevyError, Result};

/// Values the integrators can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn zero() -> Self;
    fn norm(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

/// Absolute / relative tolerance pair; a result is accepted when its error is
/// below `max(abs, rel * |value|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_642_080,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Weights of the embedded 10-point Gauss rule, at XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// One application of the 21-point Gauss–Kronrod rule on `[a, b]`.
pub fn gauss_kronrod<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Estimate<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    let mut res_abs = fc.norm() * WGK[10];
    let mut fv = [T::zero(); 20];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        let sum = f1 + f2;
        kronrod = kronrod + sum * WGK[j];
        res_abs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            gauss = gauss + sum * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv[2 * j] - mean).norm() + (fv[2 * j + 1] - mean).norm());
    }
    let abs_half = half.abs();
    let value = kronrod * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((kronrod - gauss) * half).norm();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Estimate { value, error: err }
}

struct Segment<T> {
    a: f64,
    b: f64,
    est: Estimate<T>,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

const MAX_SEGMENTS: usize = 4000;

/// Globally adaptive Gauss–Kronrod integration on a finite interval.
pub fn adaptive<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate { value: T::zero(), error: 0.0 });
    }
    let first = gauss_kronrod(f, a, b);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, est: first });
    while total_err > tol.target(total.norm()) {
        if heap.len() >= MAX_SEGMENTS {
            if total_err <= 1e2 * tol.target(total.norm()) {
                break;
            }
            return Err(LevyError::Quadrature {
                context: format!("adaptive rule on [{a}, {b}] hit the subdivision limit"),
                achieved: total_err,
                requested: tol.target(total.norm()),
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let left = gauss_kronrod(f, worst.a, mid);
        let right = gauss_kronrod(f, mid, worst.b);
        total = total - worst.est.value + left.value + right.value;
        total_err += left.error + right.error - worst.est.error;
        heap.push(Segment { a: worst.a, b: mid, est: left });
        heap.push(Segment { a: mid, b: worst.b, est: right });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut value = T::zero();
    let mut error = 0.0;
    for s in heap.iter() {
        value = value + s.est.value;
        error += s.est.error;
    }
    Ok(Estimate { value, error })
}

/// Integrates over `[a, b]` with `0 < a < b`, splitting geometrically when the
/// interval spans many octaves.
pub fn log_split<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>> {
    debug_assert!(a > 0.0 && b >= a);
    if b <= 4.0 * a {
        return adaptive(f, a, b, tol);
    }
    let mut value = T::zero();
    let mut error = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        let est = adaptive(f, lo, hi, tol)?;
        value = value + est.value;
        error += est.error;
        lo = hi;
    }
    Ok(Estimate { value, error })
}

/// Accumulates a sequence of geometric shell contributions and decides when the
/// remainder is negligible. The remainder of a geometrically decaying tail is
/// added as `last * r / (1 - r)`.
struct ShellSum<T> {
    value: T,
    error: f64,
    norms: Vec<f64>,
    last: T,
}

impl<T: QuadValue> ShellSum<T> {
    fn new() -> Self {
        Self { value: T::zero(), error: 0.0, norms: Vec::new(), last: T::zero() }
    }

    fn push(&mut self, est: Estimate<T>) {
        self.value = self.value + est.value;
        self.error += est.error;
        self.norms.push(est.value.norm());
        self.last = est.value;
    }

    /// Ratio of successive shell magnitudes over the last few shells.
    fn ratio(&self) -> Option<f64> {
        let n = self.norms.len();
        if n < 4 {
            return None;
        }
        let tail = &self.norms[n - 4..];
        if tail[3] == 0.0 && tail[2] == 0.0 {
            return Some(0.0);
        }
        if tail.contains(&0.0) {
            return None;
        }
        let r1 = tail[3] / tail[2];
        let r2 = tail[2] / tail[1];
        let r3 = tail[1] / tail[0];
        Some(r1.max(r2).max(r3))
    }

    fn remainder(&self) -> Option<(T, f64)> {
        let r = self.ratio()?;
        if r >= 0.995 {
            return None;
        }
        let n = self.norms.len();
        let r_last = if self.norms[n - 2] > 0.0 { self.norms[n - 1] / self.norms[n - 2] } else { 0.0 };
        let rem = self.last * (r_last / (1.0 - r_last));
        // bound using the worst observed ratio
        let bound = self.norms[n - 1] * r / (1.0 - r);
        Some((rem, (bound - rem.norm()).abs() + 1e-3 * bound))
    }
}

/// Integrates `(0, b]` for an integrand with an integrable singularity at 0.
pub fn singular_at_origin<T: QuadValue, F: Fn(f64) -> T>(f: &F, b: f64, tol: Tolerance) -> Result<Estimate<T>> {
    debug_assert!(b > 0.0);
    let mut shells = ShellSum::new();
    let mut hi = b;
    for _ in 0..1060 {
        let lo = 0.5 * hi;
        let est = adaptive(f, lo, hi, Tolerance::new(tol.abs * 0.01, tol.rel))?;
        shells.push(est);
        hi = lo;
        if let Some((rem, rem_err)) = shells.remainder() {
            let target = tol.target(shells.value.norm());
            if rem.norm() < target && rem_err < target {
                return Ok(Estimate { value: shells.value + rem, error: shells.error + rem_err });
            }
        }
        if hi < 1e-300 {
            break;
        }
    }
    let achieved = shells.remainder().map(|(r, _)| r.norm()).unwrap_or(f64::INFINITY);
    Err(LevyError::Quadrature {
        context: "integrand is not integrable at the origin (shells do not decay)".into(),
        achieved,
        requested: tol.target(shells.value.norm()),
    })
}

/// Integrates `[a, ∞)` for a non-oscillatory integrand, `a > 0`.
pub fn to_infinity<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, tol: Tolerance) -> Result<Estimate<T>> {
    debug_assert!(a > 0.0);
    let mut shells = ShellSum::new();
    let mut lo = a;
    for _ in 0..1020 {
        let hi = 2.0 * lo;
        let est = adaptive(f, lo, hi, Tolerance::new(tol.abs * 0.01, tol.rel))?;
        shells.push(est);
        lo = hi;
        if let Some((rem, rem_err)) = shells.remainder() {
            let target = tol.target(shells.value.norm());
            if rem.norm() < target && rem_err < target {
                return Ok(Estimate { value: shells.value + rem, error: shells.error + rem_err });
            }
        }
        if !lo.is_finite() {
            break;
        }
    }
    let achieved = shells.remainder().map(|(r, _)| r.norm()).unwrap_or(f64::INFINITY);
    Err(LevyError::Quadrature {
        context: "integrand does not decay at infinity".into(),
        achieved,
        requested: tol.target(shells.value.norm()),
    })
}

/// Wynn's epsilon extrapolation of a sequence of partial sums.
pub fn wynn_epsilon(partial: &[f64]) -> f64 {
    let n = partial.len();
    if n < 3 {
        return *partial.last().unwrap_or(&0.0);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur = partial.to_vec();
    let mut best = partial[n - 1];
    for k in 1..n {
        let len = n - k;
        let mut next = vec![0.0; len];
        for j in 0..len {
            let d = cur[j + 1] - cur[j];
            if d == 0.0 || !d.is_finite() {
                return if k % 2 == 1 { cur[j + 1] } else { best };
            }
            next[j] = prev[j + 1] + 1.0 / d;
        }
        if k % 2 == 0 {
            let cand = next[len - 1];
            if cand.is_finite() {
                best = cand;
            }
        }
        prev = cur;
        cur = next;
    }
    best
}

/// Integrates `[a, ∞)` for an integrand oscillating with angular frequency
/// `omega > 0` and decaying at infinity. Panels are aligned to half periods.
pub fn oscillatory_tail<F: Fn(f64) -> f64>(f: &F, a: f64, omega: f64, tol: Tolerance) -> Result<Estimate<f64>> {
    debug_assert!(omega > 0.0);
    let half = std::f64::consts::PI / omega;
    let mut edge = (a / half).floor() * half + half;
    if edge - a < 1e-12 * half {
        edge += half;
    }
    let mut sums: Vec<f64> = Vec::new();
    let mut error = 0.0;
    let first = if a > 0.0 { log_split(f, a, edge, tol)? } else { adaptive(f, a, edge, tol)? };
    let mut total = first.value;
    error += first.error;
    sums.push(total);
    let mut last_extrap: Option<f64> = None;
    let mut settled = 0;
    for k in 0..4000 {
        let lo = edge + k as f64 * half;
        let est = adaptive(f, lo, lo + half, Tolerance::new(tol.abs * 0.01, tol.rel))?;
        total += est.value;
        error += est.error;
        sums.push(total);
        let target = tol.target(total.abs());
        if est.value.abs() < 0.1 * target {
            settled += 1;
            if settled >= 3 {
                return Ok(Estimate { value: total, error });
            }
            continue;
        }
        settled = 0;
        if sums.len() >= 8 {
            let window = &sums[sums.len().saturating_sub(24)..];
            let extrap = wynn_epsilon(window);
            if let Some(prev) = last_extrap {
                let delta = (extrap - prev).abs();
                if delta < 0.5 * tol.target(extrap.abs()) {
                    return Ok(Estimate { value: extrap, error: error + delta });
                }
            }
            last_extrap = Some(extrap);
        }
    }
    Err(LevyError::Quadrature {
        context: format!("oscillatory tail from {a} at frequency {omega} did not settle"),
        achieved: error,
        requested: tol.target(total.abs()),
    })
}

/// Gauss–Legendre rule of the given order on `[-1, 1]`, cached.
pub fn gauss_legendre(order: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<(usize, Vec<(f64, f64)>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        [4usize, 8, 16, 24, 32]
            .iter()
            .map(|&n| {
                let rule = GaussLegendre::new(n).expect("order >= 2");
                (n, rule.as_node_weight_pairs().to_vec())
            })
            .collect()
    });
    rules
        .iter()
        .find(|(n, _)| *n == order)
        .map(|(_, r)| r.as_slice())
        .unwrap_or_else(|| panic!("unsupported Gauss-Legendre order {order}"))
}

/// Tensor Gauss–Legendre integration over a box with recursive bisection until
/// the estimate stabilizes. Used for multivariate Lévy densities.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    tol: Tolerance,
    depth: usize,
) -> Result<Estimate<f64>> {
    let coarse = tensor_gl(f, lo, hi, 8);
    let fine = split_box(lo, hi).iter().map(|(l, h)| tensor_gl(f, l, h, 8)).sum::<f64>();
    let err = (fine - coarse).abs();
    if err <= tol.target(fine.abs()) {
        return Ok(Estimate { value: fine, error: err });
    }
    if depth == 0 {
        return Err(LevyError::Quadrature {
            context: "tensor quadrature over a box hit the refinement limit".into(),
            achieved: err,
            requested: tol.target(fine.abs()),
        });
    }
    let parts = split_box(lo, hi);
    let sub_tol = Tolerance::new(tol.abs / parts.len() as f64, tol.rel);
    let mut value = 0.0;
    let mut error = 0.0;
    for (l, h) in &parts {
        let est = integrate_box(f, l, h, sub_tol, depth - 1)?;
        value += est.value;
        error += est.error;
    }
    Ok(Estimate { value, error })
}

fn split_box(lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = lo.len();
    (0..1usize << d)
        .map(|mask| {
            let mut l = lo.to_vec();
            let mut h = hi.to_vec();
            for j in 0..d {
                let mid = 0.5 * (lo[j] + hi[j]);
                if mask >> j & 1 == 0 {
                    h[j] = mid;
                } else {
                    l[j] = mid;
                }
            }
            (l, h)
        })
        .collect()
}

fn tensor_gl<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let d = lo.len();
    let n = rule.len();
    let total = n.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut acc = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for j in 0..d {
            let (node, weight) = rule[rem % n];
            rem /= n;
            let half = 0.5 * (hi[j] - lo[j]);
            x[j] = lo[j] + half * (node + 1.0);
            w *= weight * half;
        }
        acc += w * f(&x);
    }
    acc
}

/// Integrates over the punctured cube `[-a, a]^d \ {0}` for a density that may
/// be singular at the origin, shell by shell.
pub fn punctured_cube<F: Fn(&[f64]) -> f64>(f: &F, a: f64, d: usize, tol: Tolerance) -> Result<Estimate<f64>> {
    let mut shells = ShellSum::new();
    let mut r = a;
    for _ in 0..200 {
        let mut shell = 0.0;
        let mut shell_err = 0.0;
        let cuts = [(-r, -0.5 * r), (-0.5 * r, 0.5 * r), (0.5 * r, r)];
        for flat in 0..3usize.pow(d as u32) {
            let mut rem = flat;
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            let mut central = true;
            for j in 0..d {
                let c = rem % 3;
                rem /= 3;
                central &= c == 1;
                lo[j] = cuts[c].0;
                hi[j] = cuts[c].1;
            }
            if central {
                continue;
            }
            let est = integrate_box(f, &lo, &hi, Tolerance::new(tol.abs * 0.01, tol.rel), 6)?;
            shell += est.value;
            shell_err += est.error;
        }
        shells.push(Estimate { value: shell, error: shell_err });
        r *= 0.5;
        if let Some((rem, rem_err)) = shells.remainder() {
            let target = tol.target(shells.value.norm());
            if rem.norm() < target && rem_err < target {
                return Ok(Estimate { value: shells.value + rem, error: shells.error + rem_err });
            }
        }
    }
    Err(LevyError::Quadrature {
        context: "multivariate density is not integrable at the origin".into(),
        achieved: shells.error,
        requested: tol.target(shells.value.norm()),
    })
}
