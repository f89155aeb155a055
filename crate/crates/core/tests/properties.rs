//! Structural invariants of the lattice chain on randomly drawn models.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use levy_lattice::convergence::fit_order;
use levy_lattice::density::{
    chain_distribution, discrete_density_batch, expectation_discrete, uniformize, DensityTable, Route,
    SparseRateMatrix, DEFAULT_TOL, EXPM_TOL,
};
use levy_lattice::discretization::{cell_index, cell_interval, h_star, Discretization};
use levy_lattice::levy_model::Atom;
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, SchemeKind};

/// Brownian motion with drift plus up to three atoms, with a valid step.
fn jump_diffusion() -> impl Strategy<Value = (LevyModel, SchemeKind, f64)> {
    (0.2f64..2.0, -1.5f64..1.5, prop::collection::vec((-2.0f64..2.0, 0.05f64..2.0), 0..=3), any::<bool>(), 0.2f64..0.9)
        .prop_filter_map("atoms at the origin", |(s2, mu, atoms, centred, frac)| {
            let atoms: Vec<Atom> =
                atoms.into_iter().filter(|(x, _)| x.abs() > 1e-3).map(|(x, w)| Atom::at(x, w)).collect();
            let measure = LevyMeasure::atomic(1, atoms).ok()?;
            let model = LevyModel::univariate(s2, mu, measure, 0).ok()?;
            let scheme = if centred { SchemeKind::Scheme1 } else { SchemeKind::Scheme2 };
            let hs = h_star(&model, scheme).ok()?;
            let h = (frac * hs.min(1.0)).max(1e-3);
            Some((model, scheme, h))
        })
}

/// Pure-jump stable and variance gamma models under scheme 2.
fn pure_jump() -> impl Strategy<Value = LevyModel> {
    prop_oneof![
        (0.3f64..1.9).prop_map(|a| {
            LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(a, 1.0).unwrap(), 1)
                .unwrap()
                .with_orey_epsilon(a)
                .unwrap()
        }),
        (0.5f64..2.0)
            .prop_map(|s| LevyModel::univariate(0.0, 0.0, LevyMeasure::variance_gamma(s).unwrap(), 1).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn generator_is_a_sub_q_matrix((model, scheme, h) in jump_diffusion()) {
        let spec = LatticeSpec::new(h, 1, 3.0).unwrap();
        let gen = Discretization::new(&model, &spec, scheme).unwrap().generator().unwrap();
        let exit = gen.exit_rate();
        let stencil: Vec<(i64, f64)> = gen.stencil().map(|(k, r)| (k[0], r)).collect();
        prop_assert!(stencil.iter().all(|&(_, r)| r >= 0.0));
        let n = gen.half_width();
        for (i, sum) in gen.row_sums().into_iter().enumerate() {
            let x = i as i64 - n;
            prop_assert!(sum <= 1e-12 * exit);
            let killed: f64 = stencil.iter().filter(|(k, _)| (x + k).abs() > n).map(|p| p.1).sum();
            prop_assert!((sum + killed).abs() <= 1e-12 * exit, "row {x}: {sum} + {killed}");
        }
    }

    #[test]
    fn exponent_vanishes_at_zero_and_has_nonpositive_real_part(
        (model, scheme, h) in jump_diffusion(),
        u in -1.0f64..1.0,
    ) {
        let disc = Discretization::new(&model, &LatticeSpec::new(h, 1, 3.0).unwrap(), scheme).unwrap();
        prop_assert!(disc.psi_h(&[0.0]).unwrap().norm() <= 1e-12);
        let p = u * PI / h;
        let psi_h = disc.psi_h(&[p]).unwrap();
        prop_assert!(psi_h.re <= 1e-12 * (1.0 + psi_h.norm()));
        let floor = 0.5 * (2.0 / PI).powi(2) * model.sigma2()[0] * p * p;
        prop_assert!(-psi_h.re >= floor * (1.0 - 1e-12), "{} < {floor}", -psi_h.re);
    }

    #[test]
    fn pure_jump_exponents_are_dissipative(model in pure_jump(), k in 0i32..4, u in -1.0f64..1.0) {
        let h = 2f64.powi(-k);
        let disc = Discretization::new(&model, &LatticeSpec::new(h, 1, 4.0).unwrap(), SchemeKind::Scheme2).unwrap();
        prop_assert!(disc.psi_h(&[0.0]).unwrap().norm() <= 1e-12);
        let psi_h = disc.psi_h(&[u * PI / h]).unwrap();
        prop_assert!(psi_h.re <= 1e-10 * (1.0 + psi_h.norm()));
    }

    #[test]
    fn error_terms_obey_their_envelopes((model, scheme, h) in jump_diffusion(), u in -1.0f64..1.0) {
        let disc = Discretization::new(&model, &LatticeSpec::new(h, 1, 3.0).unwrap(), scheme).unwrap();
        let p = u * PI / h;
        let e = disc.error_decomposition(p).unwrap();
        let tiny = 1e-12 * (1.0 + p.powi(4));
        prop_assert!(e.f_h >= -tiny && e.f_h <= p.powi(4) * h * h / 24.0 + tiny);
        if scheme == SchemeKind::Scheme1 {
            let q = (Complex64::i() * e.g_h).re * p.signum();
            prop_assert!(q >= -tiny && q <= h * h * p.abs().powi(3) / 6.0 + tiny);
        } else {
            prop_assert!(e.g_h.norm() <= h * p * p / 2.0 + tiny);
        }
        let mass = model.functionals().c();
        prop_assert!(e.l_h.norm() <= mass * p.abs() * h / 2.0 * (1.0 + 1e-9) + tiny);
        let direct = disc.psi_h(&[p]).unwrap() - model.psi1(p).unwrap();
        prop_assert!((direct - e.total).norm() <= 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn chain_mass_plus_deficit_is_one((model, scheme, h) in jump_diffusion(), t in 0.1f64..1.5) {
        let spec = LatticeSpec::new(h, 1, 3.0).unwrap();
        let gen = Discretization::new(&model, &spec, scheme).unwrap().generator().unwrap();
        let table = chain_distribution(&gen, t, &[0.0]).unwrap();
        prop_assert!(table.values.iter().all(|&v| v >= 0.0));
        let total = table.total_mass() + table.deficit.unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-10, "total {total}");
        let one = expectation_discrete(&gen, t, &[0.0], &|_| 1.0).unwrap();
        prop_assert!((one.value + one.deficit - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn chapman_kolmogorov((model, scheme, h) in jump_diffusion(), s in 0.05f64..0.6, t in 0.05f64..0.6) {
        let spec = LatticeSpec::new(h, 1, 2.0).unwrap();
        let gen = Discretization::new(&model, &spec, scheme).unwrap().generator().unwrap();
        let mut e = vec![0.0; gen.n_states()];
        e[gen.half_width() as usize] = 1.0;
        let direct = uniformize(&gen, &e, s + t, EXPM_TOL, true).unwrap().vector;
        let first = uniformize(&gen, &e, s, EXPM_TOL, true).unwrap().vector;
        let composed = uniformize(&gen, &first, t, EXPM_TOL, true).unwrap().vector;
        for (a, b) in direct.iter().zip(&composed) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn fourier_and_exponential_routes_agree((model, scheme, h) in jump_diffusion(), t in 0.3f64..1.0) {
        let spec = LatticeSpec::new(h, 1, 4.0).unwrap();
        let disc = Discretization::new(&model, &spec, scheme).unwrap();
        let expm = chain_distribution(&disc.generator().unwrap(), t, &[0.0]).unwrap();
        let ys: Vec<f64> = (-4..=4).map(|k| k as f64 * h).collect();
        let fourier = discrete_density_batch(&disc, t, &ys, DEFAULT_TOL).unwrap();
        let bound = expm.deficit.unwrap() + 1e-8;
        for (y, v) in ys.iter().zip(&fourier.values) {
            let w = expm.value_at(&[*y]).unwrap();
            prop_assert!((v - w).abs() <= bound, "y={y}: {v} vs {w}, deficit {bound:e}");
        }
    }

    #[test]
    fn point_expectations_are_masses((model, scheme, h) in jump_diffusion(), k in -3i64..=3) {
        let spec = LatticeSpec::new(h, 1, 2.0).unwrap();
        let gen = Discretization::new(&model, &spec, scheme).unwrap().generator().unwrap();
        let table = chain_distribution(&gen, 0.5, &[0.0]).unwrap();
        let y = k as f64 * h;
        prop_assume!(y.abs() <= 2.0);
        let e = expectation_discrete(&gen, 0.5, &[0.0], &|x| if (x[0] - y).abs() < 1e-9 * h { 1.0 } else { 0.0 }).unwrap();
        prop_assert!((e.value - table.value_at(&[y]).unwrap() * h).abs() <= 1e-15);
    }

    #[test]
    fn cells_partition_the_line(x in -50.0f64..50.0, k in 0u32..8) {
        let h = 2f64.powi(-(k as i32)) * 0.7;
        let i = cell_index(x, h);
        prop_assert!(cell_interval(i, h).contains(x));
        prop_assert!(!cell_interval(i + 1, h).contains(x) && !cell_interval(i - 1, h).contains(x));
    }

    #[test]
    fn order_fit_recovers_power_laws(q in 0.2f64..3.0, c in 1e-3f64..1e3, n in 3usize..8) {
        let pts: Vec<(f64, f64)> = (0..n).map(|k| { let h = 2f64.powi(-(k as i32)); (h, c * h.powf(q)) }).collect();
        let fit = fit_order(&pts).unwrap();
        prop_assert!((fit.median - q).abs() <= 1e-9 && (fit.slope - q).abs() <= 1e-9);
    }

    #[test]
    fn density_tables_round_trip(values in prop::collection::vec(-1e3f64..1e3, 1..20), h in 0.01f64..1.0) {
        let mut table = DensityTable::new(1, 0.75, Route::Expm);
        table.h = Some(h);
        table.m = Some(3.0);
        table.deficit = Some(1.5e-7);
        for (i, v) in values.iter().enumerate() {
            table.push(&[i as f64 * h], *v);
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = DensityTable::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.len(), table.len());
        prop_assert_eq!(back.h, table.h);
        prop_assert_eq!(back.route, Route::Expm);
        for (a, b) in back.values.iter().zip(&table.values) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn uniformization_keeps_sub_stochastic_rows(
        rates in prop::collection::vec(0.0f64..5.0, 6),
        kill in 0.0f64..1.0,
        t in 0.0f64..3.0,
    ) {
        // a 3-state chain with a killing rate at state 0
        let mut triplets = Vec::new();
        let mut k = 0;
        for r in 0..3usize {
            let mut out = if r == 0 { kill } else { 0.0 };
            for c in 0..3usize {
                if r != c {
                    triplets.push((r, c, rates[k]));
                    out += rates[k];
                    k += 1;
                }
            }
            triplets.push((r, r, -out));
        }
        let q = SparseRateMatrix::from_triplets(3, &triplets).unwrap();
        for start in 0..3 {
            let mut e = vec![0.0; 3];
            e[start] = 1.0;
            let row = uniformize(&q, &e, t, EXPM_TOL, true).unwrap().vector;
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!(row.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }
}
