use std::f64::consts::PI;

use levy_spectral::quadrature::Quadrature;
use levy_spectral::reference::{vg_density, VG_MIN_RADIUS};
use levy_spectral::sim::{self, Block, LevyModelSpec};
use levy_spectral::spectral;
use levy_spectral::{FreqGrid, IncrementSample, ReferenceModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn models() -> Vec<(&'static str, LevyModelSpec)> {
    let mut bm_cpp = LevyModelSpec::brownian(vec![vec![1.0, 0.3], vec![0.3, 0.5]], vec![1.0, -2.0]);
    bm_cpp.cpp_parts =
        LevyModelSpec::compound_poisson(20.0, vec![0.5, 0.0], vec![vec![1.0, 0.2], vec![0.2, 2.0]])
            .cpp_parts;
    vec![
        ("cpp", LevyModelSpec::standard_cpp(100.0, 2)),
        ("vg", LevyModelSpec::variance_gamma(1.0, 2)),
        ("brownian_cpp", bm_cpp),
        (
            "blocks",
            LevyModelSpec::blocks(vec![
                Block {
                    coords: vec![1],
                    spec: LevyModelSpec::standard_cpp(100.0, 1),
                },
                Block {
                    coords: vec![0],
                    spec: LevyModelSpec::variance_gamma(0.5, 1),
                },
            ]),
        ),
    ]
}

#[test]
fn empirical_cf_matches_closed_form_for_each_model() {
    let (delta, n) = (0.01, 100_000);
    let tol = 5.0 / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (name, spec) in models() {
        let model = ReferenceModel::from_spec(&spec).unwrap();
        let s = sim::simulate(&spec, delta, n, 21).unwrap();
        for _ in 0..20 {
            let r: f64 = rng.random_range(0.0..2.0);
            let a: f64 = rng.random_range(0.0..2.0 * PI);
            let u = [r * a.cos(), r * a.sin()];
            let (phi, _, _) = spectral::ecf_derivatives_at(&s, &u).unwrap();
            let diff = (phi - model.cf(delta, &u)).norm();
            assert!(diff < tol, "{name} at {u:?}: {diff}");
        }
    }
}

#[test]
fn laplacian_exponent_at_origin_is_minus_jump_second_moment() {
    // at u = 0 the plug-in reduces to -tr(sample covariance) / delta; truth -lambda E|J|^2 = -200
    let delta = 0.001;
    let s = sim::simulate(&LevyModelSpec::standard_cpp(100.0, 2), delta, 200_000, 5).unwrap();
    let grid = FreqGrid::new(2, 8, 1.0).unwrap();
    let psi = spectral::psi_laplacian_hat(&s, &grid).unwrap();
    let at0 = psi.values[psi.origin_index()];
    let means = s.column_means();
    let sq: Vec<f64> = s
        .rows()
        .map(|y| {
            y.iter()
                .zip(&means)
                .map(|(v, m)| (v - m).powi(2))
                .sum::<f64>()
                / delta
        })
        .collect();
    let n = sq.len() as f64;
    let m = sq.iter().sum::<f64>() / n;
    let se = (sq.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((at0.re + 200.0).abs() < 5.0 * se, "{at0} (se {se})");
    assert!(at0.im.abs() < 1e-9);
    // algebraic identity with the centered second moment
    assert!((at0.re + m).abs() < 1e-9 * m);
}

#[test]
fn analytic_laplacian_matches_cpp_truth_near_origin() {
    let model = ReferenceModel::standard_cpp(100.0, 2);
    for u in [[0.0f64, 0.0], [0.3, -0.2], [1.0, 1.0]] {
        // -lambda (d - |u|^2) exp(-|u|^2 / 2)
        let r2 = u[0] * u[0] + u[1] * u[1];
        let want = -100.0 * (2.0 - r2) * (-r2 / 2.0).exp();
        assert!((model.psi_laplacian(&u).re - want).abs() < 1e-10);
    }
}

/// `K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt` by the trapezoid rule.
fn bessel_k(nu: f64, z: f64) -> f64 {
    let step: f64 = 1e-3;
    let mut sum = 0.5 * (-z).exp();
    let mut t = step;
    loop {
        let term = (-z * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-300 || t > 50.0 {
            break;
        }
        t += step;
    }
    sum * step
}

#[test]
fn variance_gamma_density_matches_bessel_form() {
    // nu(r) = 2 (2 pi)^{-d/2} / kappa (kappa r^2 / 2)^{-d/4} K_{d/2}(r sqrt(2/kappa))
    for &(kappa, d) in &[(1.0, 1usize), (1.0, 2), (0.5, 2), (2.0, 3)] {
        let df = d as f64;
        for r in [0.01, 0.1, 0.5, 1.0, 2.5, 6.0] {
            let closed = 2.0 * (2.0 * PI).powf(-df / 2.0) / kappa
                * (kappa * r * r / 2.0).powf(-df / 4.0)
                * bessel_k(df / 2.0, r * (2.0 / kappa as f64).sqrt());
            let got = vg_density(r, kappa, d).unwrap();
            assert!(
                ((got - closed) / closed).abs() < 1e-7,
                "kappa {kappa}, d {d}, r {r}: {got} vs {closed}"
            );
        }
    }
    // closed form for d = 1: exp(-r sqrt(2/kappa)) / (kappa r)
    let r: f64 = 0.7;
    let want = (-r * 2f64.sqrt()).exp() / r;
    assert!((vg_density(r, 1.0, 1).unwrap() - want).abs() < 1e-9 * want);
}

#[test]
fn variance_gamma_second_moment_integrates_to_dimension() {
    // int |x|^2 nu(dx) = -Laplacian of psi at 0 = d
    let q = Quadrature::with_abs_tol(1e-9);
    let moment = q
        .value(
            |r| 2.0 * PI * r.powi(3) * vg_density(r, 1.0, 2).unwrap(),
            VG_MIN_RADIUS,
            40.0,
        )
        .unwrap();
    assert!((moment - 2.0).abs() < 1e-4, "{moment}");
    let model = ReferenceModel::VarianceGamma { kappa: 1.0, dim: 2 };
    assert!((model.psi_laplacian(&[0.0, 0.0]).re + 2.0).abs() < 1e-15);
}

#[test]
fn blocks_cf_is_product_of_block_cfs() {
    let (_, spec) = models().pop().unwrap();
    let model = ReferenceModel::from_spec(&spec).unwrap();
    let a = ReferenceModel::from_spec(&LevyModelSpec::standard_cpp(100.0, 1)).unwrap();
    let b = ReferenceModel::VarianceGamma { kappa: 0.5, dim: 1 };
    for u in [[0.2, 0.7], [-1.0, 3.0], [4.0, 0.0]] {
        let prod = b.cf(0.01, &[u[0]]) * a.cf(0.01, &[u[1]]);
        assert!((model.cf(0.01, &u) - prod).norm() < 1e-14);
    }
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 5..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plug_in_laplacian_is_drift_invariant(rows in rows_strategy(), sx in -20.0..20.0f64, sy in -20.0..20.0f64) {
        let s = IncrementSample::from_rows(0.01, &rows).unwrap();
        let shifted = s.shifted(&[sx, sy]).unwrap();
        let grid = FreqGrid::new(2, 16, 3.0).unwrap();
        let a = spectral::psi_laplacian_hat(&s, &grid).unwrap();
        let b = spectral::psi_laplacian_hat(&shifted, &grid).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).norm() <= 1e-9 * x.norm().max(1.0));
        }
    }

    #[test]
    fn empirical_cf_is_hermitian_and_bounded(rows in rows_strategy()) {
        let s = IncrementSample::from_rows(0.01, &rows).unwrap();
        let grid = FreqGrid::new(2, 8, 2.0).unwrap();
        let e = spectral::ecf(&s, &grid).unwrap();
        for flat in 0..grid.len() {
            prop_assert!(e.values[flat].norm() <= 1.0 + 1e-12);
            if let Some(m) = grid.mirror(flat) {
                prop_assert!((e.values[flat] - e.values[m].conj()).norm() <= 1e-12);
            }
        }
    }
}
