//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails. Pass criterion ids (`c1` .. `c10`)
//! as arguments to run a subset.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use levy_spectral::estimator::{self, PostProcess};
use levy_spectral::fourier::{inverse_fourier_fft, inverse_fourier_quadrature};
use levy_spectral::kernels::{self, flat_top_fk};
use levy_spectral::quadrature::Quadrature;
use levy_spectral::reference;
use levy_spectral::region::{integrate_against_test_function, Region, TestFunction};
use levy_spectral::run::{self, log_log_slope, median, Evaluation, Outputs, RunConfig, Sampling};
use levy_spectral::sim::{self, Block};
use levy_spectral::spectral;
use levy_spectral::{
    BandwidthSpec, ComplexField, EstimatorConfig, FreqGrid, IncrementSample, KernelSpec,
    LevyModelSpec, ReferenceModel,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DELTA: f64 = 0.001;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cpp2() -> LevyModelSpec {
    LevyModelSpec::standard_cpp(100.0, 2)
}

fn within(limit: Duration, start: Instant) -> bool {
    start.elapsed() < limit
}

/// Independent per-point direct sum.
fn brute_ecf(sample: &IncrementSample, u: &[f64]) -> (Complex64, Vec<Complex64>, Complex64) {
    let n = sample.len() as f64;
    let mut phi = Complex64::new(0.0, 0.0);
    let mut grad = vec![Complex64::new(0.0, 0.0); u.len()];
    let mut lap = Complex64::new(0.0, 0.0);
    for y in sample.rows() {
        let t: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
        let e = Complex64::new(t.cos(), t.sin());
        phi += e / n;
        for j in 0..u.len() {
            grad[j] += Complex64::new(0.0, y[j]) * e / n;
        }
        lap -= y.iter().map(|v| v * v).sum::<f64>() * e / n;
    }
    (phi, grad, lap)
}

fn c1_ecf_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_abs: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let fd = 1e-5;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let sample = IncrementSample::from_rows(0.01, &rows).unwrap();
        let grid = FreqGrid::new(2, 8, rng.random_range(0.5..6.0)).unwrap();
        let node = rng.random_range(0..grid.len());
        let mut u = [0.0; 2];
        grid.node(node, &mut u);
        let engine = spectral::ecf_derivatives(&sample, &grid).unwrap();
        let (phi, grad, lap) = brute_ecf(&sample, &u);
        worst_abs = worst_abs
            .max((engine.phi.values[node] - phi).norm())
            .max((engine.laplacian.values[node] - lap).norm());
        for j in 0..2 {
            worst_abs = worst_abs.max((engine.grad[j].values[node] - grad[j]).norm());
        }
        // gradient from differences of phi, Laplacian from differences of the gradient
        let mut fd_lap = Complex64::new(0.0, 0.0);
        for j in 0..2 {
            let mut up = u;
            let mut dn = u;
            up[j] += fd;
            dn[j] -= fd;
            let (pu, gu, _) = spectral::ecf_derivatives_at(&sample, &up).unwrap();
            let (pd, gd, _) = spectral::ecf_derivatives_at(&sample, &dn).unwrap();
            let g_fd = (pu - pd) / (2.0 * fd);
            let g = engine.grad[j].values[node];
            worst_fd = worst_fd.max((g_fd - g).norm() / g.norm().max(1.0));
            fd_lap += (gu[j] - gd[j]) / (2.0 * fd);
        }
        let l = engine.laplacian.values[node];
        worst_fd = worst_fd.max((fd_lap - l).norm() / l.norm().max(1.0));
    }
    let fast = within(Duration::from_secs(1), start);
    outcome(
        worst_abs <= 1e-12 && worst_fd <= 1e-6 && fast,
        format!(
            "direct-sum deviation {worst_abs:.2e} (<= 1e-12), finite-difference deviation {worst_fd:.2e} (<= 1e-6 rel), {:.3}s (< 1s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn random_hermitian(grid: FreqGrid, rng: &mut ChaCha8Rng) -> ComplexField {
    let band = 0.5 * grid.u_max();
    let mut field = ComplexField::zeros(grid);
    let mut u = vec![0.0; grid.dim()];
    for flat in 0..grid.len() {
        grid.node(flat, &mut u);
        let Some(mirror) = grid.mirror(flat) else {
            continue;
        };
        if u.iter().any(|v| v.abs() > band) || mirror < flat {
            continue;
        }
        let v = if mirror == flat {
            Complex64::new(rng.random_range(-1.0..1.0), 0.0)
        } else {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        field.values[flat] = v;
        field.values[mirror] = v.conj();
    }
    field
}

fn c2_fourier_engine() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_rel: f64 = 0.0;
    let mut worst_imag: f64 = 0.0;
    for (dim, points) in [(1, 256), (1, 64), (2, 32), (2, 64)] {
        let grid = FreqGrid::new(dim, points, rng.random_range(1.0..8.0)).unwrap();
        let g = random_hermitian(grid, &mut rng);
        let fast = inverse_fourier_fft(&g).unwrap();
        let pts: Vec<Vec<f64>> = fast.grid.nodes().map(|(_, x)| x).collect();
        let slow = inverse_fourier_quadrature(&g, &pts);
        let scale = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let dev = fast
            .values
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst_rel = worst_rel.max(dev / scale);
        worst_imag = worst_imag.max(fast.imaginary_residual());
    }
    let grid = FreqGrid::new(1, 4096, 12.0).unwrap();
    let g = ComplexField::from_fn(grid, |u| Complex64::new((-u[0] * u[0] / 2.0).exp(), 0.0));
    let out = inverse_fourier_fft(&g).unwrap();
    let gauss = out
        .grid
        .axis()
        .iter()
        .zip(&out.values)
        .map(|(x, v)| (v - (-x * x / 2.0).exp() / (2.0 * PI).sqrt()).norm())
        .fold(0.0, f64::max);
    let fast = within(Duration::from_secs(10), start);
    outcome(
        worst_rel <= 1e-9 && worst_imag <= 1e-9 && gauss <= 1e-6 && fast,
        format!(
            "FFT vs quadrature {worst_rel:.2e} rel (<= 1e-9), imaginary residual {worst_imag:.2e} (<= 1e-9), Gaussian pair {gauss:.2e} (<= 1e-6), {:.2}s (< 10s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c3_kernel_conditions() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for spec in [
        KernelSpec::flat_top_radial(),
        KernelSpec::product_flat_top(),
    ] {
        let kernel = spec.build().unwrap();
        let origin = kernel.value(&[0.0, 0.0]) == 1.0;
        let support = [
            [1.0f64, 0.0],
            [0.0, -1.0],
            [1.2, 0.3],
            [-3.0, 2.0],
            [0.8, 0.8],
        ]
        .iter()
        .all(|u| {
            let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
            let outside = if spec.kind == "flat_top_radial" {
                r >= 1.0
            } else {
                u[0].abs() >= 1.0 || u[1].abs() >= 1.0
            };
            !outside || kernel.value(u) == 0.0
        });
        let grid = FreqGrid::new(2, 512, 4.0).unwrap();
        let fk = kernels::fk_on_grid(kernel.as_ref(), 1.0, &grid).unwrap();
        let k = inverse_fourier_fft(&fk).unwrap();
        let dv = k.grid.cell_volume();
        let mut moments = [0.0f64; 6]; // 1, x, y, x^2, xy, y^2
        for (flat, x) in k.grid.nodes() {
            let v = k.values[flat].re * dv;
            let terms = [1.0, x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]];
            for (m, t) in moments.iter_mut().zip(terms) {
                *m += t * v;
            }
        }
        let mass_dev = (moments[0] - 1.0).abs();
        let worst_moment = moments[1..].iter().map(|m| m.abs()).fold(0.0, f64::max);
        pass &= origin && support && mass_dev <= 1e-3 && worst_moment <= 1e-3;
        lines.push(format!(
            "{}: FK(0)=1 {origin}, support {support}, |int K - 1| {mass_dev:.1e}, max |int x^b K| {worst_moment:.1e}",
            spec.kind
        ));
    }
    outcome(pass, lines.join("; ") + " (tolerance 1e-3)")
}

fn c4_ecf_risk_scaling() -> Outcome {
    let start = Instant::now();
    let model = ReferenceModel::standard_cpp(100.0, 2);
    let grid = FreqGrid::new(2, 32, 16.0).unwrap();
    let ns = [1e3, 1e4, 1e5];
    let means: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let total: f64 = (0..20)
                .map(|seed| {
                    let s = sim::simulate(&cpp2(), DELTA, n as usize, seed).unwrap();
                    let e = spectral::ecf(&s, &grid).unwrap();
                    spectral::weighted_sup_deviation(&e, |u| model.cf(DELTA, u), 0.5)
                })
                .sum();
            total / 20.0
        })
        .collect();
    let slope = log_log_slope(&ns, &means).unwrap();
    let fast = within(Duration::from_secs(300), start);
    outcome(
        (slope + 0.5).abs() <= 0.1 && fast,
        format!(
            "mean weighted sup deviation {:?}, slope {slope:.3} (-0.5 +/- 0.1), {:.1}s (< 300s)",
            means.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c5_pipeline_oracle() -> Outcome {
    let start = Instant::now();
    let delta = 0.1;
    let h = 0.5;
    let sample = sim::simulate(&LevyModelSpec::standard_cpp(10.0, 1), delta, 100, 5).unwrap();
    let config = EstimatorConfig {
        points: 64,
        post_process: PostProcess::Raw,
        ..EstimatorConfig::default()
    }
    .with_bandwidth(BandwidthSpec::explicit(h));
    let est = estimator::estimate_levy_density(&sample, &config).unwrap();

    // Oracle: direct sums on the frequency nodes, direct inverse sum at each x.
    let m = 64;
    let du = 2.0 / (h * m as f64);
    let threshold = (sample.len() as f64 * delta).powf(-0.5);
    let weighted: Vec<(f64, Complex64)> = (0..m)
        .map(|j| {
            let u = (j as f64 - (m / 2) as f64) * du;
            let (phi, grad, lap) = brute_ecf(&sample, &[u]);
            let psi = if phi.norm() >= threshold {
                (phi * lap - grad[0] * grad[0]) / (delta * phi * phi)
            } else {
                Complex64::new(0.0, 0.0)
            };
            (u, psi * flat_top_fk(&[h * u], 1.0, 1.0 / 50.0))
        })
        .collect();
    let grid = est.nu_hat_raw.grid;
    let eps = grid.spacing();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (flat, x) in grid.nodes() {
        if x[0].abs() <= eps {
            if est.nu_hat_raw.defined[flat] {
                return outcome(false, "a node inside the exclusion radius is defined");
            }
            continue;
        }
        let inv: Complex64 = weighted
            .iter()
            .map(|(u, g)| g * Complex64::new(0.0, -u * x[0]).exp())
            .sum::<Complex64>()
            * du
            / (2.0 * PI);
        let want = -inv.re / (x[0] * x[0]);
        worst = worst.max((est.nu_hat_raw.values[flat] - want).abs());
        compared += 1;
    }
    let fast = within(Duration::from_secs(1), start);
    outcome(
        worst <= 1e-8 && compared > 0 && fast,
        format!(
            "{compared} nodes, max deviation from direct composition {worst:.2e} (<= 1e-8), {:.3}s (< 1s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

struct CppRun {
    rel_l2: f64,
    sup: f64,
}

fn cpp_run(n: usize, seed: u64) -> CppRun {
    let model = ReferenceModel::standard_cpp(100.0, 2);
    let truth = |x: &[f64]| model.xsq_density(x).unwrap();
    let region = Region::default();
    let s = sim::simulate(&cpp2(), DELTA, n, seed).unwrap();
    let est = estimator::estimate_levy_density(&s, &EstimatorConfig::default()).unwrap();
    let f = &est.xsq_nu_hat;
    CppRun {
        rel_l2: reference::l2_error(f, truth, &region)
            / reference::l2_norm(&f.grid, truth, &region),
        sup: reference::sup_error(f, truth, &region),
    }
}

fn c6_cpp_reproduction() -> Outcome {
    let start = Instant::now();
    let runs = |n: usize| -> Vec<CppRun> { (0..10).map(|seed| cpp_run(n, seed)).collect() };
    let small = runs(10_000);
    let mid = runs(100_000);
    let reduced_time = start.elapsed();
    let full = runs(500_000);
    let rel = |r: &[CppRun]| median(&r.iter().map(|x| x.rel_l2).collect::<Vec<_>>());
    let sup = |r: &[CppRun]| median(&r.iter().map(|x| x.sup).collect::<Vec<_>>());
    let (r1, r2, r3) = (rel(&small), rel(&mid), rel(&full));
    let (s1, s2, s3) = (sup(&small), sup(&mid), sup(&full));
    let ratio = s1 / s3;
    outcome(
        r2 < r1 && ratio >= 1.5 && reduced_time < Duration::from_secs(600),
        format!(
            "median rel L2 {r1:.4} -> {r2:.4} (n=1e4 -> 1e5, must decrease), {r3:.4} at 5e5; median sup {s1:.3} -> {s2:.3} -> {s3:.3}, 1e4/5e5 ratio {ratio:.1} (>= 1.5); reduced suite {:.1}s (< 600s)",
            reduced_time.as_secs_f64()
        ),
    )
}

fn c7_trace_sigma() -> Outcome {
    let start = Instant::now();
    let config = EstimatorConfig {
        points: 32,
        ..EstimatorConfig::default()
    }
    .with_bandwidth(BandwidthSpec::explicit(0.25));
    let estimates: Vec<f64> = (0..20)
        .map(|seed| {
            let s = sim::simulate_brownian(&sim::identity(2), &[0.0, 0.0], DELTA, 100_000, seed)
                .unwrap();
            estimator::estimate_trace_sigma(&s, &config).unwrap()
        })
        .collect();
    let med = median(&estimates);
    let fast = within(Duration::from_secs(120), start);
    outcome(
        (med - 2.0).abs() <= 0.2 && fast,
        format!(
            "median estimate {med:.4} (2 +/- 10%), {:.1}s (< 120s)",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c8_blocks_functional() -> Outcome {
    let spec = LevyModelSpec::blocks(vec![
        Block {
            coords: vec![0],
            spec: LevyModelSpec::standard_cpp(100.0, 1),
        },
        Block {
            coords: vec![1],
            spec: LevyModelSpec::standard_cpp(100.0, 1),
        },
    ]);
    let model = ReferenceModel::from_spec(&spec).unwrap();
    let region = Region::Box {
        lo: vec![-5.0, -5.0],
        hi: vec![5.0, 5.0],
    };
    let bumps = [
        (
            "axis-straddling",
            TestFunction::product(vec![1.75, 0.0], 1.25),
        ),
        (
            "axis-avoiding",
            TestFunction::product(vec![1.75, 1.75], 1.25),
        ),
    ];
    let quad = Quadrature::with_abs_tol(1e-9);
    let refs: Vec<f64> = bumps
        .iter()
        .map(|(_, f)| model.functional(f, &quad).unwrap())
        .collect();
    let config = EstimatorConfig {
        kernel: KernelSpec::product_flat_top(),
        post_process: PostProcess::Raw,
        ..EstimatorConfig::default()
    }
    .with_bandwidth(BandwidthSpec::explicit(0.035));
    let seeds = 10;
    let mut errors = vec![Vec::new(); bumps.len()];
    for seed in 0..seeds {
        let s = sim::simulate(&spec, DELTA, 500_000, seed).unwrap();
        let est = estimator::estimate_levy_density(&s, &config).unwrap();
        for (i, (_, f)) in bumps.iter().enumerate() {
            let v = integrate_against_test_function(&est.xsq_nu_hat, f, &region).unwrap();
            errors[i].push(refs[i] - v);
        }
    }
    let mut pass = refs[1] == 0.0;
    let mut parts = Vec::new();
    for (i, (name, _)) in bumps.iter().enumerate() {
        let k = seeds as f64;
        let mean = errors[i].iter().sum::<f64>() / k;
        let sd = (errors[i].iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let se = sd / k.sqrt();
        pass &= mean.abs() <= 3.0 * se;
        parts.push(format!(
            "{name}: reference {:.4}, mean error {mean:.4}, standard error {se:.4}, z {:.2}",
            refs[i],
            mean / se
        ));
    }
    outcome(
        pass,
        parts.join("; ") + " (|mean error| <= 3 standard errors)",
    )
}

fn c9_drift_invariance() -> Outcome {
    let s = sim::simulate(&cpp2(), DELTA, 100_000, 9).unwrap();
    let shifted = s.shifted(&[5.0, -3.0]).unwrap();
    let config = EstimatorConfig::default();
    let a = estimator::estimate_levy_density(&s, &config).unwrap();
    let b = estimator::estimate_levy_density(&shifted, &config).unwrap();
    let same_mask = a.nu_hat.defined == b.nu_hat.defined;
    let diff = a
        .nu_hat
        .sup_abs_diff(&b.nu_hat)
        .max(a.nu_hat_raw.sup_abs_diff(&b.nu_hat_raw));
    outcome(
        same_mask && diff <= 1e-8,
        format!("sup |nu_hat - nu_hat_shifted| {diff:.2e} (<= 1e-8), identical definition mask {same_mask}"),
    )
}

fn reduced_config(dir: &std::path::Path) -> RunConfig {
    RunConfig {
        model: cpp2(),
        sampling: Sampling {
            delta: DELTA,
            n: 100_000,
            seed: 0,
            seeds: (0..10).collect(),
            n_values: vec![10_000, 100_000],
            input: None,
        },
        estimator: EstimatorConfig::default(),
        outputs: Outputs {
            directory: Some(dir.to_path_buf()),
            ..Outputs::default()
        },
        evaluation: Evaluation::default(),
    }
}

fn c10_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run::cmd_convergence(&reduced_config(a.path()), a.path()).unwrap();
    run::cmd_convergence(&reduced_config(b.path()), b.path()).unwrap();
    let mut same = true;
    for name in ["convergence.json", "convergence.csv"] {
        same &= std::fs::read(a.path().join(name)).unwrap()
            == std::fs::read(b.path().join(name)).unwrap();
    }
    outcome(
        same,
        format!("convergence.json and convergence.csv byte-identical across runs: {same}"),
    )
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("c1", "ECF exactness", c1_ecf_exactness),
        ("c2", "Fourier engine", c2_fourier_engine),
        ("c3", "kernel conditions", c3_kernel_conditions),
        ("c4", "ECF risk scaling", c4_ecf_risk_scaling),
        ("c5", "pipeline oracle", c5_pipeline_oracle),
        ("c6", "CPP reproduction", c6_cpp_reproduction),
        ("c7", "trace of Sigma", c7_trace_sigma),
        ("c8", "blocks functional", c8_blocks_functional),
        ("c9", "drift invariance", c9_drift_invariance),
        ("c10", "determinism", c10_determinism),
    ];
    let selected: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        let status = if result.pass { "PASS" } else { "FAIL" };
        failures += !result.pass as usize;
        println!(
            "{status} {id:>3} {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
