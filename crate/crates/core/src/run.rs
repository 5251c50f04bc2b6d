//! Config-driven workflows behind the command-line tool: simulate, estimate,
//! evaluate against a reference model, and sweep over sample sizes and seeds.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{Diagnostics, EstimatorConfig, SpectralEstimator};
use crate::grid::{DensityField, Quantity};
use crate::io;
use crate::quadrature::Quadrature;
use crate::reference::{self, ReferenceModel};
use crate::region::{integrate_against_test_function, Region, TestFunction};
use crate::sim::{self, IncrementSample, LevyModelSpec};
use crate::BandwidthSpec;

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "LEVY_SPECTRAL_OUT";

const DEFAULT_OUTPUT: &str = "levy-spectral-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: LevyModelSpec,
    pub sampling: Sampling,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub delta: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Seeds of a convergence sweep; defaults to `[seed]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Sample sizes of a convergence sweep; defaults to `[n]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_values: Vec<usize>,
    /// Read increments from `<input>.csv` / `<input>.json` instead of simulating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Output directory; falls back to `$LEVY_SPECTRAL_OUT`, then `levy-spectral-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "yes")]
    pub binary: bool,
    #[serde(default = "yes")]
    pub csv: bool,
    /// CSV slices cover `max_j |x_j| <= csv_window`.
    #[serde(default = "default_window")]
    pub csv_window: f64,
}

fn yes() -> bool {
    true
}

fn default_window() -> f64 {
    3.0
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            directory: None,
            binary: true,
            csv: true,
            csv_window: default_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SupError,
    L2Error,
    RelativeL2Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `|x|^2 nu`, the primary reported object.
    #[default]
    XsqNu,
    Nu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evaluation {
    #[serde(default)]
    pub region: Region,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub target: Target,
    /// Compare against the closed-form model; required by `evaluate` and `convergence`.
    #[serde(default = "yes")]
    pub reference: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_functions: Vec<TestFunction>,
    /// Evaluate a stored density field (binary header path) instead of a fresh estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::SupError, Metric::L2Error, Metric::RelativeL2Error]
}

impl Default for Evaluation {
    fn default() -> Self {
        Self {
            region: Region::default(),
            metrics: default_metrics(),
            target: Target::default(),
            reference: true,
            test_functions: Vec::new(),
            field: None,
        }
    }
}

/// Command-line overrides of the sweep variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: RunConfig = io::read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.sampling.delta.is_finite() && self.sampling.delta > 0.0) {
            return Err(Error::config(format!(
                "sampling.delta must be positive, got {}",
                self.sampling.delta
            )));
        }
        if self.sampling.n == 0 || self.sampling.n_values.contains(&0) {
            return Err(Error::config("sample sizes must be at least 1"));
        }
        self.estimator.validate()?;
        self.evaluation.region.validate()?;
        if !(self.outputs.csv_window > 0.0) {
            return Err(Error::config("outputs.csv_window must be positive"));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(n) = o.n {
            self.sampling.n = n;
            self.sampling.n_values.clear();
        }
        if let Some(seed) = o.seed {
            self.sampling.seed = seed;
            self.sampling.seeds.clear();
        }
        if let Some(h) = o.h {
            self.estimator.bandwidth = BandwidthSpec::explicit(h);
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.sampling.seeds.is_empty() {
            vec![self.sampling.seed]
        } else {
            self.sampling.seeds.clone()
        }
    }

    pub fn n_values(&self) -> Vec<usize> {
        if self.sampling.n_values.is_empty() {
            vec![self.sampling.n]
        } else {
            self.sampling.n_values.clone()
        }
    }

    /// Output directory, consulting `env_root` (the value of [`OUTPUT_ENV`]) when unset.
    pub fn output_dir(&self, env_root: Option<PathBuf>) -> PathBuf {
        self.outputs
            .directory
            .clone()
            .or(env_root)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    fn sample(&self, n: usize, seed: u64) -> Result<IncrementSample> {
        match &self.sampling.input {
            Some(base) => io::read_sample(base),
            None => sim::simulate(&self.model, self.sampling.delta, n, seed),
        }
    }

    fn reference(&self) -> Result<ReferenceModel> {
        if !self.evaluation.reference {
            return Err(Error::config(
                "evaluation needs a reference model; set evaluation.reference to true",
            ));
        }
        ReferenceModel::from_spec(&self.model)
    }
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_field(dir: &Path, name: &str, field: &DensityField, outputs: &Outputs) -> Result<()> {
    if outputs.binary {
        io::write_density_binary(&dir.join(name), field)?;
    }
    if outputs.csv && field.grid.dim() <= 2 {
        io::write_density_csv(
            &dir.join(format!("{name}.csv")),
            field,
            Some(outputs.csv_window),
        )?;
    }
    Ok(())
}

/// Simulates (or reads) the sample and writes `sample.csv` / `sample.json`.
pub fn cmd_simulate(config: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    prepare(dir)?;
    let sample = config.sample(config.sampling.n, config.sampling.seed)?;
    let base = dir.join("sample");
    io::write_sample(&base, &sample)?;
    Ok(vec![
        io::with_ext(&base, "csv"),
        io::with_ext(&base, "json"),
    ])
}

/// Runs the estimator and writes every field plus `diagnostics.json`.
pub fn cmd_estimate(config: &RunConfig, dir: &Path) -> Result<Diagnostics> {
    config.validate()?;
    prepare(dir)?;
    let sample = config.sample(config.sampling.n, config.sampling.seed)?;
    let est = SpectralEstimator::fit(&sample, &config.estimator)?;
    let out = est.estimate()?;
    let corrected = est.xsq_corrected_with_trace(out.diagnostics.trace_sigma)?;
    let o = &config.outputs;
    write_field(dir, "nu_hat", &out.nu_hat, o)?;
    write_field(dir, "xsq_nu_hat", &out.xsq_nu_hat, o)?;
    write_field(dir, "nu_hat_raw", &out.nu_hat_raw, o)?;
    write_field(dir, "xsq_nu_hat_raw", &out.xsq_nu_hat_raw, o)?;
    write_field(dir, "xsq_nu_corrected", &corrected, o)?;
    let psi = est.psi_laplacian();
    if o.binary {
        io::write_complex_binary(&dir.join("psi_laplacian_hat"), psi)?;
    }
    if o.csv && psi.grid.dim() <= 2 {
        io::write_complex_csv(&dir.join("psi_laplacian_hat.csv"), psi)?;
    }
    if config.evaluation.reference && config.sampling.input.is_none() {
        let model = ReferenceModel::from_spec(&config.model)?;
        if model.has_density() {
            write_field(
                dir,
                "truth_xsq_nu",
                &model.xsq_field(&out.xsq_nu_hat.grid),
                o,
            )?;
        }
    }
    if out.diagnostics.trace_sigma_negative {
        eprintln!(
            "warning: trace estimate is negative ({}); reported unclamped",
            out.diagnostics.trace_sigma
        );
    }
    io::write_json(&dir.join("diagnostics.json"), &out.diagnostics)?;
    Ok(out.diagnostics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalMetric {
    pub test_function: TestFunction,
    pub estimate: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub target: Target,
    pub region: Region,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub functionals: Vec<FunctionalMetric>,
}

/// Metrics of a stored or estimated field against the reference model.
/// Density metrics compare on the field's own quantity; test-function
/// metrics integrate the `|x|^2 nu` field in `xsq_field`.
pub fn evaluate_fields(
    model: &ReferenceModel,
    field: &DensityField,
    xsq_field: Option<&DensityField>,
    evaluation: &Evaluation,
) -> Result<Metrics> {
    let region = &evaluation.region;
    let mut metrics = Metrics {
        n: None,
        seed: None,
        bandwidth: None,
        target: evaluation.target,
        region: region.clone(),
        sup_error: None,
        l2_error: None,
        relative_l2_error: None,
        functionals: Vec::new(),
    };
    if !evaluation.metrics.is_empty() {
        if !model.has_density() {
            return Err(Error::config(
                "the model has no Levy density on R^d; use test-function metrics only",
            ));
        }
        if !field
            .grid
            .nodes()
            .any(|(flat, x)| field.defined[flat] && region.contains(&x))
        {
            return Err(Error::config(format!(
                "evaluation region contains no defined grid node (spacing {})",
                field.grid.spacing()
            )));
        }
        let truth = |x: &[f64]| match evaluation.target {
            Target::XsqNu => model.xsq_density(x).unwrap_or(f64::NAN),
            Target::Nu => model.levy_density(x).unwrap_or(f64::NAN),
        };
        for m in &evaluation.metrics {
            match m {
                Metric::SupError => {
                    metrics.sup_error = Some(reference::sup_error(field, truth, region))
                }
                Metric::L2Error => {
                    metrics.l2_error = Some(reference::l2_error(field, truth, region))
                }
                Metric::RelativeL2Error => {
                    let norm = reference::l2_norm(&field.grid, truth, region);
                    metrics.relative_l2_error =
                        Some(reference::l2_error(field, truth, region) / norm);
                }
            }
        }
    }
    if !evaluation.test_functions.is_empty() {
        let xsq = xsq_field
            .ok_or_else(|| Error::config("test-function metrics need an |x|^2 nu field"))?;
        let quad = Quadrature::with_abs_tol(1e-9);
        for f in &evaluation.test_functions {
            let estimate = integrate_against_test_function(xsq, f, region)?;
            let reference = model.functional(f, &quad)?;
            metrics.functionals.push(FunctionalMetric {
                test_function: f.clone(),
                estimate,
                reference,
                error: reference - estimate,
            });
        }
    }
    Ok(metrics)
}

/// One simulate-estimate-evaluate pipeline.
pub fn run_metrics(
    config: &RunConfig,
    model: &ReferenceModel,
    n: usize,
    seed: u64,
) -> Result<Metrics> {
    let sample = config.sample(n, seed)?;
    let est = SpectralEstimator::fit(&sample, &config.estimator)?;
    let out = est.estimate()?;
    let field = match config.evaluation.target {
        Target::XsqNu => &out.xsq_nu_hat,
        Target::Nu => &out.nu_hat,
    };
    let mut metrics = evaluate_fields(model, field, Some(&out.xsq_nu_hat), &config.evaluation)?;
    metrics.n = Some(sample.len());
    metrics.seed = Some(seed);
    metrics.bandwidth = Some(est.bandwidth());
    Ok(metrics)
}

/// Writes `metrics.json`.
pub fn cmd_evaluate(config: &RunConfig, dir: &Path) -> Result<Metrics> {
    config.validate()?;
    prepare(dir)?;
    let model = config.reference()?;
    let metrics = match &config.evaluation.field {
        Some(path) => {
            let field = io::read_density_binary(path)?;
            let xsq = (field.quantity != Quantity::NuHat && field.quantity != Quantity::TrueNu)
                .then_some(&field);
            evaluate_fields(&model, &field, xsq, &config.evaluation)?
        }
        None => run_metrics(config, &model, config.sampling.n, config.sampling.seed)?,
    };
    io::write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub seed: u64,
    pub bandwidth: f64,
    pub sup_error: f64,
    pub l2_error: f64,
    pub relative_l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub n: usize,
    pub median_sup_error: f64,
    pub median_l2_error: f64,
    pub median_relative_l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub summary: Vec<ConvergenceSummary>,
    /// Least-squares slope of log median error against log n.
    pub slope_sup_error: Option<f64>,
    pub slope_relative_l2_error: Option<f64>,
    pub monotone_sup_error: bool,
    pub monotone_relative_l2_error: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two points.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Runs every `(n, seed)` pipeline and summarizes the error decay.
pub fn convergence(config: &RunConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let model = config.reference()?;
    let mut evaluation = config.evaluation.clone();
    evaluation.metrics = default_metrics();
    evaluation.test_functions.clear();
    let config = RunConfig {
        evaluation,
        ..config.clone()
    };
    let jobs: Vec<(usize, u64)> = config
        .n_values()
        .into_iter()
        .flat_map(|n| config.seeds().into_iter().map(move |s| (n, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let m = run_metrics(&config, &model, n, seed)?;
            Ok(ConvergenceRow {
                n,
                seed,
                bandwidth: m.bandwidth.unwrap_or(f64::NAN),
                sup_error: m.sup_error.unwrap_or(f64::NAN),
                l2_error: m.l2_error.unwrap_or(f64::NAN),
                relative_l2_error: m.relative_l2_error.unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary: Vec<ConvergenceSummary> = config
        .n_values()
        .into_iter()
        .map(|n| {
            let of = |f: fn(&ConvergenceRow) -> f64| {
                median(&rows.iter().filter(|r| r.n == n).map(f).collect::<Vec<_>>())
            };
            ConvergenceSummary {
                n,
                median_sup_error: of(|r| r.sup_error),
                median_l2_error: of(|r| r.l2_error),
                median_relative_l2_error: of(|r| r.relative_l2_error),
            }
        })
        .collect();
    let ns: Vec<f64> = summary.iter().map(|s| s.n as f64).collect();
    let sup: Vec<f64> = summary.iter().map(|s| s.median_sup_error).collect();
    let rel: Vec<f64> = summary.iter().map(|s| s.median_relative_l2_error).collect();
    Ok(ConvergenceReport {
        slope_sup_error: log_log_slope(&ns, &sup),
        slope_relative_l2_error: log_log_slope(&ns, &rel),
        monotone_sup_error: non_increasing(&sup),
        monotone_relative_l2_error: non_increasing(&rel),
        rows,
        summary,
    })
}

/// Writes `convergence.csv` and `convergence.json`.
pub fn cmd_convergence(config: &RunConfig, dir: &Path) -> Result<ConvergenceReport> {
    let report = convergence(config)?;
    prepare(dir)?;
    let mut csv = String::from("n,seed,bandwidth,sup_error,l2_error,relative_l2_error\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.seed, r.bandwidth, r.sup_error, r.l2_error, r.relative_l2_error
        ));
    }
    fs::write(dir.join("convergence.csv"), csv)?;
    io::write_json(&dir.join("convergence.json"), &report)?;
    Ok(report)
}
