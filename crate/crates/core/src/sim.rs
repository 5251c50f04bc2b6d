//! Seeded simulation of Levy process increments.
//!
//! Supported building blocks are a Brownian part with drift, compound Poisson
//! parts with Gaussian jumps, a variance gamma part (Brownian motion
//! subordinated by a gamma process) and independent coordinate blocks, each
//! with its own sub-model. A model is the sum of its components; every
//! component implements [`IncrementGenerator`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible expected number of jumps per step.
pub const MAX_EXPECTED_JUMPS: f64 = 1e9;

/// Observed increments `Y_k = L_{k delta} - L_{(k-1) delta}`, row-major `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSample {
    delta: f64,
    dim: usize,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl IncrementSample {
    pub fn new(delta: f64, dim: usize, values: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::input(format!(
                "time step must be positive, got {delta}"
            )));
        }
        if dim == 0 {
            return Err(Error::input("dimension must be positive"));
        }
        if values.is_empty() || values.len() % dim != 0 {
            return Err(Error::input(format!(
                "need a non-empty n x {dim} matrix, got {} values",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite increment entry at row {}",
                pos / dim
            )));
        }
        Ok(Self {
            delta,
            dim,
            values,
            seed,
        })
    }

    pub fn from_rows(delta: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::input("rows have inconsistent lengths"));
        }
        Self::new(delta, dim, rows.concat(), None)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time horizon `T = n * delta`.
    pub fn horizon(&self) -> f64 {
        self.len() as f64 * self.delta
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Adds `shift` to every increment.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::input("shift dimension mismatch"));
        }
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(self.dim) {
            for (y, c) in row.iter_mut().zip(shift) {
                *y += c;
            }
        }
        Self::new(self.delta, self.dim, values, self.seed)
    }

    /// Sums adjacent pairs of increments, giving `floor(n/2)` increments at `2 delta`.
    pub fn aggregate_pairs(&self) -> Result<Self> {
        let d = self.dim;
        let values = self
            .values
            .chunks_exact(2 * d)
            .flat_map(|pair| (0..d).map(move |j| pair[j] + pair[d + j]))
            .collect();
        Self::new(2.0 * self.delta, d, values, self.seed)
    }

    /// Coordinate-wise lower median; always an observed value.
    pub fn column_medians(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let mut col: Vec<f64> = self.rows().map(|r| r[j]).collect();
                let mid = (col.len() - 1) / 2;
                *col.select_nth_unstable_by(mid, f64::total_cmp).1
            })
            .collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for row in self.rows() {
            for (o, y) in out.iter_mut().zip(row) {
                *o += y;
            }
        }
        let n = self.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Unbiased sample covariance matrix, row-major `d x d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mean = self.column_means();
        let mut cov = vec![0.0; d * d];
        for row in self.rows() {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        let denom = (self.len().max(2) - 1) as f64;
        cov.iter_mut().for_each(|c| *c /= denom);
        cov
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPart {
    /// Volatility matrix `Sigma` (covariance per unit time), row-major nested.
    pub sigma: Vec<Vec<f64>>,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundPoissonPart {
    /// Expected number of jumps per unit time.
    pub intensity: f64,
    pub jump_mean: Vec<f64>,
    pub jump_cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceGammaPart {
    /// Variance of the gamma subordinator at unit time.
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Zero-based coordinates this block occupies.
    pub coords: Vec<usize>,
    pub spec: LevyModelSpec,
}

/// Generative description of a simulated Levy process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyModelSpec {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brownian: Option<BrownianPart>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cpp_parts: Vec<CompoundPoissonPart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vg_part: Option<VarianceGammaPart>,
    /// When present, the process is a concatenation of independent blocks and
    /// the top-level parts must be empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_structure: Option<Vec<Block>>,
}

impl LevyModelSpec {
    pub fn empty(dimension: usize) -> Self {
        Self {
            dimension,
            brownian: None,
            cpp_parts: Vec::new(),
            vg_part: None,
            block_structure: None,
        }
    }

    pub fn compound_poisson(intensity: f64, jump_mean: Vec<f64>, jump_cov: Vec<Vec<f64>>) -> Self {
        let mut spec = Self::empty(jump_mean.len());
        spec.cpp_parts.push(CompoundPoissonPart {
            intensity,
            jump_mean,
            jump_cov,
        });
        spec
    }

    /// Compound Poisson process with standard Gaussian jumps in `R^dim`.
    pub fn standard_cpp(intensity: f64, dim: usize) -> Self {
        Self::compound_poisson(intensity, vec![0.0; dim], identity(dim))
    }

    pub fn brownian(sigma: Vec<Vec<f64>>, drift: Vec<f64>) -> Self {
        let mut spec = Self::empty(drift.len());
        spec.brownian = Some(BrownianPart {
            sigma,
            drift: Some(drift),
        });
        spec
    }

    pub fn variance_gamma(kappa: f64, dim: usize) -> Self {
        let mut spec = Self::empty(dim);
        spec.vg_part = Some(VarianceGammaPart { kappa });
        spec
    }

    pub fn blocks(blocks: Vec<Block>) -> Self {
        let dimension = blocks.iter().map(|b| b.coords.len()).sum();
        let mut spec = Self::empty(dimension);
        spec.block_structure = Some(blocks);
        spec
    }

    /// Checks every invariant of the model, recursively for blocks.
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if d == 0 {
            return Err(Error::model("dimension must be positive"));
        }
        if let Some(blocks) = &self.block_structure {
            if self.brownian.is_some() || !self.cpp_parts.is_empty() || self.vg_part.is_some() {
                return Err(Error::model(
                    "a blocked model must describe its components inside the blocks",
                ));
            }
            if blocks.is_empty() {
                return Err(Error::model("block structure is empty"));
            }
            let mut seen = vec![false; d];
            for (b, block) in blocks.iter().enumerate() {
                if block.coords.len() != block.spec.dimension {
                    return Err(Error::model(format!(
                        "block {b} covers {} coordinates but its model has dimension {}",
                        block.coords.len(),
                        block.spec.dimension
                    )));
                }
                for &c in &block.coords {
                    if c >= d {
                        return Err(Error::model(format!(
                            "block {b} uses coordinate {c} outside 0..{d}"
                        )));
                    }
                    if std::mem::replace(&mut seen[c], true) {
                        return Err(Error::model(format!(
                            "coordinate {c} appears in two blocks"
                        )));
                    }
                }
                block.spec.validate()?;
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::model(format!("coordinate {missing} is in no block")));
            }
            return Ok(());
        }
        if let Some(bm) = &self.brownian {
            check_psd("volatility matrix", &bm.sigma, d)?;
            if let Some(drift) = &bm.drift {
                check_vector("drift", drift, d)?;
            }
        }
        for (i, part) in self.cpp_parts.iter().enumerate() {
            if !(part.intensity.is_finite() && part.intensity > 0.0) {
                return Err(Error::model(format!(
                    "compound Poisson part {i}: intensity must be positive, got {}",
                    part.intensity
                )));
            }
            check_vector("jump mean", &part.jump_mean, d)?;
            check_psd("jump covariance", &part.jump_cov, d)?;
        }
        if let Some(vg) = &self.vg_part {
            if !(vg.kappa.is_finite() && vg.kappa > 0.0) {
                return Err(Error::model(format!(
                    "subordinator variance must be positive, got {}",
                    vg.kappa
                )));
            }
        }
        Ok(())
    }
}

pub fn identity(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn check_vector(what: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::model(format!(
            "{what} has length {}, expected {d}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::model(format!("{what} has non-finite entries")));
    }
    Ok(())
}

pub(crate) fn to_matrix(what: &str, m: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(Error::model(format!("{what} must be {d} x {d}")));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::model(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| m[i][j]))
}

/// Validates symmetry and positive semidefiniteness
/// (all eigenvalues >= -1e-12 * trace).
pub fn check_psd(what: &str, m: &[Vec<f64>], d: usize) -> Result<()> {
    psd_sqrt(what, m, d).map(|_| ())
}

/// Symmetric square root factor `L` with `L L^T = m` for a PSD matrix.
pub(crate) fn psd_sqrt(what: &str, m: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    let a = to_matrix(what, m, d)?;
    let scale = a.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    if (&a - a.transpose())
        .iter()
        .any(|x| x.abs() > 1e-12 * scale.max(1.0))
    {
        return Err(Error::model(format!("{what} is not symmetric")));
    }
    let trace = a.trace();
    let eig = SymmetricEigen::new(a);
    let floor = -1e-12 * trace.abs();
    if let Some(bad) = eig.eigenvalues.iter().find(|&&ev| ev < floor) {
        return Err(Error::model(format!(
            "{what} is not positive semidefinite (eigenvalue {bad:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|ev| ev.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// One component of a Levy process that can draw an increment over `delta`.
pub trait IncrementGenerator: Send + Sync {
    fn dim(&self) -> usize;

    /// Adds one increment to `out`.
    fn add_increment(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

fn add_gaussian(
    factor: &DMatrix<f64>,
    scale: f64,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
    z: &mut [f64],
) {
    for zi in z.iter_mut() {
        *zi = rng.sample(StandardNormal);
    }
    let d = out.len();
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += factor[(i, j)] * z[j];
        }
        out[i] += scale * acc;
    }
}

#[derive(Debug, Clone)]
pub struct BrownianGenerator {
    step_drift: Vec<f64>,
    factor: DMatrix<f64>,
    sqrt_delta: f64,
}

impl BrownianGenerator {
    pub fn new(part: &BrownianPart, dim: usize, delta: f64) -> Result<Self> {
        let factor = psd_sqrt("volatility matrix", &part.sigma, dim)?;
        let drift = part.drift.clone().unwrap_or_else(|| vec![0.0; dim]);
        check_vector("drift", &drift, dim)?;
        Ok(Self {
            step_drift: drift.iter().map(|g| delta * g).collect(),
            factor,
            sqrt_delta: delta.sqrt(),
        })
    }
}

impl IncrementGenerator for BrownianGenerator {
    fn dim(&self) -> usize {
        self.step_drift.len()
    }

    fn add_increment(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let mut z = vec![0.0; out.len()];
        add_gaussian(&self.factor, self.sqrt_delta, rng, out, &mut z);
        for (o, m) in out.iter_mut().zip(&self.step_drift) {
            *o += m;
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompoundPoissonGenerator {
    counts: Poisson<f64>,
    mean: Vec<f64>,
    factor: DMatrix<f64>,
}

impl CompoundPoissonGenerator {
    pub fn new(part: &CompoundPoissonPart, dim: usize, delta: f64) -> Result<Self> {
        if !(part.intensity.is_finite() && part.intensity > 0.0) {
            return Err(Error::model("intensity must be positive"));
        }
        check_vector("jump mean", &part.jump_mean, dim)?;
        let factor = psd_sqrt("jump covariance", &part.jump_cov, dim)?;
        let expected = part.intensity * delta;
        if expected > MAX_EXPECTED_JUMPS {
            return Err(Error::Capacity(format!(
                "{expected:e} expected jumps per step exceeds {MAX_EXPECTED_JUMPS:e}"
            )));
        }
        let counts = Poisson::new(expected)
            .map_err(|e| Error::model(format!("jump count distribution: {e}")))?;
        Ok(Self {
            counts,
            mean: part.jump_mean.clone(),
            factor,
        })
    }

    /// Draws one increment into `out` (added) and returns the number of jumps.
    pub fn add_increment_counted(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> u64 {
        let jumps = self.counts.sample(rng) as u64;
        let mut z = vec![0.0; out.len()];
        for _ in 0..jumps {
            add_gaussian(&self.factor, 1.0, rng, out, &mut z);
            for (o, m) in out.iter_mut().zip(&self.mean) {
                *o += m;
            }
        }
        jumps
    }
}

impl IncrementGenerator for CompoundPoissonGenerator {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn add_increment(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.add_increment_counted(rng, out);
    }
}

/// `Y = sqrt(G) Z` with `G ~ Gamma(delta/kappa, kappa)` and `Z` standard normal.
#[derive(Debug, Clone)]
pub struct VarianceGammaGenerator {
    dim: usize,
    clock: Gamma<f64>,
}

impl VarianceGammaGenerator {
    pub fn new(part: &VarianceGammaPart, dim: usize, delta: f64) -> Result<Self> {
        if !(part.kappa.is_finite() && part.kappa > 0.0) {
            return Err(Error::model(format!(
                "subordinator variance must be positive, got {}",
                part.kappa
            )));
        }
        // rand_distr's Gamma is exact for every shape, including shape < 1.
        let clock = Gamma::new(delta / part.kappa, part.kappa)
            .map_err(|e| Error::model(format!("gamma subordinator: {e}")))?;
        Ok(Self { dim, clock })
    }

    pub fn draw_clock(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.clock.sample(rng)
    }
}

impl IncrementGenerator for VarianceGammaGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn add_increment(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let time = self.draw_clock(rng).sqrt();
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o += time * z;
        }
    }
}

/// Sum of independent components sharing one random stream.
pub struct CompositeGenerator {
    dim: usize,
    parts: Vec<Box<dyn IncrementGenerator>>,
}

impl CompositeGenerator {
    pub fn new(spec: &LevyModelSpec, delta: f64) -> Result<Self> {
        if spec.block_structure.is_some() {
            return Err(Error::model("blocked models are simulated block by block"));
        }
        let d = spec.dimension;
        let mut parts: Vec<Box<dyn IncrementGenerator>> = Vec::new();
        if let Some(bm) = &spec.brownian {
            parts.push(Box::new(BrownianGenerator::new(bm, d, delta)?));
        }
        for part in &spec.cpp_parts {
            parts.push(Box::new(CompoundPoissonGenerator::new(part, d, delta)?));
        }
        if let Some(vg) = &spec.vg_part {
            parts.push(Box::new(VarianceGammaGenerator::new(vg, d, delta)?));
        }
        Ok(Self { dim: d, parts })
    }
}

impl IncrementGenerator for CompositeGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn add_increment(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for part in &self.parts {
            part.add_increment(rng, out);
        }
    }
}

/// Random stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_run(delta: f64, n: usize) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::input(format!(
            "time step must be positive, got {delta}"
        )));
    }
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    Ok(())
}

fn run_generator(gen: &dyn IncrementGenerator, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let d = gen.dim();
    let mut values = vec![0.0; n * d];
    for row in values.chunks_exact_mut(d) {
        gen.add_increment(rng, row);
    }
    values
}

fn simulate_stream(
    spec: &LevyModelSpec,
    delta: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    match &spec.block_structure {
        None => {
            let gen = CompositeGenerator::new(spec, delta)?;
            Ok(run_generator(&gen, &mut stream_rng(seed, stream), n))
        }
        Some(blocks) => {
            let d = spec.dimension;
            let mut values = vec![0.0; n * d];
            for (b, block) in blocks.iter().enumerate() {
                // Each block owns stream (seed, block index), independent of evaluation order.
                let sub = simulate_stream(&block.spec, delta, n, seed, b as u64)?;
                let bd = block.coords.len();
                for (row, sub_row) in values.chunks_exact_mut(d).zip(sub.chunks_exact(bd)) {
                    for (&c, y) in block.coords.iter().zip(sub_row) {
                        row[c] = *y;
                    }
                }
            }
            Ok(values)
        }
    }
}

/// Simulates `n` i.i.d. increments of `spec` at time step `delta`.
pub fn simulate(spec: &LevyModelSpec, delta: f64, n: usize, seed: u64) -> Result<IncrementSample> {
    spec.validate()?;
    check_run(delta, n)?;
    let values = simulate_stream(spec, delta, n, seed, 0)?;
    IncrementSample::new(delta, spec.dimension, values, Some(seed))
}

pub fn simulate_compound_poisson(
    intensity: f64,
    jump_mean: &[f64],
    jump_cov: &[Vec<f64>],
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<IncrementSample> {
    let spec = LevyModelSpec::compound_poisson(intensity, jump_mean.to_vec(), jump_cov.to_vec());
    simulate(&spec, delta, n, seed)
}

/// Per-step jump counts of the same draw as [`simulate_compound_poisson`].
pub fn compound_poisson_jump_counts(
    intensity: f64,
    jump_mean: &[f64],
    jump_cov: &[Vec<f64>],
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    check_run(delta, n)?;
    let part = CompoundPoissonPart {
        intensity,
        jump_mean: jump_mean.to_vec(),
        jump_cov: jump_cov.to_vec(),
    };
    let gen = CompoundPoissonGenerator::new(&part, jump_mean.len(), delta)?;
    let mut rng = stream_rng(seed, 0);
    let mut row = vec![0.0; jump_mean.len()];
    Ok((0..n)
        .map(|_| {
            row.iter_mut().for_each(|y| *y = 0.0);
            gen.add_increment_counted(&mut rng, &mut row)
        })
        .collect())
}

pub fn simulate_variance_gamma(
    kappa: f64,
    dim: usize,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<IncrementSample> {
    simulate(&LevyModelSpec::variance_gamma(kappa, dim), delta, n, seed)
}

pub fn simulate_brownian(
    sigma: &[Vec<f64>],
    drift: &[f64],
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<IncrementSample> {
    simulate(
        &LevyModelSpec::brownian(sigma.to_vec(), drift.to_vec()),
        delta,
        n,
        seed,
    )
}

pub fn simulate_blocks(
    spec: &LevyModelSpec,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<IncrementSample> {
    if spec.block_structure.is_none() {
        return Err(Error::model("model has no block structure"));
    }
    simulate(spec, delta, n, seed)
}
