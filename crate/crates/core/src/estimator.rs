//! Spectral estimators of the Levy density, of `|x|^2 nu`, and of the trace
//! of the Gaussian covariance.
//!
//! With `Dpsi` the plug-in Laplacian of the characteristic exponent on the
//! frequency box `[-1/h, 1/h]^d`,
//!
//! * `|x|^2 nu_hat  = -F^{-1}[FK_h Dpsi]`
//! * `nu_hat(x)     = |x|^{-2} (|x|^2 nu_hat)(x)` for `|x| > eps0`
//! * `trace_hat     = -int W_h Re Dpsi du`
//! * corrected      `-F^{-1}[FK_h (Dpsi + trace_hat)]`
//!
//! The inverse transform zero-pads the frequency field by `oversample` before
//! the FFT, which refines the spatial grid to `dx = pi h / oversample` without
//! changing the rectangle-rule sum.

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthSpec;
use crate::error::{Error, Result};
use crate::fourier::inverse_fourier_fft;
use crate::grid::{ComplexField, DensityField, FreqGrid, Quantity, SpaceGrid};
use crate::kernels::{
    fk_on_grid, weight_on_grid, FourierKernel, KernelSpec, WeightFunction, WeightSpec,
};
use crate::sim::IncrementSample;
use crate::spectral::psi_laplacian_hat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostProcess {
    Raw,
    /// `max(Re nu_hat, 0)`.
    #[default]
    RealPositivePart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_weight")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub bandwidth: BandwidthSpec,
    /// Frequency nodes per axis on `[-1/h, 1/h)`.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Zero-padding factor applied before the inverse FFT.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub post_process: PostProcess,
    /// Radius of the ball around 0 excluded from `nu_hat`; defaults to one spatial cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_exclusion_radius: Option<f64>,
}

fn default_weight() -> WeightSpec {
    WeightSpec::new("indicator_box", None)
}

fn default_points() -> usize {
    128
}

fn default_oversample() -> usize {
    4
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            weight: default_weight(),
            bandwidth: BandwidthSpec::default(),
            points: default_points(),
            oversample: default_oversample(),
            post_process: PostProcess::default(),
            origin_exclusion_radius: None,
        }
    }
}

impl EstimatorConfig {
    pub fn with_bandwidth(mut self, bandwidth: BandwidthSpec) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 || self.points % 2 != 0 {
            return Err(Error::config(format!(
                "points must be even and >= 2, got {}",
                self.points
            )));
        }
        if self.oversample == 0 {
            return Err(Error::config("oversample must be positive"));
        }
        if let Some(eps) = self.origin_exclusion_radius {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::config(format!(
                    "origin exclusion radius must be >= 0, got {eps}"
                )));
            }
        }
        if let Some(hw) = self.weight.bandwidth {
            if !(hw > 0.0 && hw.is_finite()) {
                return Err(Error::config(format!(
                    "weight bandwidth must be positive, got {hw}"
                )));
            }
        }
        self.kernel.build()?;
        self.weight.build()?;
        self.bandwidth.build()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bandwidth: f64,
    pub weight_bandwidth: f64,
    pub n: usize,
    pub delta: f64,
    pub horizon: f64,
    /// Fraction of frequency nodes rejected by the `|phi_hat| >= T^{-1/2}` guard.
    pub masked_fraction: f64,
    /// Max imaginary part of the inverse transform relative to its max real part.
    pub imaginary_residual: f64,
    pub trace_sigma: f64,
    pub trace_sigma_negative: bool,
    pub frequency_points: usize,
    pub space_points: usize,
    pub space_spacing: f64,
    pub space_extent: f64,
    pub origin_exclusion_radius: f64,
}

/// Output of [`estimate_levy_density`]. The `_raw` fields are recorded
/// before post-processing.
#[derive(Debug, Clone)]
pub struct LevyDensityEstimate {
    pub nu_hat: DensityField,
    pub xsq_nu_hat: DensityField,
    pub nu_hat_raw: DensityField,
    pub xsq_nu_hat_raw: DensityField,
    pub diagnostics: Diagnostics,
}

/// Fitted estimator holding the plug-in Laplacian on the kernel grid.
#[derive(Debug)]
pub struct SpectralEstimator {
    config: EstimatorConfig,
    kernel: Box<dyn FourierKernel>,
    weight: Box<dyn WeightFunction>,
    bandwidth: f64,
    weight_bandwidth: f64,
    psi: ComplexField,
    weight_psi: Option<ComplexField>,
    n: usize,
    delta: f64,
    horizon: f64,
}

impl SpectralEstimator {
    pub fn fit(sample: &IncrementSample, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        if sample.is_empty() {
            return Err(Error::input("sample is empty"));
        }
        let d = sample.dim();
        let bandwidth = config
            .bandwidth
            .resolve(sample.delta(), sample.horizon(), d)?;
        let grid = FreqGrid::new(d, config.points, 1.0 / bandwidth)?;
        let psi = psi_laplacian_hat(sample, &grid)?;
        let weight_bandwidth = config.weight.bandwidth.unwrap_or(bandwidth);
        let weight_psi = if weight_bandwidth == bandwidth {
            None
        } else {
            let wgrid = FreqGrid::new(d, config.points, 1.0 / weight_bandwidth)?;
            Some(psi_laplacian_hat(sample, &wgrid)?)
        };
        Ok(Self {
            config: config.clone(),
            kernel: config.kernel.build()?,
            weight: config.weight.build()?,
            bandwidth,
            weight_bandwidth,
            psi,
            weight_psi,
            n: sample.len(),
            delta: sample.delta(),
            horizon: sample.horizon(),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Plug-in Laplacian of the characteristic exponent on the kernel grid.
    pub fn psi_laplacian(&self) -> &ComplexField {
        &self.psi
    }

    /// Spatial grid of every output field.
    pub fn space_grid(&self) -> Result<SpaceGrid> {
        Ok(self.psi.grid.padded(self.config.oversample)?.dual())
    }

    fn exclusion_radius(&self, grid: &SpaceGrid) -> Result<f64> {
        let eps = self
            .config
            .origin_exclusion_radius
            .unwrap_or(grid.spacing());
        if eps >= grid.extent() {
            return Err(Error::config(format!(
                "origin exclusion radius {eps} is not below the spatial extent {}",
                grid.extent()
            )));
        }
        Ok(eps)
    }

    /// `-F^{-1}[FK_h (Dpsi + trace)]` with its imaginary residual. A zero
    /// trace leaves `Dpsi` untouched.
    pub fn xsq_field(&self, trace: f64) -> Result<(DensityField, f64)> {
        let fk = fk_on_grid(self.kernel.as_ref(), self.bandwidth, &self.psi.grid)?;
        let values = fk
            .values
            .iter()
            .zip(&self.psi.values)
            .map(|(k, p)| {
                if trace == 0.0 {
                    -k * p
                } else {
                    -k * (p + trace)
                }
            })
            .collect();
        let product = ComplexField::new(self.psi.grid, values)?;
        let spatial = inverse_fourier_fft(&product.zero_padded(self.config.oversample)?)?;
        let residual = spatial.imaginary_residual();
        Ok((spatial.real_part(Quantity::XsqNuHat), residual))
    }

    /// `-int W_h Re Dpsi du` by the rectangle rule.
    pub fn trace_sigma(&self) -> Result<f64> {
        let psi = self.weight_psi.as_ref().unwrap_or(&self.psi);
        let weights = weight_on_grid(self.weight.as_ref(), self.weight_bandwidth, &psi.grid)?;
        Ok(integrate_weight(psi, &weights))
    }

    pub fn estimate(&self) -> Result<LevyDensityEstimate> {
        let (xsq_raw, imaginary_residual) = self.xsq_field(0.0)?;
        let grid = xsq_raw.grid;
        let eps = self.exclusion_radius(&grid)?;
        let nu_raw = divide_by_norm_sq(&xsq_raw, eps);
        let (nu_hat, xsq_nu_hat) = match self.config.post_process {
            PostProcess::Raw => (nu_raw.clone(), xsq_raw.clone()),
            PostProcess::RealPositivePart => (nu_raw.positive_part(), xsq_raw.positive_part()),
        };
        let trace_sigma = self.trace_sigma()?;
        let diagnostics = Diagnostics {
            bandwidth: self.bandwidth,
            weight_bandwidth: self.weight_bandwidth,
            n: self.n,
            delta: self.delta,
            horizon: self.horizon,
            masked_fraction: self.psi.masked_fraction(),
            imaginary_residual,
            trace_sigma,
            trace_sigma_negative: trace_sigma < 0.0,
            frequency_points: self.config.points,
            space_points: grid.points(),
            space_spacing: grid.spacing(),
            space_extent: grid.extent(),
            origin_exclusion_radius: eps,
        };
        Ok(LevyDensityEstimate {
            nu_hat,
            xsq_nu_hat,
            nu_hat_raw: nu_raw,
            xsq_nu_hat_raw: xsq_raw,
            diagnostics,
        })
    }

    /// Volatility-corrected `|x|^2 nu` estimate using the given trace.
    pub fn xsq_corrected_with_trace(&self, trace: f64) -> Result<DensityField> {
        let (mut field, _) = self.xsq_field(trace)?;
        field.quantity = Quantity::XsqNuCorrected;
        Ok(field)
    }

    pub fn xsq_corrected(&self) -> Result<DensityField> {
        self.xsq_corrected_with_trace(self.trace_sigma()?)
    }
}

/// `-sum Re(field) * w * du^d` over the grid.
pub fn integrate_weight(field: &ComplexField, weights: &[f64]) -> f64 {
    let sum: f64 = field
        .values
        .iter()
        .zip(weights)
        .map(|(v, w)| v.re * w)
        .sum();
    -sum * field.grid.cell_volume()
}

/// `field / |x|^2` for `|x| > eps`; nodes inside the closed ball are undefined.
fn divide_by_norm_sq(field: &DensityField, eps: f64) -> DensityField {
    let mut values = Vec::with_capacity(field.values.len());
    let mut defined = Vec::with_capacity(field.values.len());
    for (flat, x) in field.grid.nodes() {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > 0.0 && r2.sqrt() > eps {
            values.push(field.values[flat] / r2);
            defined.push(true);
        } else {
            values.push(f64::NAN);
            defined.push(false);
        }
    }
    DensityField {
        grid: field.grid,
        quantity: Quantity::NuHat,
        values,
        defined,
    }
}

pub fn estimate_levy_density(
    sample: &IncrementSample,
    config: &EstimatorConfig,
) -> Result<LevyDensityEstimate> {
    SpectralEstimator::fit(sample, config)?.estimate()
}

pub fn estimate_trace_sigma(sample: &IncrementSample, config: &EstimatorConfig) -> Result<f64> {
    SpectralEstimator::fit(sample, config)?.trace_sigma()
}

pub fn estimate_xsq_nu_corrected(
    sample: &IncrementSample,
    config: &EstimatorConfig,
) -> Result<DensityField> {
    SpectralEstimator::fit(sample, config)?.xsq_corrected()
}
