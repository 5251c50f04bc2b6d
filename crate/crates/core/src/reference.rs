//! Ground-truth Levy densities, characteristic functions and error metrics
//! for the simulated example models.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, Quantity, SpaceGrid};
use crate::quadrature::Quadrature;
use crate::region::{Region, TestFunction};
use crate::sim::{self, LevyModelSpec};

/// Smallest `|x|` at which the variance gamma density is evaluated.
pub const VG_MIN_RADIUS: f64 = 1e-3;

/// Absolute tolerance of the subordination integral.
pub const VG_ABS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceModel {
    CppGaussian {
        intensity: f64,
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// Standard Brownian motion in `R^dim` time-changed by a gamma process
    /// with unit mean rate and variance `kappa` per unit time.
    VarianceGamma { kappa: f64, dim: usize },
    /// Gaussian part; contributes to the characteristic function only.
    Brownian {
        sigma: Vec<Vec<f64>>,
        drift: Vec<f64>,
    },
    /// Independent components in the same coordinates.
    Sum {
        dim: usize,
        parts: Vec<ReferenceModel>,
    },
    /// Independent coordinate blocks.
    Blocks {
        dim: usize,
        blocks: Vec<(Vec<usize>, ReferenceModel)>,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Gaussian density with the given mean and covariance.
fn gaussian_density(x: &[f64], mean: &[f64], cov: &[Vec<f64>]) -> Result<f64> {
    let d = mean.len();
    let c = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let chol = c
        .cholesky()
        .ok_or_else(|| Error::Domain("jump covariance is singular; no Lebesgue density".into()))?;
    let diff = DVector::from_fn(d, |i, _| x[i] - mean[i]);
    let solved = chol.solve(&diff);
    let quad = diff.dot(&solved);
    let det = chol.determinant();
    Ok((-0.5 * quad).exp() / ((2.0 * PI).powi(d as i32) * det).sqrt())
}

impl ReferenceModel {
    pub fn standard_cpp(intensity: f64, dim: usize) -> Self {
        ReferenceModel::CppGaussian {
            intensity,
            mean: vec![0.0; dim],
            cov: sim::identity(dim),
        }
    }

    /// Reference model matching a simulation spec.
    pub fn from_spec(spec: &LevyModelSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dimension;
        if let Some(blocks) = &spec.block_structure {
            let blocks = blocks
                .iter()
                .map(|b| Ok((b.coords.clone(), ReferenceModel::from_spec(&b.spec)?)))
                .collect::<Result<Vec<_>>>()?;
            return Ok(ReferenceModel::Blocks { dim: d, blocks });
        }
        let mut parts = Vec::new();
        if let Some(bm) = &spec.brownian {
            parts.push(ReferenceModel::Brownian {
                sigma: bm.sigma.clone(),
                drift: bm.drift.clone().unwrap_or_else(|| vec![0.0; d]),
            });
        }
        for p in &spec.cpp_parts {
            parts.push(ReferenceModel::CppGaussian {
                intensity: p.intensity,
                mean: p.jump_mean.clone(),
                cov: p.jump_cov.clone(),
            });
        }
        if let Some(vg) = &spec.vg_part {
            parts.push(ReferenceModel::VarianceGamma {
                kappa: vg.kappa,
                dim: d,
            });
        }
        Ok(match parts.len() {
            1 => parts.pop().expect("one part"),
            _ => ReferenceModel::Sum { dim: d, parts },
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceModel::CppGaussian { mean, .. } => mean.len(),
            ReferenceModel::VarianceGamma { dim, .. } => *dim,
            ReferenceModel::Brownian { drift, .. } => drift.len(),
            ReferenceModel::Sum { dim, .. } | ReferenceModel::Blocks { dim, .. } => *dim,
        }
    }

    /// Whether the Levy measure has a Lebesgue density on `R^d`.
    pub fn has_density(&self) -> bool {
        match self {
            ReferenceModel::Blocks { blocks, .. } => blocks.len() == 1 && blocks[0].1.has_density(),
            ReferenceModel::Sum { parts, .. } => parts.iter().all(ReferenceModel::has_density),
            _ => true,
        }
    }

    /// Trace of the Gaussian covariance per unit time.
    pub fn trace_sigma(&self) -> f64 {
        match self {
            ReferenceModel::Brownian { sigma, .. } => (0..sigma.len()).map(|i| sigma[i][i]).sum(),
            ReferenceModel::Sum { parts, .. } => {
                parts.iter().map(ReferenceModel::trace_sigma).sum()
            }
            ReferenceModel::Blocks { blocks, .. } => {
                blocks.iter().map(|(_, m)| m.trace_sigma()).sum()
            }
            _ => 0.0,
        }
    }

    /// Levy density at `x`. Variance gamma diverges at the origin and
    /// returns `+inf` there; blocked models have no density on `R^d` and
    /// return a domain error (see [`ReferenceModel::block_densities`]).
    pub fn levy_density(&self, x: &[f64]) -> Result<f64> {
        match self {
            ReferenceModel::CppGaussian {
                intensity,
                mean,
                cov,
            } => Ok(intensity * gaussian_density(x, mean, cov)?),
            ReferenceModel::VarianceGamma { kappa, dim } => {
                let r = norm_sq(x).sqrt();
                if r == 0.0 {
                    return Ok(f64::INFINITY);
                }
                if r < VG_MIN_RADIUS {
                    return Err(Error::Domain(format!(
                        "variance gamma density is evaluated only for |x| >= {VG_MIN_RADIUS}"
                    )));
                }
                vg_density(r, *kappa, *dim)
            }
            ReferenceModel::Brownian { .. } => Ok(0.0),
            ReferenceModel::Sum { parts, .. } => parts.iter().map(|p| p.levy_density(x)).sum(),
            ReferenceModel::Blocks { blocks, .. } => {
                if blocks.len() == 1 {
                    let (coords, m) = &blocks[0];
                    let sub: Vec<f64> = coords.iter().map(|&c| x[c]).collect();
                    m.levy_density(&sub)
                } else {
                    Err(Error::Domain(
                        "independent blocks have no Levy density on R^d".into(),
                    ))
                }
            }
        }
    }

    /// Per-block densities at the block sub-vectors of `x`.
    pub fn block_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ReferenceModel::Blocks { blocks, .. } => blocks
                .iter()
                .map(|(coords, m)| {
                    let sub: Vec<f64> = coords.iter().map(|&c| x[c]).collect();
                    m.levy_density(&sub)
                })
                .collect(),
            other => Ok(vec![other.levy_density(x)?]),
        }
    }

    /// `|x|^2 nu(x)`, finite at the origin for the supported models.
    pub fn xsq_density(&self, x: &[f64]) -> Result<f64> {
        let r2 = norm_sq(x);
        if r2 == 0.0 {
            return Ok(0.0);
        }
        Ok(r2 * self.levy_density(x)?)
    }

    /// Characteristic function of the increment over time `t`.
    pub fn cf(&self, t: f64, u: &[f64]) -> Complex64 {
        (t * self.exponent(u)).exp()
    }

    /// Characteristic exponent `psi(u)`.
    pub fn exponent(&self, u: &[f64]) -> Complex64 {
        match self {
            ReferenceModel::CppGaussian {
                intensity,
                mean,
                cov,
            } => {
                let jump_cf = Complex64::new(-0.5 * dot(u, &mat_vec(cov, u)), dot(u, mean)).exp();
                intensity * (jump_cf - 1.0)
            }
            ReferenceModel::VarianceGamma { kappa, .. } => {
                Complex64::new(-(1.0 + kappa * norm_sq(u) / 2.0).ln() / kappa, 0.0)
            }
            ReferenceModel::Brownian { sigma, drift } => {
                Complex64::new(-0.5 * dot(u, &mat_vec(sigma, u)), dot(u, drift))
            }
            ReferenceModel::Sum { parts, .. } => parts.iter().map(|p| p.exponent(u)).sum(),
            ReferenceModel::Blocks { blocks, .. } => blocks
                .iter()
                .map(|(coords, m)| {
                    let sub: Vec<f64> = coords.iter().map(|&c| u[c]).collect();
                    m.exponent(&sub)
                })
                .sum(),
        }
    }

    /// Analytic Laplacian of the characteristic exponent,
    /// `-tr(Sigma) - F[|x|^2 nu](u)`.
    pub fn psi_laplacian(&self, u: &[f64]) -> Complex64 {
        match self {
            ReferenceModel::CppGaussian {
                intensity,
                mean,
                cov,
            } => {
                // jump cf chi(u) = exp(i<u,m> - u'Cu/2); F[|x|^2 nu] = -lambda lap(chi)
                let cu = mat_vec(cov, u);
                let chi = Complex64::new(-0.5 * dot(u, &cu), dot(u, mean)).exp();
                let trace: f64 = (0..cov.len()).map(|i| cov[i][i]).sum();
                let grad_sq = Complex64::new(norm_sq(&cu) - norm_sq(mean), -2.0 * dot(mean, &cu));
                -intensity * chi * (trace - grad_sq)
            }
            ReferenceModel::VarianceGamma { kappa, dim } => {
                let a = kappa * norm_sq(u) / 2.0;
                let d = *dim as f64;
                Complex64::new(
                    -d / (1.0 + a) + kappa * norm_sq(u) / ((1.0 + a) * (1.0 + a)),
                    0.0,
                )
            }
            ReferenceModel::Brownian { .. } => Complex64::new(-self.trace_sigma(), 0.0),
            ReferenceModel::Sum { parts, .. } => parts.iter().map(|p| p.psi_laplacian(u)).sum(),
            ReferenceModel::Blocks { blocks, .. } => blocks
                .iter()
                .map(|(coords, m)| {
                    let sub: Vec<f64> = coords.iter().map(|&c| u[c]).collect();
                    m.psi_laplacian(&sub)
                })
                .sum(),
        }
    }

    /// `int f(x) |x|^2 nu(dx)` by adaptive quadrature over the support of `f`.
    /// Blocks contribute one integral per block over its own coordinates with
    /// the remaining coordinates set to zero.
    pub fn functional(&self, f: &TestFunction, quad: &Quadrature) -> Result<f64> {
        if f.center.len() != self.dim() {
            return Err(Error::input("test function dimension mismatch"));
        }
        match self {
            ReferenceModel::Blocks { dim, blocks } => {
                let mut total = 0.0;
                for (coords, model) in blocks {
                    let (lo, hi) = f.support_box();
                    let sub_lo: Vec<f64> = coords.iter().map(|&c| lo[c]).collect();
                    let sub_hi: Vec<f64> = coords.iter().map(|&c| hi[c]).collect();
                    let outside = (0..*dim)
                        .filter(|c| !coords.contains(c))
                        .any(|c| !(lo[c] < 0.0 && hi[c] > 0.0));
                    if outside {
                        continue;
                    }
                    let integrand = |sub: &[f64]| {
                        let mut x = vec![0.0; *dim];
                        for (&c, v) in coords.iter().zip(sub) {
                            x[c] = *v;
                        }
                        let fx = f.value(&x);
                        if fx == 0.0 {
                            0.0
                        } else {
                            fx * model.xsq_density(sub).unwrap_or(0.0)
                        }
                    };
                    total += quad.integrate_box(&integrand, &sub_lo, &sub_hi)?;
                }
                Ok(total)
            }
            model => {
                let (lo, hi) = f.support_box();
                let integrand = |x: &[f64]| {
                    let fx = f.value(x);
                    if fx == 0.0 {
                        0.0
                    } else {
                        fx * model.xsq_density(x).unwrap_or(0.0)
                    }
                };
                quad.integrate_box(&integrand, &lo, &hi)
            }
        }
    }

    /// `|x|^2 nu(x)` sampled on a space grid (`NaN` where undefined).
    pub fn xsq_field(&self, grid: &SpaceGrid) -> DensityField {
        DensityField::from_fn(*grid, Quantity::TrueXsqNu, |x| {
            self.xsq_density(x).unwrap_or(f64::NAN)
        })
    }
}

/// Variance gamma Levy density at radius `r`:
/// `int_0^inf (2 pi t)^{-d/2} exp(-r^2/(2t)) kappa^{-1} t^{-1} exp(-t/kappa) dt`,
/// integrated in `s = ln t`.
pub fn vg_density(r: f64, kappa: f64, dim: usize) -> Result<f64> {
    let d = dim as f64;
    let r2 = r * r;
    let integrand = |s: f64| {
        let t = s.exp();
        (2.0 * PI * t).powf(-d / 2.0) * (-r2 / (2.0 * t) - t / kappa).exp() / kappa
    };
    // Outside these limits the integrand is below exp(-700) relative to its peak.
    let lo = (r2 / 1400.0).ln();
    let hi = (700.0 * kappa).ln();
    let peak = {
        // maximizer of -d/2 ln t - r^2/(2t) - t/kappa
        let b = d / 2.0;
        let t = (-b + (b * b + 2.0 * r2 / kappa).sqrt()) * kappa / 2.0;
        t.ln().clamp(lo, hi)
    };
    let q = Quadrature::with_abs_tol(VG_ABS_TOL / 2.0);
    Ok(q.value(integrand, lo, peak)? + q.value(integrand, peak, hi)?)
}

/// Maximum of `|field - truth|` over defined nodes in `region`.
pub fn sup_error(field: &DensityField, truth: impl Fn(&[f64]) -> f64, region: &Region) -> f64 {
    field
        .grid
        .nodes()
        .filter(|(flat, x)| field.defined[*flat] && region.contains(x))
        .map(|(flat, x)| (field.values[flat] - truth(&x)).abs())
        .fold(0.0, f64::max)
}

/// Rectangle-rule `L^2(region)` norm of `field - truth`.
pub fn l2_error(field: &DensityField, truth: impl Fn(&[f64]) -> f64, region: &Region) -> f64 {
    let sum: f64 = field
        .grid
        .nodes()
        .filter(|(flat, x)| field.defined[*flat] && region.contains(x))
        .map(|(flat, x)| (field.values[flat] - truth(&x)).powi(2))
        .sum();
    (sum * field.grid.cell_volume()).sqrt()
}

/// Rectangle-rule `L^2(region)` norm of `truth` on the grid of `field`.
pub fn l2_norm(grid: &SpaceGrid, truth: impl Fn(&[f64]) -> f64, region: &Region) -> f64 {
    let sum: f64 = grid
        .nodes()
        .filter(|(_, x)| region.contains(x))
        .map(|(_, x)| truth(&x).powi(2))
        .sum();
    (sum * grid.cell_volume()).sqrt()
}
