//! Inverse continuous Fourier transform on grids.
//!
//! `F^{-1}[g](x) = (2 pi)^{-d} int exp(-i<u, x>) g(u) du` is approximated by
//! the rectangle rule over a half-open symmetric frequency grid. On the dual
//! space grid this sum is a shifted DFT and is evaluated by FFT; at arbitrary
//! points it is evaluated directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, DensityField, FreqGrid, Quantity, SpaceGrid};

/// Complex-valued function on a space grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub grid: SpaceGrid,
    pub values: Vec<Complex64>,
}

impl SpatialField {
    /// Largest imaginary magnitude relative to the largest real magnitude.
    pub fn imaginary_residual(&self) -> f64 {
        let re = self.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let im = self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        if re > 0.0 {
            im / re
        } else {
            im
        }
    }

    /// Real part as a density field.
    pub fn real_part(&self, quantity: Quantity) -> DensityField {
        DensityField {
            grid: self.grid,
            quantity,
            values: self.values.iter().map(|v| v.re).collect(),
            defined: vec![true; self.values.len()],
        }
    }
}

/// Rotates every axis by `M/2`, mapping storage order `{-M/2..M/2-1}` to
/// FFT order `{0..M/2-1, -M/2..-1}` and back (even `M`).
fn half_shift(values: &mut [Complex64], dim: usize, points: usize) {
    let half = points / 2;
    let mut stride = 1;
    for _ in 0..dim {
        let block = stride * points;
        for outer in values.chunks_exact_mut(block) {
            for inner in 0..stride {
                for j in 0..half {
                    outer.swap(inner + j * stride, inner + (j + half) * stride);
                }
            }
        }
        stride = block;
    }
}

/// In-place forward DFT along every axis of a row-major `points^dim` array.
fn fft_all_axes(values: &mut [Complex64], dim: usize, points: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(points);
    let mut line = vec![Complex64::new(0.0, 0.0); points];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut stride = 1;
    for _ in 0..dim {
        let block = stride * points;
        if stride == 1 {
            for chunk in values.chunks_exact_mut(points) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
        } else {
            for outer in values.chunks_exact_mut(block) {
                for inner in 0..stride {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = outer[inner + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, slot) in line.iter().enumerate() {
                        outer[inner + j * stride] = *slot;
                    }
                }
            }
        }
        stride = block;
    }
}

/// Rectangle-rule inverse Fourier transform onto the dual space grid via FFT.
pub fn inverse_fourier_fft(field: &ComplexField) -> Result<SpatialField> {
    let grid = field.grid;
    if field.values.len() != grid.len() {
        return Err(Error::config("field size does not match its grid"));
    }
    let (d, m) = (grid.dim(), grid.points());
    let mut values = field.values.clone();
    half_shift(&mut values, d, m);
    fft_all_axes(&mut values, d, m);
    half_shift(&mut values, d, m);
    let weight = (grid.spacing() / (2.0 * PI)).powi(d as i32);
    values.iter_mut().for_each(|v| *v *= weight);
    Ok(SpatialField {
        grid: grid.dual(),
        values,
    })
}

/// Direct rectangle-rule evaluation of the inverse transform at arbitrary points.
pub fn inverse_fourier_quadrature(field: &ComplexField, points: &[Vec<f64>]) -> Vec<Complex64> {
    let grid = field.grid;
    let d = grid.dim();
    let weight = (grid.spacing() / (2.0 * PI)).powi(d as i32);
    let nodes: Vec<Vec<f64>> = (0..grid.len())
        .map(|flat| {
            let mut u = vec![0.0; d];
            grid.node(flat, &mut u);
            u
        })
        .collect();
    points
        .iter()
        .map(|x| {
            let sum: Complex64 = nodes
                .iter()
                .zip(&field.values)
                .map(|(u, g)| {
                    let phase: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
                    g * Complex64::new(0.0, -phase).exp()
                })
                .sum();
            sum * weight
        })
        .collect()
}

/// Spatial kernel `K_h = F^{-1}[FK_h]` sampled on the dual grid.
pub fn spatial_kernel(fk: &ComplexField) -> Result<DensityField> {
    Ok(inverse_fourier_fft(fk)?.real_part(Quantity::Kernel))
}

/// Frequency grid whose dual space grid has spacing `dx` and `points` nodes per axis.
pub fn grid_for_space(dim: usize, points: usize, dx: f64) -> Result<FreqGrid> {
    Ok(SpaceGrid::new(dim, points, dx)?.dual())
}
