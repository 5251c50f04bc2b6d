//! Uniform tensor-product grids in frequency and state space.
//!
//! Both grids are half-open and symmetric: per axis the nodes are
//! `{-M/2, ..., M/2 - 1} * spacing`, stored row-major with the last axis
//! fastest. A frequency grid with spacing `du` and `M` points is FFT-dual to
//! the space grid with the same `M` and spacing `dx = 2*pi / (M * du)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of nodes of any grid (`M^d`).
pub const MAX_GRID_NODES: usize = 1 << 26;

fn check_shape(dim: usize, points: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::config("grid dimension must be positive"));
    }
    if points < 2 || points % 2 != 0 {
        return Err(Error::config(format!(
            "points per axis must be even and >= 2, got {points}"
        )));
    }
    let mut total: usize = 1;
    for _ in 0..dim {
        total = total
            .checked_mul(points)
            .filter(|&t| t <= MAX_GRID_NODES)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "grid of {points}^{dim} nodes exceeds the limit of {MAX_GRID_NODES}"
                ))
            })?;
    }
    Ok(total)
}

/// Signed node index along one axis for storage position `j`.
#[inline]
pub fn signed_index(j: usize, points: usize) -> i64 {
    j as i64 - (points / 2) as i64
}

/// Decomposes a flat row-major index into per-axis storage positions.
#[inline]
pub fn unflatten(mut flat: usize, points: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % points;
        flat /= points;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    dim: usize,
    points: usize,
    u_max: f64,
}

impl FreqGrid {
    pub fn new(dim: usize, points: usize, u_max: f64) -> Result<Self> {
        check_shape(dim, points)?;
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::config(format!(
                "u_max must be positive, got {u_max}"
            )));
        }
        Ok(Self { dim, points, u_max })
    }

    /// Grid with the given spacing; `u_max = spacing * points / 2`.
    pub fn with_spacing(dim: usize, points: usize, spacing: f64) -> Result<Self> {
        Self::new(dim, points, spacing * points as f64 / 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.u_max / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequencies along one axis, in storage order.
    pub fn axis(&self) -> Vec<f64> {
        let du = self.spacing();
        (0..self.points)
            .map(|j| signed_index(j, self.points) as f64 * du)
            .collect()
    }

    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim];
        unflatten(flat, self.points, &mut idx);
        let du = self.spacing();
        for (o, j) in out.iter_mut().zip(idx) {
            *o = signed_index(j, self.points) as f64 * du;
        }
    }

    /// Flat index of the node `-u`, if it lies on the grid.
    pub fn mirror(&self, flat: usize) -> Option<usize> {
        let mut idx = vec![0; self.dim];
        unflatten(flat, self.points, &mut idx);
        let mut out = 0;
        for j in idx {
            if j == 0 {
                return None;
            }
            out = out * self.points + (self.points - j);
        }
        Some(out)
    }

    /// Cell volume `du^d` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn dual(&self) -> SpaceGrid {
        SpaceGrid {
            dim: self.dim,
            points: self.points,
            spacing: 2.0 * PI / (self.points as f64 * self.spacing()),
        }
    }

    /// Same spacing, `factor` times as many points per axis.
    pub fn padded(&self, factor: usize) -> Result<FreqGrid> {
        if factor == 0 {
            return Err(Error::config("padding factor must be positive"));
        }
        FreqGrid::new(self.dim, self.points * factor, self.u_max * factor as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    dim: usize,
    points: usize,
    spacing: f64,
}

impl SpaceGrid {
    pub fn new(dim: usize, points: usize, spacing: f64) -> Result<Self> {
        check_shape(dim, points)?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::config(format!(
                "spatial spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            dim,
            points,
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn extent(&self) -> f64 {
        self.spacing * (self.points / 2) as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points)
            .map(|j| signed_index(j, self.points) as f64 * self.spacing)
            .collect()
    }

    pub fn node(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim];
        unflatten(flat, self.points, &mut idx);
        for (o, j) in out.iter_mut().zip(idx) {
            *o = signed_index(j, self.points) as f64 * self.spacing;
        }
    }

    /// Iterates over `(flat index, coordinates)` of every node.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
        (0..self.len()).map(move |flat| {
            let mut x = vec![0.0; self.dim];
            self.node(flat, &mut x);
            (flat, x)
        })
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn dual(&self) -> FreqGrid {
        let du = 2.0 * PI / (self.points as f64 * self.spacing);
        FreqGrid {
            dim: self.dim,
            points: self.points,
            u_max: du * self.points as f64 / 2.0,
        }
    }
}

/// Complex function sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: FreqGrid,
    pub values: Vec<Complex64>,
    /// Nodes where the value was suppressed (e.g. by the ECF threshold).
    pub mask: Option<Vec<bool>>,
}

impl ComplexField {
    pub fn new(grid: FreqGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::input(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            mask: None,
        })
    }

    pub fn zeros(grid: FreqGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            mask: None,
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: FreqGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut u = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|flat| {
                grid.node(flat, &mut u);
                f(&u)
            })
            .collect();
        Self {
            grid,
            values,
            mask: None,
        }
    }

    /// Flat index of the origin.
    pub fn origin_index(&self) -> usize {
        let half = self.grid.points() / 2;
        (0..self.grid.dim()).fold(0, |acc, _| acc * self.grid.points() + half)
    }

    pub fn masked_fraction(&self) -> f64 {
        match &self.mask {
            Some(mask) => mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64,
            None => 0.0,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Embeds the field in a grid with the same spacing and `factor` times as
    /// many points per axis, filling new nodes with zero.
    pub fn zero_padded(&self, factor: usize) -> Result<Self> {
        let big = self.grid.padded(factor)?;
        let m = self.grid.points();
        let big_m = big.points();
        let offset = (big_m - m) / 2;
        let d = self.grid.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); big.len()];
        let mut idx = vec![0; d];
        for (flat, v) in self.values.iter().enumerate() {
            unflatten(flat, m, &mut idx);
            let target = idx.iter().fold(0, |acc, &j| acc * big_m + j + offset);
            out[target] = *v;
        }
        Ok(Self {
            grid: big,
            values: out,
            mask: None,
        })
    }
}

/// What a [`DensityField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Estimated Levy density.
    NuHat,
    /// Estimated `|x|^2 nu(x)`.
    XsqNuHat,
    /// Volatility-corrected estimate of `|x|^2 nu(x)`.
    XsqNuCorrected,
    /// Spatial kernel.
    Kernel,
    /// True Levy density.
    TrueNu,
    /// True `|x|^2 nu(x)`.
    TrueXsqNu,
    Other,
}

/// Real function sampled on a space grid. Nodes with `defined[i] == false`
/// carry `NaN` and must not be read as values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: SpaceGrid,
    pub quantity: Quantity,
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
}

impl DensityField {
    pub fn new(grid: SpaceGrid, quantity: Quantity, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::input(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let defined = values.iter().map(|v| !v.is_nan()).collect();
        Ok(Self {
            grid,
            quantity,
            values,
            defined,
        })
    }

    pub fn from_fn(grid: SpaceGrid, quantity: Quantity, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = grid.nodes().map(|(_, x)| f(&x)).collect();
        let defined = values.iter().map(|v| !v.is_nan()).collect();
        Self {
            grid,
            quantity,
            values,
            defined,
        }
    }

    /// Value at a flat index, `None` where undefined.
    pub fn get(&self, flat: usize) -> Option<f64> {
        self.defined[flat].then(|| self.values[flat])
    }

    /// Replaces every defined value by `max(value, 0)`.
    pub fn positive_part(&self) -> Self {
        let mut out = self.clone();
        for (v, &def) in out.values.iter_mut().zip(&self.defined) {
            if def && *v < 0.0 {
                *v = 0.0;
            }
        }
        out
    }

    pub fn sup_abs_diff(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.defined.iter().zip(&other.defined))
            .filter(|(_, (a, b))| **a && **b)
            .map(|((x, y), _)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}
