//! Fourier-domain kernels and weight functions.
//!
//! A kernel is described by its Fourier transform `FK` at unit bandwidth,
//! supported in `[-1, 1]^d`; the bandwidth-`h` version is `FK(h u)`. Weights
//! `W` integrate to one over `[-1, 1]^d` and are rescaled as `h^d W(h u)`.
//! Both families are registered by name and selected from configuration.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, FreqGrid};
use crate::quadrature::Quadrature;
use crate::registry::Registry;

pub const DEFAULT_B: f64 = 1.0;
pub const DEFAULT_C: f64 = 1.0 / 50.0;

/// Fourier transform of a kernel at unit bandwidth.
pub trait FourierKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// `FK(u)`; zero outside `[-1, 1]^d`.
    fn value(&self, u: &[f64]) -> f64;
}

/// Radial profile of the flat-top kernel:
/// 1 on `[0, c]`, `exp(-b exp(-b/(r-c)^2) / (r-1)^2)` on `(c, 1)`, 0 beyond.
pub fn flat_top_profile(r: f64, b: f64, c: f64) -> f64 {
    if r <= c {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let inner = (-b / ((r - c) * (r - c))).exp();
        (-b * inner / ((r - 1.0) * (r - 1.0))).exp()
    }
}

/// Flat-top `FK(u)` with Euclidean `|u|`.
pub fn flat_top_fk(u: &[f64], b: f64, c: f64) -> f64 {
    flat_top_profile(u.iter().map(|v| v * v).sum::<f64>().sqrt(), b, c)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelSpec {
    /// Registered kernel name, e.g. `flat_top_radial` or `product_flat_top`.
    pub kind: String,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Declared order; `None` means effectively infinite (flat-top).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

fn default_b() -> f64 {
    DEFAULT_B
}

fn default_c() -> f64 {
    DEFAULT_C
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::flat_top_radial()
    }
}

impl KernelSpec {
    pub fn flat_top_radial() -> Self {
        Self {
            kind: "flat_top_radial".into(),
            b: DEFAULT_B,
            c: DEFAULT_C,
            order: None,
        }
    }

    pub fn product_flat_top() -> Self {
        Self {
            kind: "product_flat_top".into(),
            ..Self::flat_top_radial()
        }
    }

    pub fn build(&self) -> Result<Box<dyn FourierKernel>> {
        kernel_registry().build(&self.kind, self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlatTopRadial {
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ProductFlatTop {
    pub b: f64,
    pub c: f64,
}

fn check_flat_top(spec: &KernelSpec) -> Result<()> {
    if !(spec.b.is_finite() && spec.b > 0.0) {
        return Err(Error::config(format!(
            "flat-top b must be positive, got {}",
            spec.b
        )));
    }
    if !(spec.c > 0.0 && spec.c < 1.0) {
        return Err(Error::config(format!(
            "flat-top c must lie in (0, 1), got {}",
            spec.c
        )));
    }
    if spec.order == Some(0) {
        return Err(Error::config("kernel order must be positive"));
    }
    Ok(())
}

impl FourierKernel for FlatTopRadial {
    fn name(&self) -> &'static str {
        "flat_top_radial"
    }

    fn value(&self, u: &[f64]) -> f64 {
        flat_top_fk(u, self.b, self.c)
    }
}

impl FourierKernel for ProductFlatTop {
    fn name(&self) -> &'static str {
        "product_flat_top"
    }

    fn value(&self, u: &[f64]) -> f64 {
        u.iter()
            .map(|v| flat_top_profile(v.abs(), self.b, self.c))
            .product()
    }
}

pub fn kernel_registry() -> &'static Registry<dyn FourierKernel, KernelSpec> {
    static REGISTRY: OnceLock<Registry<dyn FourierKernel, KernelSpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg = Registry::new("kernel");
        reg.register("flat_top_radial", |spec: &KernelSpec| {
            check_flat_top(spec)?;
            Ok(Box::new(FlatTopRadial {
                b: spec.b,
                c: spec.c,
            }) as Box<dyn FourierKernel>)
        });
        reg.register("product_flat_top", |spec: &KernelSpec| {
            check_flat_top(spec)?;
            Ok(Box::new(ProductFlatTop {
                b: spec.b,
                c: spec.c,
            }) as Box<dyn FourierKernel>)
        });
        reg
    })
}

fn check_coverage(grid: &FreqGrid, bandwidth: f64) -> Result<()> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::config(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if grid.u_max() * bandwidth < 1.0 - 1e-12 {
        return Err(Error::config(format!(
            "frequency grid reaches {} but the support extends to 1/h = {}",
            grid.u_max(),
            1.0 / bandwidth
        )));
    }
    Ok(())
}

/// Samples `FK(h u)` at every node (real-valued complex field).
pub fn fk_on_grid(
    kernel: &dyn FourierKernel,
    bandwidth: f64,
    grid: &FreqGrid,
) -> Result<ComplexField> {
    check_coverage(grid, bandwidth)?;
    Ok(ComplexField::from_fn(*grid, |u| {
        let scaled: Vec<f64> = u.iter().map(|v| bandwidth * v).collect();
        Complex64::new(kernel.value(&scaled), 0.0)
    }))
}

/// Weight function with `int W = 1` and support in `[-1, 1]^d`.
pub trait WeightFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn value(&self, u: &[f64]) -> f64;
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightSpec {
    /// Registered weight name: `indicator_box` or `smooth_bump`.
    pub kind: String,
    /// Bandwidth of `W_h`; defaults to the kernel bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl WeightSpec {
    pub fn new(kind: &str, bandwidth: Option<f64>) -> Self {
        Self {
            kind: kind.into(),
            bandwidth,
        }
    }

    pub fn build(&self) -> Result<Box<dyn WeightFunction>> {
        weight_registry().build(&self.kind, self)
    }
}

/// `2^{-d}` on `[-1, 1]^d`.
#[derive(Debug, Clone, Copy)]
pub struct IndicatorBox;

impl WeightFunction for IndicatorBox {
    fn name(&self) -> &'static str {
        "indicator_box"
    }

    fn value(&self, u: &[f64]) -> f64 {
        if u.iter().all(|v| v.abs() <= 1.0) {
            0.5_f64.powi(u.len() as i32)
        } else {
            0.0
        }
    }
}

/// Unnormalized `exp(-1/(1 - t^2))` on `(-1, 1)`.
pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// `int_{-1}^{1} exp(-1/(1 - t^2)) dt`.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        Quadrature::with_abs_tol(1e-15)
            .value(bump, -1.0, 1.0)
            .expect("bump integral converges")
    })
}

/// Product of normalized one-dimensional bumps.
#[derive(Debug, Clone, Copy)]
pub struct SmoothBump {
    mass: f64,
}

impl WeightFunction for SmoothBump {
    fn name(&self) -> &'static str {
        "smooth_bump"
    }

    fn value(&self, u: &[f64]) -> f64 {
        u.iter().map(|&t| bump(t) / self.mass).product()
    }
}

pub fn weight_registry() -> &'static Registry<dyn WeightFunction, WeightSpec> {
    static REGISTRY: OnceLock<Registry<dyn WeightFunction, WeightSpec>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg = Registry::new("weight");
        reg.register("indicator_box", |_: &WeightSpec| {
            Ok(Box::new(IndicatorBox) as Box<dyn WeightFunction>)
        });
        reg.register("smooth_bump", |_: &WeightSpec| {
            Ok(Box::new(SmoothBump { mass: bump_mass() }) as Box<dyn WeightFunction>)
        });
        reg
    })
}

/// `W_h(u) = h^d W(h u)` at every node, in storage order.
pub fn weight_on_grid(
    weight: &dyn WeightFunction,
    bandwidth: f64,
    grid: &FreqGrid,
) -> Result<Vec<f64>> {
    check_coverage(grid, bandwidth)?;
    let d = grid.dim();
    let amplitude = bandwidth.powi(d as i32);
    let mut u = vec![0.0; d];
    Ok((0..grid.len())
        .map(|flat| {
            grid.node(flat, &mut u);
            u.iter_mut().for_each(|v| *v *= bandwidth);
            amplitude * weight.value(&u)
        })
        .collect())
}
