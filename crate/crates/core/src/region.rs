//! Evaluation regions in state space and the smooth test-function family used
//! for functional error checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::kernels::bump;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Region {
    /// `inner <= |x| <= outer`.
    Annulus { inner: f64, outer: f64 },
    /// `|x| <= radius`.
    Ball { radius: f64 },
    /// Axis-aligned box `lo <= x <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Default for Region {
    fn default() -> Self {
        Region::Annulus {
            inner: 0.5,
            outer: 2.0,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Annulus { inner, outer } => {
                let r = norm(x);
                *inner <= r && r <= *outer
            }
            Region::Ball { radius } => norm(x) <= *radius,
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| a <= v && v <= b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Region::Annulus { inner, outer } => {
                *inner >= 0.0 && inner <= outer && outer.is_finite()
            }
            Region::Ball { radius } => *radius >= 0.0 && radius.is_finite(),
            Region::Box { lo, hi } => {
                lo.len() == hi.len()
                    && lo
                        .iter()
                        .zip(hi)
                        .all(|(a, b)| a <= b && a.is_finite() && b.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("malformed region {self:?}")))
        }
    }

    /// Whether the closed box `lo..hi` lies inside the region.
    fn contains_box(&self, lo: &[f64], hi: &[f64]) -> bool {
        // nearest and farthest distances from the origin over the box
        let near: f64 = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| {
                if *a > 0.0 {
                    a * a
                } else if *b < 0.0 {
                    b * b
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt();
        let far: f64 = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (a * a).max(b * b))
            .sum::<f64>()
            .sqrt();
        match self {
            Region::Annulus { inner, outer } => near >= *inner && far <= *outer,
            Region::Ball { radius } => far <= *radius,
            Region::Box { lo: rlo, hi: rhi } => {
                lo.iter().zip(rlo).all(|(a, r)| a >= r) && hi.iter().zip(rhi).all(|(b, r)| b <= r)
            }
        }
    }

    /// Whether the closed ball `|x - center| <= radius` lies inside the region.
    fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        let c = norm(center);
        match self {
            Region::Annulus { inner, outer } => c - radius >= *inner && c + radius <= *outer,
            Region::Ball { radius: r } => c + radius <= *r,
            Region::Box { lo, hi } => center
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| v - radius >= *a && v + radius <= *b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `prod_j g((x_j - c_j) / rho)`, supported on a cube.
    Product,
    /// `g(|x - c| / rho)`, supported on a ball.
    Radial,
}

/// Smooth compactly supported bump built from `g(t) = exp(-1/(1 - t^2))`.
/// Its sup norm is `amplitude * e^{-1}` (radial) or `amplitude * e^{-d}` (product).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub shape: BumpShape,
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl TestFunction {
    pub fn radial(center: Vec<f64>, radius: f64) -> Self {
        Self {
            shape: BumpShape::Radial,
            center,
            radius,
            amplitude: 1.0,
        }
    }

    pub fn product(center: Vec<f64>, radius: f64) -> Self {
        Self {
            shape: BumpShape::Product,
            center,
            radius,
            amplitude: 1.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        match self.shape {
            BumpShape::Radial => {
                let r = x
                    .iter()
                    .zip(&self.center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                self.amplitude * bump(r / self.radius)
            }
            BumpShape::Product => {
                self.amplitude
                    * x.iter()
                        .zip(&self.center)
                        .map(|(a, c)| bump((a - c) / self.radius))
                        .product::<f64>()
            }
        }
    }

    /// Bounding box of the support.
    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
    }

    pub fn support_within(&self, region: &Region) -> bool {
        match self.shape {
            BumpShape::Radial => region.contains_ball(&self.center, self.radius),
            BumpShape::Product => {
                let (lo, hi) = self.support_box();
                region.contains_box(&lo, &hi)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::input(format!(
                "bump radius must be positive, got {}",
                self.radius
            )));
        }
        if !self.amplitude.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("bump parameters must be finite"));
        }
        Ok(())
    }
}

/// Rectangle-rule integral of `f * field` over the defined grid nodes in `region`.
/// For an estimate of `|x|^2 nu` this approximates `int_U f(x) |x|^2 nu(dx)`.
pub fn integrate_against_test_function(
    field: &DensityField,
    f: &TestFunction,
    region: &Region,
) -> Result<f64> {
    f.validate()?;
    region.validate()?;
    if f.center.len() != field.grid.dim() {
        return Err(Error::input(
            "test function dimension does not match the field",
        ));
    }
    if !f.support_within(region) {
        return Err(Error::input(format!(
            "support of the test function centered at {:?} with radius {} is not contained in the region",
            f.center, f.radius
        )));
    }
    let sum: f64 = field
        .grid
        .nodes()
        .filter(|(flat, x)| field.defined[*flat] && region.contains(x))
        .map(|(flat, x)| {
            let fx = f.value(&x);
            if fx == 0.0 {
                0.0
            } else {
                fx * field.values[flat]
            }
        })
        .sum();
    Ok(sum * field.grid.cell_volume())
}
